#pragma once

#include "transducer.hpp"

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace teleo
{

// Explicit finite unifilar machine: per-state output distributions and a
// deterministic successor for every (state, input, supported output).
class unifilar_machine
{
public:
    static constexpr int undefined = -1;

private:
    std::size_t _inputs;
    std::size_t _outputs;
    std::vector< finite_dist > _out;
    std::vector< int > _next; // [x][i][o]
    std::vector< std::string > _names;
    std::uint64_t _uid;

    mutable std::once_flag _zero_once;
    mutable std::vector< bool > _zero_success;

    [[nodiscard]] std::size_t index( std::size_t x, symbol i, symbol o ) const
    {
        return ( x * _inputs + i ) * _outputs + o;
    }

    void compute_zero_success() const
    {
        // States that can reach an odd (success) emission, by backward closure.
        std::size_t n = _out.size();
        std::vector< std::vector< std::size_t > > preds( n );
        std::vector< bool > live( n, false );
        std::vector< std::size_t > work;
        for ( std::size_t x = 0; x < n; ++x )
        {
            for ( const auto& [ o, p ] : _out[ x ] )
            {
                if ( o % 2 == 1 && !live[ x ] )
                {
                    live[ x ] = true;
                    work.push_back( x );
                }
                for ( symbol i = 0; i < _inputs; ++i )
                    preds[ static_cast< std::size_t >( _next[ index( x, i, o ) ] ) ].push_back( x );
            }
        }
        while ( !work.empty() )
        {
            std::size_t y = work.back();
            work.pop_back();
            for ( std::size_t x : preds[ y ] )
                if ( !live[ x ] )
                {
                    live[ x ] = true;
                    work.push_back( x );
                }
        }
        _zero_success.assign( n, false );
        for ( std::size_t x = 0; x < n; ++x )
            _zero_success[ x ] = !live[ x ];
    }

public:
    // transitions[x][i][o] gives the successor; entries for unsupported
    // outputs are ignored and may be `undefined`.
    unifilar_machine( std::size_t inputs, std::size_t outputs, std::vector< finite_dist > out,
                      const std::vector< std::vector< std::vector< int > > >& transitions,
                      std::vector< std::string > names = {} )
        : _inputs{ inputs }, _outputs{ outputs }, _out{ std::move( out ) }, _names{ std::move( names ) },
          _uid{ detail::fresh_uid() }
    {
        if ( _inputs == 0 || _outputs == 0 )
            throw empty_alphabet( "machine alphabets must be nonempty" );
        if ( _out.empty() )
            throw validation_error( "machine has no states" );
        if ( transitions.size() != _out.size() )
            throw validation_error( "transition table does not cover every state" );
        if ( !_names.empty() && _names.size() != _out.size() )
            throw validation_error( "state name list has the wrong length" );
        _next.assign( _out.size() * _inputs * _outputs, undefined );
        for ( std::size_t x = 0; x < _out.size(); ++x )
        {
            if ( _out[ x ].max_symbol() >= _outputs )
                throw validation_error( "state " + std::to_string( x ) + " emits a symbol outside the alphabet" );
            if ( transitions[ x ].size() != _inputs )
                throw validation_error( "state " + std::to_string( x ) + " lacks transitions for some input" );
            for ( symbol i = 0; i < _inputs; ++i )
            {
                if ( transitions[ x ][ i ].size() != _outputs )
                    throw validation_error( "state " + std::to_string( x ) + " transition row has wrong width" );
                for ( symbol o = 0; o < _outputs; ++o )
                {
                    int y = transitions[ x ][ i ][ o ];
                    if ( !_out[ x ].contains( o ) )
                        continue;
                    if ( y < 0 || static_cast< std::size_t >( y ) >= _out.size() )
                        throw validation_error( "state " + std::to_string( x ) + " has no successor for input "
                                                + std::to_string( i ) + ", output " + std::to_string( o ) );
                    _next[ index( x, i, o ) ] = y;
                }
            }
        }
    }

    [[nodiscard]] std::size_t inputs() const { return _inputs; }
    [[nodiscard]] std::size_t outputs() const { return _outputs; }
    [[nodiscard]] std::size_t states() const { return _out.size(); }
    [[nodiscard]] std::uint64_t uid() const { return _uid; }
    [[nodiscard]] const std::vector< std::string >& names() const { return _names; }

    [[nodiscard]] const finite_dist& output( std::size_t x ) const
    {
        if ( x >= states() )
            throw unknown_state( std::to_string( x ) );
        return _out[ x ];
    }

    // undefined when o is outside the support at x.
    [[nodiscard]] int transition( std::size_t x, symbol i, symbol o ) const
    {
        if ( x >= states() )
            throw unknown_state( std::to_string( x ) );
        if ( i >= _inputs || o >= _outputs )
            return undefined;
        return _next[ index( x, i, o ) ];
    }

    // Read with the telos coding (odd output = success).
    [[nodiscard]] bool zero_success( std::size_t x ) const
    {
        std::call_once( _zero_once, [ this ] { compute_zero_success(); } );
        return _zero_success.at( x );
    }

    friend bool operator==( const unifilar_machine& a, const unifilar_machine& b )
    {
        if ( a._inputs != b._inputs || a._outputs != b._outputs || !( a._out == b._out ) || a._names != b._names )
            return false;
        for ( std::size_t x = 0; x < a.states(); ++x )
            for ( const auto& [ o, p ] : a._out[ x ] )
                for ( symbol i = 0; i < a._inputs; ++i )
                    if ( a._next[ a.index( x, i, o ) ] != b._next[ b.index( x, i, o ) ] )
                        return false;
        return true;
    }
};

using unifilar_ptr = std::shared_ptr< const unifilar_machine >;

class unifilar_node final : public behavior
{
    unifilar_ptr _machine;
    std::size_t _state;

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override
    {
        return std::make_shared< unifilar_node >( _machine,
                                                  static_cast< std::size_t >( _machine->transition( _state, i, o ) ) );
    }
    [[nodiscard]] bool cache_children() const override { return false; }

public:
    unifilar_node( unifilar_ptr machine, std::size_t state )
        : behavior( machine->inputs(), machine->outputs() ), _machine{ std::move( machine ) }, _state{ state }
    {
        if ( _state >= _machine->states() )
            throw unknown_state( std::to_string( _state ) );
    }

    [[nodiscard]] const finite_dist& emit() const override { return _machine->output( _state ); }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        return "u" + std::to_string( _machine->uid() ) + ":" + std::to_string( _state );
    }
    [[nodiscard]] bool certified_zero_success() const override
    {
        return outputs() % 2 == 0 && _machine->zero_success( _state );
    }

    [[nodiscard]] const unifilar_ptr& machine() const { return _machine; }
    [[nodiscard]] std::size_t state() const { return _state; }
};

inline transducer unifilar_to_transducer( unifilar_ptr m, std::size_t x )
{
    return transducer( std::make_shared< unifilar_node >( std::move( m ), x ) );
}

// Deterministic machine builder: output[x] is the single emitted symbol and
// next[x][i] the successor, independent of the (unique) output.
inline unifilar_ptr deterministic_machine( std::size_t inputs, std::size_t outputs, const std::vector< symbol >& output,
                                           const std::vector< std::vector< int > >& next )
{
    std::vector< finite_dist > out;
    std::vector< std::vector< std::vector< int > > > trans;
    for ( std::size_t x = 0; x < output.size(); ++x )
    {
        out.push_back( dist_point( output[ x ] ) );
        std::vector< std::vector< int > > rows;
        for ( symbol i = 0; i < inputs; ++i )
            rows.emplace_back( outputs, next.at( x ).at( i ) );
        trans.push_back( std::move( rows ) );
    }
    return std::make_shared< unifilar_machine >( inputs, outputs, std::move( out ), trans );
}

// Finite-state stochastic Moore machine.
class moore_machine
{
    std::size_t _inputs;
    std::size_t _outputs;
    finite_dist _init;
    std::vector< finite_dist > _out;        // [y]
    std::vector< finite_dist > _transition; // [y * inputs + i]

public:
    moore_machine( std::size_t inputs, std::size_t outputs, finite_dist init, std::vector< finite_dist > out,
                   std::vector< finite_dist > transition )
        : _inputs{ inputs }, _outputs{ outputs }, _init{ std::move( init ) }, _out{ std::move( out ) },
          _transition{ std::move( transition ) }
    {
        if ( _inputs == 0 || _outputs == 0 )
            throw empty_alphabet( "machine alphabets must be nonempty" );
        if ( _out.empty() )
            throw validation_error( "Moore machine has no states" );
        if ( _transition.size() != _out.size() * _inputs )
            throw validation_error( "transition kernel does not cover every (state, input)" );
        if ( _init.max_symbol() >= _out.size() )
            throw unknown_state( "initial distribution refers to state " + std::to_string( _init.max_symbol() ) );
        for ( std::size_t y = 0; y < _out.size(); ++y )
            if ( _out[ y ].max_symbol() >= _outputs )
                throw validation_error( "state " + std::to_string( y ) + " emits a symbol outside the alphabet" );
        for ( const auto& d : _transition )
            if ( d.max_symbol() >= _out.size() )
                throw unknown_state( "transition kernel refers to state " + std::to_string( d.max_symbol() ) );
    }

    [[nodiscard]] std::size_t inputs() const { return _inputs; }
    [[nodiscard]] std::size_t outputs() const { return _outputs; }
    [[nodiscard]] std::size_t states() const { return _out.size(); }
    [[nodiscard]] const finite_dist& init() const { return _init; }
    [[nodiscard]] const finite_dist& output( std::size_t y ) const { return _out.at( y ); }
    [[nodiscard]] const finite_dist& transition( std::size_t y, symbol i ) const
    {
        return _transition.at( y * _inputs + i );
    }

    [[nodiscard]] moore_machine with_init( finite_dist init ) const
    {
        return moore_machine( _inputs, _outputs, std::move( init ), _out, _transition );
    }

    friend bool operator==( const moore_machine& a, const moore_machine& b )
    {
        return a._inputs == b._inputs && a._outputs == b._outputs && a._init == b._init && a._out == b._out
               && a._transition == b._transition;
    }
};

using moore_ptr = std::shared_ptr< const moore_machine >;

// Unifilar machine over belief states of a Moore machine, materialized on
// demand. Beliefs are interned by their canonical text so that a filter that
// revisits a belief maps to the same state id.
class belief_machine
{
    moore_ptr _moore;
    std::uint64_t _uid;

    mutable std::mutex _mutex;
    mutable std::deque< finite_dist > _beliefs;
    mutable std::deque< finite_dist > _outputs;
    mutable std::map< std::string, std::size_t > _ids;
    mutable std::map< std::tuple< std::size_t, symbol, symbol >, std::size_t > _next;
    std::vector< bool > _zero_success;

    std::vector< bool > compute_zero_success() const
    {
        std::size_t n = _moore->states();
        std::vector< bool > live( n, false );
        bool changed = true;
        for ( std::size_t y = 0; y < n; ++y )
            for ( const auto& [ o, p ] : _moore->output( y ) )
                if ( o % 2 == 1 )
                    live[ y ] = true;
        while ( changed )
        {
            changed = false;
            for ( std::size_t y = 0; y < n; ++y )
            {
                if ( live[ y ] )
                    continue;
                for ( symbol i = 0; i < _moore->inputs() && !live[ y ]; ++i )
                    for ( const auto& [ y2, p ] : _moore->transition( y, i ) )
                        if ( live[ y2 ] )
                        {
                            live[ y ] = true;
                            changed = true;
                            break;
                        }
            }
        }
        std::vector< bool > zero( n );
        for ( std::size_t y = 0; y < n; ++y )
            zero[ y ] = !live[ y ];
        return zero;
    }

    std::size_t intern_locked( finite_dist belief ) const
    {
        auto [ it, inserted ] = _ids.try_emplace( belief.str(), _beliefs.size() );
        if ( inserted )
        {
            std::vector< finite_dist::entry > entries;
            for ( const auto& [ y, w ] : belief )
                for ( const auto& [ o, p ] : _moore->output( y ) )
                    entries.emplace_back( o, w * p );
            _outputs.push_back( finite_dist::trusted( std::move( entries ) ) );
            _beliefs.push_back( std::move( belief ) );
        }
        return it->second;
    }

public:
    explicit belief_machine( moore_ptr moore )
        : _moore{ std::move( moore ) }, _uid{ detail::fresh_uid() }, _zero_success{ compute_zero_success() }
    {
    }

    [[nodiscard]] const moore_machine& moore() const { return *_moore; }
    [[nodiscard]] std::uint64_t uid() const { return _uid; }

    std::size_t intern( const finite_dist& belief ) const
    {
        if ( belief.max_symbol() >= _moore->states() )
            throw unknown_state( "belief refers to state " + std::to_string( belief.max_symbol() ) );
        std::lock_guard lock( _mutex );
        return intern_locked( belief );
    }

    [[nodiscard]] std::size_t size() const
    {
        std::lock_guard lock( _mutex );
        return _beliefs.size();
    }

    // Deque elements never move, so references stay valid after unlocking.
    [[nodiscard]] const finite_dist& belief( std::size_t id ) const
    {
        std::lock_guard lock( _mutex );
        return _beliefs.at( id );
    }

    [[nodiscard]] const finite_dist& output( std::size_t id ) const
    {
        std::lock_guard lock( _mutex );
        return _outputs.at( id );
    }

    // Bayes posterior over the next hidden state given input i and observed o.
    std::size_t transition( std::size_t id, symbol i, symbol o ) const
    {
        std::lock_guard lock( _mutex );
        if ( auto it = _next.find( { id, i, o } ); it != _next.end() )
            return it->second;
        const finite_dist& b = _beliefs.at( id );
        rational norm = _outputs.at( id ).prob( o );
        if ( sgn( norm ) == 0 )
            throw unsupported_output( "output " + std::to_string( o ) + " impossible under belief " + b.str() );
        std::vector< finite_dist::entry > entries;
        for ( const auto& [ y, w ] : b )
        {
            rational like = _moore->output( y ).prob( o );
            if ( sgn( like ) == 0 )
                continue;
            for ( const auto& [ y2, q ] : _moore->transition( y, i ) )
                entries.emplace_back( y2, w * like * q / norm );
        }
        std::size_t next = intern_locked( finite_dist::trusted( std::move( entries ) ) );
        _next.emplace( std::tuple{ id, i, o }, next );
        return next;
    }

    [[nodiscard]] bool zero_success( std::size_t id ) const
    {
        const finite_dist& b = belief( id );
        for ( const auto& [ y, w ] : b )
            if ( !_zero_success[ y ] )
                return false;
        return true;
    }
};

using belief_ptr = std::shared_ptr< const belief_machine >;

class belief_node final : public behavior
{
    belief_ptr _machine;
    std::size_t _id;

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override
    {
        return std::make_shared< belief_node >( _machine, _machine->transition( _id, i, o ) );
    }
    [[nodiscard]] bool cache_children() const override { return false; }

public:
    belief_node( belief_ptr machine, std::size_t id )
        : behavior( machine->moore().inputs(), machine->moore().outputs() ), _machine{ std::move( machine ) },
          _id{ id }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _machine->output( _id ); }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        return "b" + std::to_string( _machine->uid() ) + ":" + std::to_string( _id );
    }
    [[nodiscard]] bool certified_zero_success() const override
    {
        return outputs() % 2 == 0 && _machine->zero_success( _id );
    }
};

struct pointed_belief_machine
{
    std::size_t initial;
    belief_ptr machine;
};

inline pointed_belief_machine moore_to_unifilar( moore_ptr m )
{
    auto bm = std::make_shared< belief_machine >( m );
    std::size_t init = bm->intern( m->init() );
    return { init, std::move( bm ) };
}

inline transducer belief_to_transducer( const belief_ptr& bm, const finite_dist& belief )
{
    return transducer( std::make_shared< belief_node >( bm, bm->intern( belief ) ) );
}

inline transducer moore_to_transducer( moore_ptr m )
{
    auto [ init, bm ] = moore_to_unifilar( std::move( m ) );
    return transducer( std::make_shared< belief_node >( bm, init ) );
}

// Same machine, different prior.
inline transducer moore_to_transducer( const moore_machine& m, finite_dist init )
{
    return moore_to_transducer( std::make_shared< moore_machine >( m.with_init( std::move( init ) ) ) );
}

// Adds an unreachable copy of state 0, giving an (n+1)-state machine with the
// same behavior from every original state.
inline unifilar_ptr pad_machine( const unifilar_machine& m )
{
    std::vector< finite_dist > out;
    std::vector< std::vector< std::vector< int > > > trans;
    for ( std::size_t x = 0; x <= m.states(); ++x )
    {
        std::size_t src = x < m.states() ? x : 0;
        out.push_back( m.output( src ) );
        std::vector< std::vector< int > > rows( m.inputs(), std::vector< int >( m.outputs(), unifilar_machine::undefined ) );
        for ( symbol i = 0; i < m.inputs(); ++i )
            for ( symbol o = 0; o < m.outputs(); ++o )
                rows[ i ][ o ] = m.transition( src, i, o );
        trans.push_back( std::move( rows ) );
    }
    return std::make_shared< unifilar_machine >( m.inputs(), m.outputs(), std::move( out ), trans );
}

} // namespace teleo
