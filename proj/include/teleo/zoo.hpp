#pragma once

#include "teleo.hpp"

#include <functional>
#include <set>

namespace teleo
{

// Builds a telos-coded unifilar environment from per-state emissions and a
// successor rule next(x, a, o).
inline unifilar_ptr environment_machine( std::size_t states, std::size_t actions, std::vector< finite_dist > out,
                                         const std::function< int( std::size_t, symbol, symbol ) >& next,
                                         std::vector< std::string > names = {} )
{
    std::size_t outputs = 2 * states;
    std::vector< std::vector< std::vector< int > > > trans( out.size() );
    for ( std::size_t x = 0; x < out.size(); ++x )
    {
        trans[ x ].assign( actions, std::vector< int >( outputs, unifilar_machine::undefined ) );
        for ( symbol a = 0; a < actions; ++a )
            for ( const auto& [ o, p ] : out[ x ] )
                trans[ x ][ a ][ o ] = next( x, a, o );
    }
    return std::make_shared< unifilar_machine >( actions, outputs, std::move( out ), trans, std::move( names ) );
}

inline transducer doom( std::size_t states, std::size_t actions )
{
    auto m = environment_machine( states, actions, { uniform_nothing( states ) },
                                  []( std::size_t, symbol, symbol ) { return 0; }, { "doom" } );
    return unifilar_to_transducer( m, 0 );
}

inline transducer despair( std::size_t states, std::size_t actions )
{
    auto half = make_rational( 1, 2 );
    auto m = environment_machine( states, actions,
                                  { dist_mix( { half, half }, { uniform_nothing( states ), uniform_success( states ) } ),
                                    uniform_nothing( states ) },
                                  []( std::size_t, symbol, symbol ) { return 1; }, { "despair", "doom" } );
    return unifilar_to_transducer( m, 0 );
}

inline transducer success_env( std::size_t states, std::size_t actions )
{
    auto m = environment_machine( states, actions, { uniform_success( states ), uniform_nothing( states ) },
                                  []( std::size_t, symbol, symbol ) { return 1; }, { "success", "doom" } );
    return unifilar_to_transducer( m, 0 );
}

// States 1..n are symbols 0..n-1 and actions 1..n+1 are symbols 0..n.
// Machine layout: 0 initial, k = mimic(k) for k in 1..n, n+1 despair, n+2 doom.
inline unifilar_ptr counterexample_machine( std::size_t n )
{
    if ( n < 2 )
        throw validation_error( "mimic construction needs n >= 2" );
    const int despair_state = static_cast< int >( n + 1 );
    const int doom_state = static_cast< int >( n + 2 );
    const symbol extra = static_cast< symbol >( n );

    std::vector< finite_dist > out;
    std::vector< std::string > names;
    out.push_back( uniform_nothing( n ) );
    names.push_back( "start" );
    for ( std::size_t k = 1; k <= n; ++k )
    {
        mpz_class pow2 = 1;
        pow2 <<= k;
        rational win( mpz_class( 1 ), pow2 );
        win.canonicalize();
        out.push_back( dist_mix( { rational( 1 - win ), win }, { uniform_nothing( n ), uniform_success( n ) } ) );
        names.push_back( "mimic" + std::to_string( k ) );
    }
    auto half = make_rational( 1, 2 );
    out.push_back( dist_mix( { half, half }, { uniform_nothing( n ), uniform_success( n ) } ) );
    names.push_back( "despair" );
    out.push_back( uniform_nothing( n ) );
    names.push_back( "doom" );

    return environment_machine(
            n, n + 1, std::move( out ),
            [ = ]( std::size_t x, symbol a, symbol o ) -> int {
                int mimic_of_s = static_cast< int >( observed_state( o ) ) + 1;
                if ( x == 0 )
                    return a == extra ? mimic_of_s : doom_state;
                if ( x <= n )
                {
                    if ( a == x - 1 )
                        return mimic_of_s;
                    return a == extra ? despair_state : doom_state;
                }
                return doom_state;
            },
            std::move( names ) );
}

inline transducer counterexample_env( std::size_t n ) { return unifilar_to_transducer( counterexample_machine( n ), 0 ); }

// s_prime is 1-based as in the construction.
inline transducer mimic( std::size_t n, std::size_t s_prime )
{
    if ( s_prime < 1 || s_prime > n )
        throw unknown_state( "mimic index " + std::to_string( s_prime ) );
    return unifilar_to_transducer( counterexample_machine( n ), s_prime );
}

// A = {continue = 0, exit = 1}, one state.
inline transducer absent_minded_env()
{
    constexpr symbol cont = 0;
    constexpr symbol exit = 1;
    auto m = environment_machine( 1, 2,
                                  { uniform_nothing( 1 ), uniform_nothing( 1 ), uniform_success( 1 ), uniform_nothing( 1 ) },
                                  [ = ]( std::size_t x, symbol a, symbol ) -> int {
                                      if ( x == 0 )
                                          return a == cont ? 1 : 3;
                                      if ( x == 1 )
                                          return a == exit ? 2 : 3;
                                      return 3;
                                  },
                                  { "start", "please-exit", "success", "doom" } );
    return unifilar_to_transducer( m, 0 );
}

namespace detail
{

// Walks the keyed reachable part of a policy and rejects stochastic nodes.
inline void require_deterministic( const transducer& policy, std::size_t limit = 4096 )
{
    std::set< std::string > seen;
    std::vector< transducer > work{ policy };
    while ( !work.empty() )
    {
        transducer p = work.back();
        work.pop_back();
        if ( !p.emit().is_point() )
            throw non_deterministic_policy( "policy emits " + p.emit().str() );
        auto k = p.key();
        if ( !k || !seen.insert( *k ).second || seen.size() > limit )
            continue;
        symbol a = p.emit().max_symbol();
        for ( symbol s = 0; s < p.inputs(); ++s )
            work.push_back( p.step( s, a ) );
    }
}

inline finite_dist testing_emission( std::size_t states )
{
    return dist_mix( { make_rational( 1, 4 ), make_rational( 3, 4 ) },
                     { uniform_nothing( states ), uniform_success( states ) } );
}

} // namespace detail

class testing_node final : public behavior
{
    transducer _policy;
    transducer _doom;
    finite_dist _dist;

protected:
    behavior_ptr compute_next( symbol a, symbol o ) const override
    {
        if ( !_policy.supports( a ) )
            return _doom.ptr();
        return std::make_shared< testing_node >( _policy.step( observed_state( o ), a ), _doom );
    }

public:
    testing_node( transducer policy, transducer doom_env )
        : behavior( policy.outputs(), 2 * policy.inputs() ), _policy{ std::move( policy ) },
          _doom{ std::move( doom_env ) }, _dist{ detail::testing_emission( _policy.inputs() ) }
    {
        if ( !_policy.emit().is_point() )
            throw non_deterministic_policy( "policy emits " + _policy.emit().str() );
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        if ( auto k = _policy.key() )
            return "test(" + *k + ")";
        return std::nullopt;
    }
};

inline transducer uniform_testing( const transducer& policy )
{
    detail::require_deterministic( policy );
    return transducer(
            std::make_shared< testing_node >( policy, doom( policy.inputs(), policy.outputs() ) ) );
}

class tricky_node final : public behavior
{
    transducer _policy;
    transducer _after_success;
    transducer _doom;
    finite_dist _dist;

protected:
    behavior_ptr compute_next( symbol a, symbol o ) const override
    {
        // Success wins over the validity check: after any success the
        // environment tests the second policy.
        if ( is_success( o ) )
            return _after_success.ptr();
        if ( !_policy.supports( a ) )
            return _doom.ptr();
        return std::make_shared< tricky_node >( _policy.step( observed_state( o ), a ), _after_success, _doom );
    }

public:
    tricky_node( transducer policy, transducer after_success, transducer doom_env )
        : behavior( policy.outputs(), 2 * policy.inputs() ), _policy{ std::move( policy ) },
          _after_success{ std::move( after_success ) }, _doom{ std::move( doom_env ) },
          _dist{ detail::testing_emission( _policy.inputs() ) }
    {
        if ( !_policy.emit().is_point() )
            throw non_deterministic_policy( "policy emits " + _policy.emit().str() );
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        auto k = _policy.key();
        auto k2 = _after_success.key();
        if ( k && k2 )
            return "tricky(" + *k + "|" + *k2 + ")";
        return std::nullopt;
    }
};

inline transducer tricky_testing( const transducer& policy, const transducer& second )
{
    detail::require_same_alphabets( policy, second, "tricky_testing" );
    detail::require_deterministic( policy );
    transducer after = uniform_testing( second );
    return transducer(
            std::make_shared< tricky_node >( policy, after, doom( policy.inputs(), policy.outputs() ) ) );
}

// Policies used by the mimic construction. Memory states 1..n are symbols
// 0..n-1; the policy remembers the last observed state.
inline unifilar_ptr imperfect_mimic_machine( std::size_t n )
{
    std::vector< symbol > output( n );
    std::vector< std::vector< int > > next( n, std::vector< int >( n ) );
    for ( std::size_t x = 0; x < n; ++x )
    {
        output[ x ] = x + 1 == n ? static_cast< symbol >( n ) : static_cast< symbol >( x );
        for ( symbol s = 0; s < n; ++s )
            next[ x ][ s ] = static_cast< int >( s );
    }
    return deterministic_machine( n, n + 1, output, next );
}

// The n-state imperfect mimic, started in memory state n.
inline transducer imperfect_mimic_policy( std::size_t n )
{
    return unifilar_to_transducer( imperfect_mimic_machine( n ), n - 1 );
}

// Perfect mimic that in memory state n also plays the extra action with
// probability alpha. Started in state start (1-based).
inline transducer leaky_mimic_policy( std::size_t n, const rational& alpha, std::size_t start )
{
    std::vector< finite_dist > out;
    std::vector< std::vector< std::vector< int > > > trans;
    for ( std::size_t x = 0; x < n; ++x )
    {
        if ( x + 1 == n && sgn( alpha ) > 0 )
        {
            std::vector< finite_dist::entry > e{ { static_cast< symbol >( x ), rational( 1 - alpha ) },
                                                 { static_cast< symbol >( n ), alpha } };
            out.push_back( finite_dist( std::move( e ) ) );
        }
        else
            out.push_back( dist_point( static_cast< symbol >( x ) ) );
        std::vector< std::vector< int > > rows( n, std::vector< int >( n + 1 ) );
        for ( symbol s = 0; s < n; ++s )
            for ( symbol a = 0; a <= n; ++a )
                rows[ s ][ a ] = static_cast< int >( s );
        trans.push_back( std::move( rows ) );
    }
    auto m = std::make_shared< unifilar_machine >( n, n + 1, std::move( out ), trans );
    return unifilar_to_transducer( m, start - 1 );
}

} // namespace teleo
