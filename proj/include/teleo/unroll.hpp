#pragma once

#include "transducer.hpp"

#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace teleo
{

// Causal conditional tables p_n(o_0..o_n | i_0..i_{n-1}) for n <= depth.
// Words are encoded big-endian (first symbol most significant) and level n is
// laid out as levels[n][w * |O|^(n+1) + u].
class unrolled_table
{
    std::size_t _inputs = 0;
    std::size_t _outputs = 0;
    std::size_t _depth = 0;
    std::vector< std::vector< rational > > _levels;

public:
    unrolled_table() = default;

    unrolled_table( std::size_t inputs, std::size_t outputs, std::size_t depth )
        : _inputs{ inputs }, _outputs{ outputs }, _depth{ depth }
    {
        for ( std::size_t n = 0; n <= depth; ++n )
            _levels.emplace_back( input_words( n ) * output_words( n + 1 ) );
    }

    [[nodiscard]] std::size_t inputs() const { return _inputs; }
    [[nodiscard]] std::size_t outputs() const { return _outputs; }
    [[nodiscard]] std::size_t depth() const { return _depth; }

    [[nodiscard]] std::size_t input_words( std::size_t len ) const { return ipow( _inputs, len ); }
    [[nodiscard]] std::size_t output_words( std::size_t len ) const { return ipow( _outputs, len ); }

    static std::size_t ipow( std::size_t b, std::size_t e )
    {
        std::size_t r = 1;
        while ( e-- )
            r *= b;
        return r;
    }

    // n = |w| inputs, n+1 outputs.
    [[nodiscard]] const rational& at( std::size_t n, std::size_t w, std::size_t u ) const
    {
        return _levels[ n ][ w * output_words( n + 1 ) + u ];
    }
    rational& at( std::size_t n, std::size_t w, std::size_t u ) { return _levels[ n ][ w * output_words( n + 1 ) + u ]; }

    [[nodiscard]] const std::vector< rational >& level( std::size_t n ) const { return _levels[ n ]; }

    friend bool operator==( const unrolled_table& a, const unrolled_table& b )
    {
        return a._inputs == b._inputs && a._outputs == b._outputs && a._depth == b._depth && a._levels == b._levels;
    }
};

namespace detail
{

inline void unroll_into( unrolled_table& table, const transducer& t, std::size_t n, std::size_t w, std::size_t u,
                         const rational& mass )
{
    const std::size_t ni = table.inputs();
    const std::size_t no = table.outputs();
    for ( const auto& [ o, p ] : t.emit() )
    {
        rational m = mass * p;
        std::size_t u2 = u * no + o;
        table.at( n, w, u2 ) = m;
        if ( n < table.depth() )
            for ( symbol i = 0; i < ni; ++i )
                unroll_into( table, t.step( i, o ), n + 1, w * ni + i, u2, m );
    }
}

} // namespace detail

inline unrolled_table unroll( const transducer& t, std::size_t depth )
{
    unrolled_table table( t.inputs(), t.outputs(), depth );
    detail::unroll_into( table, t, 0, 0, 0, rational( 1 ) );
    return table;
}

// Conditions the table on the first pair (i, o).
inline unrolled_table unrolled_step( const unrolled_table& table, symbol i, symbol o )
{
    if ( table.depth() == 0 )
        throw invalid_trajectory( "cannot step a depth-0 table" );
    if ( i >= table.inputs() || o >= table.outputs() )
        throw invalid_trajectory( "symbol outside table alphabets" );
    const rational& p0 = table.at( 0, 0, o );
    if ( sgn( p0 ) == 0 )
        throw unsupported_output( "output " + std::to_string( o ) + " has probability 0" );

    unrolled_table out( table.inputs(), table.outputs(), table.depth() - 1 );
    for ( std::size_t n = 0; n <= out.depth(); ++n )
    {
        std::size_t nw = out.input_words( n );
        std::size_t nu = out.output_words( n + 1 );
        std::size_t wbase = i * nw;
        std::size_t ubase = o * nu;
        for ( std::size_t w = 0; w < nw; ++w )
            for ( std::size_t u = 0; u < nu; ++u )
            {
                const rational& v = table.at( n + 1, wbase + w, ubase + u );
                if ( sgn( v ) != 0 )
                    out.at( n, w, u ) = v / p0;
            }
    }
    return out;
}

// Checks that every level is a family of distributions and that level n+1
// marginalizes onto level n for every appended input.
inline bool is_causal( const unrolled_table& table )
{
    const std::size_t no = table.outputs();
    for ( std::size_t n = 0; n <= table.depth(); ++n )
    {
        for ( std::size_t w = 0; w < table.input_words( n ); ++w )
        {
            rational total = 0;
            for ( std::size_t u = 0; u < table.output_words( n + 1 ); ++u )
            {
                if ( sgn( table.at( n, w, u ) ) < 0 )
                    return false;
                total += table.at( n, w, u );
            }
            if ( total != 1 )
                return false;
        }
        if ( n == table.depth() )
            break;
        for ( std::size_t w = 0; w < table.input_words( n ); ++w )
            for ( symbol i = 0; i < table.inputs(); ++i )
                for ( std::size_t u = 0; u < table.output_words( n + 1 ); ++u )
                {
                    rational sum = 0;
                    for ( symbol o = 0; o < no; ++o )
                        sum += table.at( n + 1, w * table.inputs() + i, u * no + o );
                    if ( sum != table.at( n, w, u ) )
                        return false;
                }
    }
    return true;
}

class table_node final : public behavior
{
    unrolled_table _table;
    finite_dist _dist;

    static finite_dist first_level( const unrolled_table& t )
    {
        std::vector< finite_dist::entry > entries;
        for ( symbol o = 0; o < t.outputs(); ++o )
            entries.emplace_back( o, t.at( 0, 0, o ) );
        return finite_dist( std::move( entries ) );
    }

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override
    {
        if ( _table.depth() == 0 )
            return make_iid( inputs(), outputs(), dist_uniform( outputs() ) ).ptr();
        return std::make_shared< table_node >( unrolled_step( _table, i, o ) );
    }

public:
    explicit table_node( unrolled_table table )
        : behavior( table.inputs(), table.outputs() ), _table{ std::move( table ) }, _dist{ first_level( _table ) }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
};

// Inverse of unroll up to the table depth. Past the depth the behavior is a
// fixed uniform i.i.d. filler.
inline transducer reroll( const unrolled_table& table )
{
    return transducer( std::make_shared< table_node >( table ) );
}

namespace detail
{

inline bool equal_paths( const transducer& a, const transducer& b, std::size_t depth,
                         std::set< std::pair< std::string, std::string > >& seen )
{
    if ( a.ptr() == b.ptr() )
        return true;
    if ( !( a.emit() == b.emit() ) )
        return false;
    if ( depth == 0 )
        return true;
    auto ka = a.key();
    auto kb = b.key();
    if ( ka && kb )
    {
        // Keyed pairs are checked once per remaining depth.
        std::string tag = std::to_string( depth );
        if ( !seen.insert( { *ka + "#" + tag, *kb } ).second )
            return true;
    }
    for ( const auto& [ o, p ] : a.emit() )
        for ( symbol i = 0; i < a.inputs(); ++i )
            if ( !equal_paths( a.step( i, o ), b.step( i, o ), depth - 1, seen ) )
                return false;
    return true;
}

} // namespace detail

// Equality of the depth-limited unrollings. Because p_n is the product of
// emissions along the path, comparing emissions at every jointly reachable
// node decides it without materializing the tables.
inline bool behaviorally_equal( const transducer& a, const transducer& b, std::size_t depth )
{
    if ( a.inputs() != b.inputs() || a.outputs() != b.outputs() )
        return false;
    std::set< std::pair< std::string, std::string > > seen;
    return detail::equal_paths( a, b, depth, seen );
}

} // namespace teleo
