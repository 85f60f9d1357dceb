#pragma once

// Seeded random instances shared by unit tests and the acceptance gate.

#include <teleo/teleo.hpp>
#include <teleo/zoo.hpp>

#include <algorithm>
#include <numeric>
#include <random>

namespace teleo::testing
{

using rng = std::mt19937_64;

inline std::size_t uniform_int( rng& g, std::size_t lo, std::size_t hi )
{
    return std::uniform_int_distribution< std::size_t >( lo, hi )( g );
}

// Small denominators keep exact arithmetic cheap.
inline finite_dist random_dist( rng& g, std::size_t alphabet, std::size_t max_support = 0, unsigned weight_cap = 6 )
{
    std::size_t cap = max_support == 0 ? alphabet : std::min( alphabet, max_support );
    std::size_t k = uniform_int( g, 1, cap );
    std::vector< symbol > symbols( alphabet );
    std::iota( symbols.begin(), symbols.end(), 0 );
    std::shuffle( symbols.begin(), symbols.end(), g );
    symbols.resize( k );
    std::vector< unsigned long > weights( k );
    unsigned long total = 0;
    for ( auto& w : weights )
    {
        w = uniform_int( g, 1, weight_cap );
        total += w;
    }
    std::vector< finite_dist::entry > e;
    for ( std::size_t j = 0; j < k; ++j )
        e.emplace_back( symbols[ j ], make_rational( static_cast< long >( weights[ j ] ), total ) );
    return finite_dist( std::move( e ) );
}

inline rational random_weight( rng& g, unsigned den = 8 )
{
    return make_rational( static_cast< long >( uniform_int( g, 1, den - 1 ) ), den );
}

// Stochastic unifilar machine with every state reachable in principle.
inline unifilar_ptr random_unifilar( rng& g, std::size_t states, std::size_t inputs, std::size_t outputs,
                                     std::size_t max_support = 0 )
{
    std::vector< finite_dist > out;
    std::vector< std::vector< std::vector< int > > > trans;
    for ( std::size_t x = 0; x < states; ++x )
    {
        out.push_back( random_dist( g, outputs, max_support ) );
        std::vector< std::vector< int > > rows( inputs, std::vector< int >( outputs ) );
        for ( auto& row : rows )
            for ( auto& y : row )
                y = static_cast< int >( uniform_int( g, 0, states - 1 ) );
        trans.push_back( std::move( rows ) );
    }
    return std::make_shared< unifilar_machine >( inputs, outputs, std::move( out ), trans );
}

inline transducer random_transducer( rng& g, std::size_t states, std::size_t inputs, std::size_t outputs,
                                     std::size_t max_support = 0 )
{
    return unifilar_to_transducer( random_unifilar( g, states, inputs, outputs, max_support ), 0 );
}

inline transducer random_det_policy( rng& g, std::size_t states, std::size_t ns, std::size_t na )
{
    std::vector< symbol > output( states );
    std::vector< std::vector< int > > next( states, std::vector< int >( ns ) );
    for ( std::size_t x = 0; x < states; ++x )
    {
        output[ x ] = static_cast< symbol >( uniform_int( g, 0, na - 1 ) );
        for ( auto& y : next[ x ] )
            y = static_cast< int >( uniform_int( g, 0, states - 1 ) );
    }
    return unifilar_to_transducer( deterministic_machine( ns, na, output, next ), 0 );
}

// Policy: inputs are states, outputs are actions.
inline transducer random_policy( rng& g, std::size_t states, std::size_t ns, std::size_t na )
{
    return random_transducer( g, states, ns, na, 2 );
}

// Telos-coded unifilar environment; success is drawn with moderate mass.
inline transducer random_environment( rng& g, std::size_t states, std::size_t ns, std::size_t na )
{
    return random_transducer( g, states, na, 2 * ns, 3 );
}

// Environment that is doom after `layers` steps: layer k nodes lead only to
// layer k+1, and the last layer leads to an absorbing silent state.
inline transducer random_absorbing_environment( rng& g, std::size_t layers, std::size_t ns, std::size_t na,
                                                std::size_t width = 2 )
{
    std::vector< std::size_t > first;
    std::size_t count = 0;
    std::vector< std::size_t > sizes;
    for ( std::size_t k = 0; k < layers; ++k )
    {
        std::size_t w = k == 0 ? 1 : uniform_int( g, 1, width );
        first.push_back( count );
        sizes.push_back( w );
        count += w;
    }
    const int doom_state = static_cast< int >( count );
    std::vector< finite_dist > out;
    std::vector< std::vector< std::vector< int > > > trans;
    for ( std::size_t k = 0; k < layers; ++k )
        for ( std::size_t j = 0; j < sizes[ k ]; ++j )
        {
            out.push_back( random_dist( g, 2 * ns, 3 ) );
            std::vector< std::vector< int > > rows( na, std::vector< int >( 2 * ns, doom_state ) );
            if ( k + 1 < layers )
                for ( auto& row : rows )
                    for ( auto& y : row )
                        y = static_cast< int >( first[ k + 1 ] + uniform_int( g, 0, sizes[ k + 1 ] - 1 ) );
            trans.push_back( std::move( rows ) );
        }
    out.push_back( uniform_nothing( ns ) );
    trans.push_back( std::vector< std::vector< int > >( na, std::vector< int >( 2 * ns, doom_state ) ) );
    auto m = std::make_shared< unifilar_machine >( na, 2 * ns, std::move( out ), trans );
    return unifilar_to_transducer( m, 0 );
}

inline moore_ptr random_moore( rng& g, std::size_t states, std::size_t inputs, std::size_t outputs )
{
    std::vector< finite_dist > out;
    std::vector< finite_dist > kernel;
    for ( std::size_t y = 0; y < states; ++y )
    {
        out.push_back( random_dist( g, outputs, 2 ) );
        for ( std::size_t i = 0; i < inputs; ++i )
            kernel.push_back( random_dist( g, states, 2 ) );
    }
    return std::make_shared< moore_machine >( inputs, outputs, random_dist( g, states, 2 ), out, kernel );
}

} // namespace teleo::testing
