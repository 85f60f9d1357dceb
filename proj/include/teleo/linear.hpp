#pragma once

#include "error.hpp"
#include "rational.hpp"

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace teleo
{

// Dense Gaussian elimination. Rational pivots only need to be nonzero;
// floating-point uses partial pivoting.
template < typename T >
std::vector< T > solve_linear( std::vector< std::vector< T > > a, std::vector< T > b )
{
    const std::size_t n = b.size();
    for ( std::size_t col = 0; col < n; ++col )
    {
        std::size_t pivot = n;
        if constexpr ( std::is_floating_point_v< T > )
        {
            T best = 0;
            for ( std::size_t r = col; r < n; ++r )
                if ( std::abs( a[ r ][ col ] ) > best )
                {
                    best = std::abs( a[ r ][ col ] );
                    pivot = r;
                }
            if ( best < T( 1e-14 ) )
                pivot = n;
        }
        else
        {
            for ( std::size_t r = col; r < n; ++r )
                if ( sgn( a[ r ][ col ] ) != 0 )
                {
                    pivot = r;
                    break;
                }
        }
        if ( pivot == n )
            throw singular_system( "no pivot in column " + std::to_string( col ) );
        std::swap( a[ pivot ], a[ col ] );
        std::swap( b[ pivot ], b[ col ] );

        for ( std::size_t r = col + 1; r < n; ++r )
        {
            if ( a[ r ][ col ] == 0 )
                continue;
            T factor = a[ r ][ col ] / a[ col ][ col ];
            for ( std::size_t c = col; c < n; ++c )
                if ( a[ col ][ c ] != 0 )
                    a[ r ][ c ] -= factor * a[ col ][ c ];
            b[ r ] -= factor * b[ col ];
        }
    }
    std::vector< T > x( n );
    for ( std::size_t r = n; r-- > 0; )
    {
        T acc = b[ r ];
        for ( std::size_t c = r + 1; c < n; ++c )
            if ( a[ r ][ c ] != 0 )
                acc -= a[ r ][ c ] * x[ c ];
        x[ r ] = acc / a[ r ][ r ];
    }
    return x;
}

} // namespace teleo
