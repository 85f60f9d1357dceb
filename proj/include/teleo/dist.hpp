#pragma once

#include "rational.hpp"

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace teleo
{

// Alphabet elements are small integers; display names live in the I/O layer.
using symbol = std::uint32_t;

// Finite-support probability distribution. Entries are sorted by symbol,
// strictly positive and sum to exactly one, so the stored key set is the
// support.
class finite_dist
{
public:
    using entry = std::pair< symbol, rational >;

private:
    std::vector< entry > _entries;

    struct unchecked {};
    finite_dist( std::vector< entry > entries, unchecked ) : _entries{ std::move( entries ) } {}

    static std::vector< entry > normalize_layout( std::vector< entry > entries )
    {
        std::sort( entries.begin(), entries.end(),
                   []( const entry& a, const entry& b ) { return a.first < b.first; } );
        std::vector< entry > merged;
        merged.reserve( entries.size() );
        for ( auto& e : entries )
        {
            if ( !merged.empty() && merged.back().first == e.first )
                merged.back().second += e.second;
            else
                merged.push_back( std::move( e ) );
        }
        std::erase_if( merged, []( const entry& e ) { return sgn( e.second ) == 0; } );
        return merged;
    }

public:
    finite_dist( std::vector< entry > entries )
        : _entries{ normalize_layout( std::move( entries ) ) }
    {
        rational total = 0;
        for ( const auto& [ x, p ] : _entries )
        {
            if ( !is_probability( p ) )
                throw invalid_distribution( "probability " + format_rational( p ) + " outside [0,1]" );
            total += p;
        }
        if ( total != 1 )
            throw invalid_distribution( "entries sum to " + format_rational( total ) + ", not 1" );
    }

    finite_dist( std::initializer_list< entry > entries ) : finite_dist( std::vector< entry >( entries ) ) {}

    // For callers that have already established normalization by construction.
    static finite_dist trusted( std::vector< entry > entries )
    {
        return finite_dist( normalize_layout( std::move( entries ) ), unchecked{} );
    }

    [[nodiscard]] rational prob( symbol x ) const
    {
        auto it = std::lower_bound( _entries.begin(), _entries.end(), x,
                                    []( const entry& e, symbol v ) { return e.first < v; } );
        if ( it != _entries.end() && it->first == x )
            return it->second;
        return 0;
    }

    [[nodiscard]] bool contains( symbol x ) const { return sgn( prob( x ) ) > 0; }

    [[nodiscard]] std::vector< symbol > support() const
    {
        std::vector< symbol > xs;
        xs.reserve( _entries.size() );
        for ( const auto& e : _entries )
            xs.push_back( e.first );
        return xs;
    }

    [[nodiscard]] std::size_t support_size() const { return _entries.size(); }
    [[nodiscard]] bool is_point() const { return _entries.size() == 1; }
    [[nodiscard]] symbol max_symbol() const { return _entries.back().first; }

    [[nodiscard]] auto begin() const { return _entries.begin(); }
    [[nodiscard]] auto end() const { return _entries.end(); }
    [[nodiscard]] const std::vector< entry >& entries() const { return _entries; }

    friend bool operator==( const finite_dist& a, const finite_dist& b ) { return a._entries == b._entries; }

    friend bool operator<( const finite_dist& a, const finite_dist& b )
    {
        return std::lexicographical_compare(
                a._entries.begin(), a._entries.end(), b._entries.begin(), b._entries.end(),
                []( const entry& x, const entry& y ) {
                    return x.first != y.first ? x.first < y.first : x.second < y.second;
                } );
    }

    // Canonical text such as "{0:1/2,1:1/2}", used for interning keys.
    [[nodiscard]] std::string str() const
    {
        std::string out = "{";
        for ( std::size_t k = 0; k < _entries.size(); ++k )
        {
            if ( k )
                out += ',';
            out += std::to_string( _entries[ k ].first ) + ":" + format_rational( _entries[ k ].second );
        }
        return out + "}";
    }
};

inline finite_dist dist_point( symbol x ) { return finite_dist::trusted( { { x, rational( 1 ) } } ); }

inline finite_dist dist_uniform( std::span< const symbol > xs )
{
    if ( xs.empty() )
        throw empty_alphabet( "uniform distribution over an empty set" );
    std::vector< symbol > unique( xs.begin(), xs.end() );
    std::sort( unique.begin(), unique.end() );
    unique.erase( std::unique( unique.begin(), unique.end() ), unique.end() );
    rational p = make_rational( 1, unique.size() );
    std::vector< finite_dist::entry > entries;
    for ( symbol x : unique )
        entries.emplace_back( x, p );
    return finite_dist::trusted( std::move( entries ) );
}

// Uniform over {0, ..., n-1}.
inline finite_dist dist_uniform( std::size_t n )
{
    std::vector< symbol > xs( n );
    for ( std::size_t k = 0; k < n; ++k )
        xs[ k ] = static_cast< symbol >( k );
    return dist_uniform( xs );
}

inline void check_weights( std::span< const rational > weights )
{
    rational total = 0;
    for ( const auto& w : weights )
    {
        if ( !is_probability( w ) )
            throw weight_sum_mismatch( "weight " + format_rational( w ) + " outside [0,1]" );
        total += w;
    }
    if ( total != 1 )
        throw weight_sum_mismatch( "weights sum to " + format_rational( total ) );
}

inline finite_dist dist_mix( std::span< const rational > weights, std::span< const finite_dist > dists )
{
    if ( weights.size() != dists.size() )
        throw weight_sum_mismatch( "weight and distribution lists differ in length" );
    check_weights( weights );
    std::vector< finite_dist::entry > entries;
    for ( std::size_t k = 0; k < weights.size(); ++k )
    {
        if ( sgn( weights[ k ] ) == 0 )
            continue;
        for ( const auto& [ x, p ] : dists[ k ] )
            entries.emplace_back( x, weights[ k ] * p );
    }
    return finite_dist::trusted( std::move( entries ) );
}

inline finite_dist dist_mix( std::initializer_list< rational > weights, std::initializer_list< finite_dist > dists )
{
    return dist_mix( std::span( weights.begin(), weights.size() ), std::span( dists.begin(), dists.size() ) );
}

} // namespace teleo
