#pragma once

#include "dist.hpp"
#include "error.hpp"

#include <string>
#include <utility>
#include <vector>

namespace teleo
{

// Interleaved input/output string (i : o). Inputs and outputs always have the
// same length.
class trajectory
{
    std::vector< symbol > _inputs;
    std::vector< symbol > _outputs;

public:
    trajectory() = default;

    trajectory( std::vector< symbol > inputs, std::vector< symbol > outputs )
        : _inputs{ std::move( inputs ) }, _outputs{ std::move( outputs ) }
    {
        if ( _inputs.size() != _outputs.size() )
            throw invalid_trajectory( "input and output strings differ in length" );
    }

    trajectory( std::initializer_list< std::pair< symbol, symbol > > pairs )
    {
        for ( auto [ i, o ] : pairs )
            push( i, o );
    }

    [[nodiscard]] std::size_t size() const { return _inputs.size(); }
    [[nodiscard]] bool empty() const { return _inputs.empty(); }
    [[nodiscard]] symbol input( std::size_t k ) const { return _inputs[ k ]; }
    [[nodiscard]] symbol output( std::size_t k ) const { return _outputs[ k ]; }
    [[nodiscard]] const std::vector< symbol >& inputs() const { return _inputs; }
    [[nodiscard]] const std::vector< symbol >& outputs() const { return _outputs; }

    void push( symbol i, symbol o )
    {
        _inputs.push_back( i );
        _outputs.push_back( o );
    }

    // First n pairs.
    [[nodiscard]] trajectory prefix( std::size_t n ) const
    {
        n = std::min( n, size() );
        return { { _inputs.begin(), _inputs.begin() + n }, { _outputs.begin(), _outputs.begin() + n } };
    }

    // Everything after the first n pairs.
    [[nodiscard]] trajectory suffix( std::size_t n ) const
    {
        n = std::min( n, size() );
        return { { _inputs.begin() + n, _inputs.end() }, { _outputs.begin() + n, _outputs.end() } };
    }

    [[nodiscard]] bool is_prefix_of( const trajectory& other ) const
    {
        return size() <= other.size() && std::equal( _inputs.begin(), _inputs.end(), other._inputs.begin() )
               && std::equal( _outputs.begin(), _outputs.end(), other._outputs.begin() );
    }

    friend trajectory operator+( trajectory a, const trajectory& b )
    {
        a._inputs.insert( a._inputs.end(), b._inputs.begin(), b._inputs.end() );
        a._outputs.insert( a._outputs.end(), b._outputs.begin(), b._outputs.end() );
        return a;
    }

    friend bool operator==( const trajectory&, const trajectory& ) = default;

    [[nodiscard]] std::string str() const
    {
        std::string out = "[";
        for ( std::size_t k = 0; k < size(); ++k )
        {
            if ( k )
                out += ',';
            out += "(" + std::to_string( _inputs[ k ] ) + "," + std::to_string( _outputs[ k ] ) + ")";
        }
        return out + "]";
    }
};

} // namespace teleo
