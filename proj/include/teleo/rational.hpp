#pragma once

#include "error.hpp"

#include <gmpxx.h>

#include <cctype>
#include <string>
#include <string_view>

namespace teleo
{

// Arbitrary precision rational, always kept in canonical reduced form.
using rational = mpq_class;

inline rational make_rational( long num, unsigned long den = 1 )
{
    rational r( num, den );
    r.canonicalize();
    return r;
}

inline bool is_probability( const rational& p ) { return sgn( p ) >= 0 && p <= 1; }

// Accepts "p/q" and "p" (meaning p/1), with an optional leading '-'.
// Whitespace and any other decoration is rejected so that file contents are
// unambiguous.
inline rational parse_rational( std::string_view text )
{
    auto digits = []( std::string_view s, bool allow_sign ) {
        if ( allow_sign && !s.empty() && s.front() == '-' )
            s.remove_prefix( 1 );
        if ( s.empty() )
            return false;
        for ( char c : s )
            if ( !std::isdigit( static_cast< unsigned char >( c ) ) )
                return false;
        return true;
    };

    auto slash = text.find( '/' );
    std::string_view num = text.substr( 0, slash );
    std::string_view den = slash == std::string_view::npos ? std::string_view{ "1" } : text.substr( slash + 1 );

    if ( !digits( num, true ) || !digits( den, false ) )
        throw parse_error( "malformed rational literal '" + std::string( text ) + "'" );

    mpz_class n( std::string( num ), 10 );
    mpz_class d( std::string( den ), 10 );
    if ( d == 0 )
        throw parse_error( "zero denominator in rational literal '" + std::string( text ) + "'" );

    rational r( n, d );
    r.canonicalize();
    return r;
}

// Canonical text: "p/q" in lowest terms, or "p" when the denominator is 1.
inline std::string format_rational( const rational& r )
{
    if ( r.get_den() == 1 )
        return r.get_num().get_str();
    return r.get_num().get_str() + "/" + r.get_den().get_str();
}

} // namespace teleo
