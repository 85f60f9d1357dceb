#pragma once

#include <stdexcept>
#include <string>

namespace teleo
{

// Every failure raised by the library derives from this type so callers
// (the CLI in particular) can isolate a failing task with a single catch.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

#define TELEO_DEFINE_ERROR( name )                                                                 \
    class name : public error                                                                      \
    {                                                                                              \
    public:                                                                                        \
        explicit name( const std::string& what ) : error( #name ": " + what ) {}                  \
    };

TELEO_DEFINE_ERROR( empty_alphabet )
TELEO_DEFINE_ERROR( weight_sum_mismatch )
TELEO_DEFINE_ERROR( invalid_distribution )
TELEO_DEFINE_ERROR( invalid_trajectory )
TELEO_DEFINE_ERROR( unsupported_output )
TELEO_DEFINE_ERROR( unknown_state )
TELEO_DEFINE_ERROR( alphabet_mismatch )
TELEO_DEFINE_ERROR( not_finite_state )
TELEO_DEFINE_ERROR( unsupported_observation )
TELEO_DEFINE_ERROR( non_deterministic_policy )
TELEO_DEFINE_ERROR( class_unsupported )
TELEO_DEFINE_ERROR( singular_system )
TELEO_DEFINE_ERROR( validation_error )

#undef TELEO_DEFINE_ERROR

// Carries the position of the offending token in a text document.
class parse_error : public error
{
    int _line;
    int _column;

public:
    parse_error( const std::string& what, int line = 0, int column = 0 )
        : error( "parse_error: " + what
                 + ( line > 0 ? " (line " + std::to_string( line ) + ", column " + std::to_string( column ) + ")"
                              : std::string{} ) ),
          _line{ line }, _column{ column }
    {
    }

    [[nodiscard]] int line() const { return _line; }
    [[nodiscard]] int column() const { return _column; }
};

} // namespace teleo
