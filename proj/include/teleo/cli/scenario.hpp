#pragma once

#include "../planner.hpp"
#include "../zoo.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace teleo::cli
{

using json = nlohmann::ordered_json;

inline std::pair< int, int > line_column( std::string_view text, std::size_t offset )
{
    int line = 1;
    int column = 1;
    for ( std::size_t k = 0; k < offset && k < text.size(); ++k )
    {
        if ( text[ k ] == '\n' )
        {
            ++line;
            column = 1;
        }
        else
            ++column;
    }
    return { line, column };
}

inline json parse_document( std::string_view text )
{
    try
    {
        return json::parse( text );
    }
    catch ( const json::parse_error& e )
    {
        auto [ line, column ] = line_column( text, e.byte > 0 ? e.byte - 1 : 0 );
        std::string msg = e.what();
        if ( auto colon = msg.find( ": " ); colon != std::string::npos )
            msg = msg.substr( colon + 2 );
        throw parse_error( msg, line, column );
    }
}

// Scenario document: named object definitions (file order) plus tasks.
struct scenario
{
    json objects = json::object();
    json tasks = json::array();
};

inline scenario read_scenario( const json& doc )
{
    if ( !doc.is_object() )
        throw validation_error( "scenario must be an object" );
    scenario sc;
    for ( const auto& [ k, v ] : doc.items() )
    {
        if ( k == "objects" )
        {
            if ( !v.is_object() )
                throw validation_error( "'objects' must be an object" );
            sc.objects = v;
        }
        else if ( k == "tasks" )
        {
            if ( !v.is_array() )
                throw validation_error( "'tasks' must be an array" );
            sc.tasks = v;
        }
        else
            throw validation_error( "unknown top-level field '" + k + "'" );
    }
    return sc;
}

inline scenario load_scenario( std::string_view text ) { return read_scenario( parse_document( text ) ); }

namespace detail
{

inline const json& field( const json& j, const std::string& key, const std::string& path )
{
    if ( !j.is_object() || !j.contains( key ) )
        throw validation_error( path + ": missing field '" + key + "'" );
    return j.at( key );
}

inline std::size_t get_size( const json& j, const std::string& key, const std::string& path )
{
    const json& v = field( j, key, path );
    if ( !v.is_number_unsigned() )
        throw validation_error( path + "." + key + ": expected a non-negative integer" );
    return v.get< std::size_t >();
}

inline std::size_t get_size_or( const json& j, const std::string& key, std::size_t fallback, const std::string& path )
{
    return j.contains( key ) ? get_size( j, key, path ) : fallback;
}

inline std::string get_string( const json& j, const std::string& key, const std::string& path )
{
    const json& v = field( j, key, path );
    if ( !v.is_string() )
        throw validation_error( path + "." + key + ": expected a string" );
    return v.get< std::string >();
}

inline rational as_rational( const json& v, const std::string& path )
{
    if ( !v.is_string() )
        throw validation_error( path + ": rationals are written as quoted \"p/q\" strings" );
    return parse_rational( v.get< std::string >() );
}

inline std::string observation_key( symbol o )
{
    return std::to_string( observed_state( o ) ) + ( is_success( o ) ? ":success" : ":none" );
}

inline std::string symbol_key( symbol o, bool telos_coded )
{
    return telos_coded ? observation_key( o ) : std::to_string( o );
}

inline symbol parse_symbol( const std::string& text, bool telos_coded, std::size_t alphabet, const std::string& path )
{
    auto number = [ & ]( std::string_view s ) -> symbol {
        if ( s.empty() || s.size() > 9 || !std::all_of( s.begin(), s.end(), []( char c ) { return std::isdigit( c ); } ) )
            throw validation_error( path + ": malformed symbol '" + text + "'" );
        return static_cast< symbol >( std::stoul( std::string( s ) ) );
    };
    symbol out;
    if ( telos_coded )
    {
        auto colon = text.find( ':' );
        if ( colon == std::string::npos )
            throw validation_error( path + ": observation '" + text + "' must be written state:none or state:success" );
        std::string g = text.substr( colon + 1 );
        if ( g != "none" && g != "success" )
            throw validation_error( path + ": telos must be 'none' or 'success', got '" + g + "'" );
        out = observation( number( std::string_view( text ).substr( 0, colon ) ),
                           g == "success" ? telos::success : telos::none );
    }
    else
        out = number( text );
    if ( out >= alphabet )
        throw validation_error( path + ": symbol '" + text + "' outside the alphabet" );
    return out;
}

inline finite_dist get_dist( const json& v, bool telos_coded, std::size_t alphabet, const std::string& path )
{
    if ( !v.is_object() || v.empty() )
        throw validation_error( path + ": expected a nonempty object of symbol to probability" );
    std::vector< finite_dist::entry > entries;
    for ( const auto& [ k, p ] : v.items() )
        entries.emplace_back( parse_symbol( k, telos_coded, alphabet, path ), as_rational( p, path + "." + k ) );
    try
    {
        return finite_dist( std::move( entries ) );
    }
    catch ( const invalid_distribution& e )
    {
        throw validation_error( path + ": " + e.what() );
    }
}

inline json dist_json( const finite_dist& d, bool telos_coded )
{
    json out = json::object();
    for ( const auto& [ o, p ] : d )
        out[ symbol_key( o, telos_coded ) ] = format_rational( p );
    return out;
}

inline trajectory get_trajectory( const json& v, const std::string& path )
{
    if ( !v.is_array() )
        throw validation_error( path + ": trajectory must be an array of [input, output] pairs" );
    trajectory t;
    for ( std::size_t k = 0; k < v.size(); ++k )
    {
        const json& pair = v[ k ];
        if ( !pair.is_array() || pair.size() != 2 || !pair[ 0 ].is_number_unsigned() || !pair[ 1 ].is_number_unsigned() )
            throw validation_error( path + "[" + std::to_string( k ) + "]: expected [input, output]" );
        t.push( pair[ 0 ].get< symbol >(), pair[ 1 ].get< symbol >() );
    }
    return t;
}

inline json trajectory_json( const trajectory& t )
{
    json out = json::array();
    for ( std::size_t k = 0; k < t.size(); ++k )
        out.push_back( json::array( { t.input( k ), t.output( k ) } ) );
    return out;
}

} // namespace detail

// Resolves object definitions into transducers, keeping the explicit
// machines around for canonical re-emission.
class workspace
{
    scenario _sc;
    std::map< std::string, transducer > _built;
    std::map< std::string, json > _canonical;
    std::set< std::string > _building;
    std::map< std::string, moore_ptr > _moore;

    struct machine_alphabets
    {
        std::size_t inputs;
        std::size_t outputs; // raw symbol count
        std::size_t declared; // as written: |S| when telos coded
        bool telos_coded;
    };

    static machine_alphabets alphabets( const json& def, const std::string& path )
    {
        bool telos_coded = def.contains( "telos" ) && def.at( "telos" ).is_boolean() && def.at( "telos" ).get< bool >();
        std::size_t in = detail::get_size( def, "inputs", path );
        std::size_t out = detail::get_size( def, "outputs", path );
        if ( in == 0 || out == 0 )
            throw validation_error( path + ": alphabets must be nonempty" );
        return { in, telos_coded ? 2 * out : out, out, telos_coded };
    }

    static json header( const std::string& kind, const machine_alphabets& ab )
    {
        json j = json::object();
        j[ "kind" ] = kind;
        j[ "inputs" ] = ab.inputs;
        j[ "outputs" ] = ab.declared;
        if ( ab.telos_coded )
            j[ "telos" ] = true;
        return j;
    }

    static json unifilar_json( const unifilar_machine& m, std::size_t initial, const machine_alphabets& ab )
    {
        json j = header( "unifilar", ab );
        j[ "initial" ] = initial;
        json states = json::array();
        for ( std::size_t x = 0; x < m.states(); ++x )
        {
            json s = json::object();
            if ( !m.names().empty() )
                s[ "name" ] = m.names()[ x ];
            s[ "emit" ] = detail::dist_json( m.output( x ), ab.telos_coded );
            json next = json::array();
            for ( symbol i = 0; i < m.inputs(); ++i )
            {
                json row = json::object();
                for ( const auto& [ o, p ] : m.output( x ) )
                    row[ detail::symbol_key( o, ab.telos_coded ) ] = m.transition( x, i, o );
                next.push_back( row );
            }
            s[ "next" ] = next;
            states.push_back( s );
        }
        j[ "states" ] = states;
        return j;
    }

    transducer build_unifilar( const json& def, const std::string& path )
    {
        auto ab = alphabets( def, path );
        const json& states = detail::field( def, "states", path );
        if ( !states.is_array() || states.empty() )
            throw validation_error( path + ".states: expected a nonempty array" );
        std::vector< finite_dist > out;
        std::vector< std::vector< std::vector< int > > > trans;
        std::vector< std::string > names;
        for ( std::size_t x = 0; x < states.size(); ++x )
        {
            std::string sp = path + ".states[" + std::to_string( x ) + "]";
            const json& st = states[ x ];
            out.push_back( detail::get_dist( detail::field( st, "emit", sp ), ab.telos_coded, ab.outputs, sp + ".emit" ) );
            if ( st.contains( "name" ) )
                names.push_back( detail::get_string( st, "name", sp ) );
            const json& next = detail::field( st, "next", sp );
            if ( !next.is_array() || next.size() != ab.inputs )
                throw validation_error( sp + ".next: expected one row per input" );
            std::vector< std::vector< int > > rows( ab.inputs, std::vector< int >( ab.outputs, unifilar_machine::undefined ) );
            for ( symbol i = 0; i < ab.inputs; ++i )
            {
                std::string rp = sp + ".next[" + std::to_string( i ) + "]";
                if ( !next[ i ].is_object() )
                    throw validation_error( rp + ": expected an object of output to state" );
                for ( const auto& [ k, y ] : next[ i ].items() )
                {
                    symbol o = detail::parse_symbol( k, ab.telos_coded, ab.outputs, rp );
                    if ( !y.is_number_unsigned() || y.get< std::size_t >() >= states.size() )
                        throw validation_error( rp + "." + k + ": unknown state" );
                    rows[ i ][ o ] = y.get< int >();
                }
            }
            trans.push_back( std::move( rows ) );
        }
        if ( !names.empty() && names.size() != states.size() )
            throw validation_error( path + ": either every state is named or none is" );
        std::size_t initial = detail::get_size( def, "initial", path );
        if ( initial >= states.size() )
            throw validation_error( path + ".initial: unknown state" );
        auto m = std::make_shared< unifilar_machine >( ab.inputs, ab.outputs, std::move( out ), trans, std::move( names ) );
        _canonical[ path ] = unifilar_json( *m, initial, ab );
        return unifilar_to_transducer( m, initial );
    }

    transducer build_deterministic( const json& def, const std::string& path )
    {
        auto ab = alphabets( def, path );
        if ( ab.telos_coded )
            throw validation_error( path + ": deterministic machines are policies, not environments" );
        const json& output = detail::field( def, "output", path );
        const json& next = detail::field( def, "next", path );
        if ( !output.is_array() || output.empty() || !next.is_array() || next.size() != output.size() )
            throw validation_error( path + ": 'output' and 'next' must be arrays with one entry per state" );
        std::vector< symbol > outs;
        std::vector< std::vector< int > > succ;
        for ( std::size_t x = 0; x < output.size(); ++x )
        {
            std::string sp = path + ".output[" + std::to_string( x ) + "]";
            if ( !output[ x ].is_number_unsigned() || output[ x ].get< std::size_t >() >= ab.outputs )
                throw validation_error( sp + ": symbol outside the alphabet" );
            outs.push_back( output[ x ].get< symbol >() );
            std::string np = path + ".next[" + std::to_string( x ) + "]";
            if ( !next[ x ].is_array() || next[ x ].size() != ab.inputs )
                throw validation_error( np + ": expected one successor per input" );
            std::vector< int > row;
            for ( const auto& y : next[ x ] )
            {
                if ( !y.is_number_unsigned() || y.get< std::size_t >() >= output.size() )
                    throw validation_error( np + ": unknown state" );
                row.push_back( y.get< int >() );
            }
            succ.push_back( std::move( row ) );
        }
        std::size_t initial = detail::get_size( def, "initial", path );
        if ( initial >= output.size() )
            throw validation_error( path + ".initial: unknown state" );
        auto m = deterministic_machine( ab.inputs, ab.outputs, outs, succ );
        json j = header( "deterministic", ab );
        j[ "initial" ] = initial;
        j[ "output" ] = outs;
        j[ "next" ] = succ;
        _canonical[ path ] = j;
        return unifilar_to_transducer( m, initial );
    }

    transducer build_moore( const json& def, const std::string& path )
    {
        auto ab = alphabets( def, path );
        const json& states = detail::field( def, "states", path );
        if ( !states.is_array() || states.empty() )
            throw validation_error( path + ".states: expected a nonempty array" );
        std::size_t n = states.size();
        std::vector< finite_dist > out;
        std::vector< finite_dist > kernel;
        for ( std::size_t y = 0; y < n; ++y )
        {
            std::string sp = path + ".states[" + std::to_string( y ) + "]";
            out.push_back( detail::get_dist( detail::field( states[ y ], "emit", sp ), ab.telos_coded, ab.outputs,
                                             sp + ".emit" ) );
            const json& next = detail::field( states[ y ], "next", sp );
            if ( !next.is_array() || next.size() != ab.inputs )
                throw validation_error( sp + ".next: expected one distribution per input" );
            for ( symbol i = 0; i < ab.inputs; ++i )
                kernel.push_back(
                        detail::get_dist( next[ i ], false, n, sp + ".next[" + std::to_string( i ) + "]" ) );
        }
        finite_dist init = detail::get_dist( detail::field( def, "initial", path ), false, n, path + ".initial" );
        auto m = std::make_shared< moore_machine >( ab.inputs, ab.outputs, init, out, kernel );

        json j = header( "moore", ab );
        j[ "initial" ] = detail::dist_json( m->init(), false );
        json js = json::array();
        for ( std::size_t y = 0; y < n; ++y )
        {
            json s = json::object();
            s[ "emit" ] = detail::dist_json( m->output( y ), ab.telos_coded );
            json next = json::array();
            for ( symbol i = 0; i < ab.inputs; ++i )
                next.push_back( detail::dist_json( m->transition( y, i ), false ) );
            s[ "next" ] = next;
            js.push_back( s );
        }
        j[ "states" ] = js;
        _canonical[ path ] = j;
        _moore[ path ] = m;
        return moore_to_transducer( m );
    }

    transducer build_zoo( const json& def, const std::string& path )
    {
        std::string name = detail::get_string( def, "name", path );
        json canon = json::object();
        canon[ "kind" ] = "zoo";
        canon[ "name" ] = name;
        auto take = [ & ]( const std::string& key ) {
            std::size_t v = detail::get_size( def, key, path );
            canon[ key ] = v;
            return v;
        };
        auto ref = [ & ]( const std::string& key ) {
            std::string r = detail::get_string( def, key, path );
            canon[ key ] = r;
            return get( r, path + "." + key );
        };
        transducer t;
        if ( name == "doom" || name == "despair" || name == "success" )
        {
            std::size_t s = take( "states" );
            std::size_t a = take( "actions" );
            if ( s == 0 || a == 0 )
                throw validation_error( path + ": alphabets must be nonempty" );
            t = name == "doom" ? doom( s, a ) : name == "despair" ? despair( s, a ) : success_env( s, a );
        }
        else if ( name == "counterexample" )
            t = counterexample_env( take( "n" ) );
        else if ( name == "mimic" )
        {
            std::size_t n = take( "n" );
            t = mimic( n, take( "state" ) );
        }
        else if ( name == "absent-minded" )
            t = absent_minded_env();
        else if ( name == "uniform-testing" )
            t = uniform_testing( ref( "policy" ) );
        else if ( name == "tricky-testing" )
        {
            transducer p = ref( "policy" );
            t = tricky_testing( p, ref( "second" ) );
        }
        else if ( name == "imperfect-mimic" )
            t = imperfect_mimic_policy( take( "n" ) );
        else if ( name == "leaky-mimic" )
        {
            std::size_t n = take( "n" );
            rational alpha = detail::as_rational( detail::field( def, "alpha", path ), path + ".alpha" );
            canon[ "alpha" ] = format_rational( alpha );
            if ( !is_probability( alpha ) )
                throw validation_error( path + ".alpha: not a probability" );
            std::size_t start = take( "start" );
            if ( start < 1 || start > n )
                throw validation_error( path + ".start: must be in 1..n" );
            t = leaky_mimic_policy( n, alpha, start );
        }
        else
            throw validation_error( path + ": unknown zoo member '" + name + "'" );
        _canonical[ path ] = canon;
        return t;
    }

    transducer build( const json& def, const std::string& path )
    {
        std::string kind = detail::get_string( def, "kind", path );
        if ( kind == "iid" || kind == "constant" )
        {
            auto ab = alphabets( def, path );
            finite_dist d = kind == "iid"
                                    ? detail::get_dist( detail::field( def, "emit", path ), ab.telos_coded, ab.outputs,
                                                        path + ".emit" )
                                    : dist_point( static_cast< symbol >( detail::get_size( def, "output", path ) ) );
            if ( d.max_symbol() >= ab.outputs )
                throw validation_error( path + ": symbol outside the alphabet" );
            json j = header( "iid", ab );
            j[ "emit" ] = detail::dist_json( d, ab.telos_coded );
            _canonical[ path ] = j;
            return make_iid( ab.inputs, ab.outputs, d );
        }
        if ( kind == "unifilar" )
            return build_unifilar( def, path );
        if ( kind == "deterministic" )
            return build_deterministic( def, path );
        if ( kind == "moore" )
            return build_moore( def, path );
        if ( kind == "zoo" )
            return build_zoo( def, path );
        if ( kind == "mixture" )
        {
            const json& w = detail::field( def, "weights", path );
            const json& c = detail::field( def, "components", path );
            if ( !w.is_array() || !c.is_array() || w.size() != c.size() || w.empty() )
                throw validation_error( path + ": 'weights' and 'components' must be nonempty arrays of equal length" );
            std::vector< rational > weights;
            std::vector< transducer > parts;
            json canon = json::object();
            canon[ "kind" ] = "mixture";
            canon[ "weights" ] = json::array();
            canon[ "components" ] = json::array();
            for ( std::size_t k = 0; k < w.size(); ++k )
            {
                std::string kp = path + ".weights[" + std::to_string( k ) + "]";
                weights.push_back( detail::as_rational( w[ k ], kp ) );
                canon[ "weights" ].push_back( format_rational( weights.back() ) );
                if ( !c[ k ].is_string() )
                    throw validation_error( path + ".components: expected object names" );
                parts.push_back( get( c[ k ].get< std::string >(), path + ".components" ) );
                canon[ "components" ].push_back( c[ k ] );
            }
            _canonical[ path ] = canon;
            try
            {
                return mix( weights, parts );
            }
            catch ( const weight_sum_mismatch& e )
            {
                throw validation_error( path + ": " + e.what() );
            }
        }
        if ( kind == "truncation" || kind == "doomed" )
        {
            std::string of = detail::get_string( def, "of", path );
            transducer env = get( of, path + ".of" );
            require_environment( env );
            _canonical[ path ] = json{ { "kind", kind }, { "of", of } };
            return kind == "truncation" ? truncate_single_success( env ) : doomify( env );
        }
        if ( kind == "evolved" )
        {
            std::string of = detail::get_string( def, "of", path );
            transducer base = get( of, path + ".of" );
            trajectory traj = detail::get_trajectory( detail::field( def, "trajectory", path ), path + ".trajectory" );
            auto t = evolve( base, traj );
            if ( !t )
                throw validation_error( path + ": trajectory " + traj.str() + " is not valid for '" + of + "'" );
            _canonical[ path ] = json{ { "kind", kind }, { "of", of }, { "trajectory", detail::trajectory_json( traj ) } };
            return *t;
        }
        throw validation_error( path + ": unknown kind '" + kind + "'" );
    }

public:
    explicit workspace( scenario sc ) : _sc{ std::move( sc ) } {}

    [[nodiscard]] const scenario& source() const { return _sc; }

    transducer get( const std::string& name, const std::string& from = "tasks" )
    {
        if ( auto it = _built.find( name ); it != _built.end() )
            return it->second;
        if ( !_sc.objects.contains( name ) )
            throw validation_error( from + ": unknown object '" + name + "'" );
        if ( !_building.insert( name ).second )
            throw validation_error( from + ": cyclic reference through '" + name + "'" );
        transducer t;
        try
        {
            t = build( _sc.objects.at( name ), name );
        }
        catch ( ... )
        {
            _building.erase( name );
            throw;
        }
        _building.erase( name );
        _built.emplace( name, t );
        return t;
    }

    // Builds every definition so later lookups are read-only.
    void build_all()
    {
        for ( const auto& [ name, def ] : _sc.objects.items() )
            get( name, name );
    }

    [[nodiscard]] const transducer& built( const std::string& name ) const
    {
        auto it = _built.find( name );
        if ( it == _built.end() )
            throw validation_error( "unknown object '" + name + "'" );
        return it->second;
    }

    [[nodiscard]] moore_ptr moore( const std::string& name ) const
    {
        auto it = _moore.find( name );
        return it == _moore.end() ? nullptr : it->second;
    }

    // Canonical definitions in file order; re-parses to identical machines.
    [[nodiscard]] json dump() const
    {
        json objects = json::object();
        for ( const auto& [ name, def ] : _sc.objects.items() )
            if ( auto it = _canonical.find( name ); it != _canonical.end() )
                objects[ name ] = it->second;
        return json{ { "objects", objects } };
    }
};

} // namespace teleo::cli
