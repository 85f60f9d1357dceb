#pragma once

#include "demos.hpp"

#include <future>
#include <sstream>

namespace teleo::cli
{

struct task_report
{
    std::size_t index = 0;
    std::string task;
    std::string status = "ok"; // ok | failed | error
    json fields = json::object();
    std::string message;
};

struct run_report
{
    std::vector< task_report > tasks;

    [[nodiscard]] std::size_t failures() const
    {
        return static_cast< std::size_t >(
                std::count_if( tasks.begin(), tasks.end(), []( const auto& t ) { return t.status != "ok"; } ) );
    }

    [[nodiscard]] json to_json() const
    {
        json out = json::object();
        out[ "tasks" ] = json::array();
        for ( const auto& t : tasks )
        {
            json j = json::object();
            j[ "index" ] = t.index;
            j[ "task" ] = t.task;
            j[ "status" ] = t.status;
            j[ "fields" ] = t.fields;
            if ( !t.message.empty() )
                j[ "message" ] = t.message;
            out[ "tasks" ].push_back( j );
        }
        out[ "summary" ] = json{ { "total", tasks.size() }, { "failed", failures() } };
        return out;
    }

    [[nodiscard]] std::string to_text() const
    {
        std::ostringstream os;
        for ( const auto& t : tasks )
        {
            os << "#" << t.index << " " << t.task << " " << ( t.status == "ok" ? "OK" : t.status == "failed" ? "FAIL" : "ERROR" )
               << "\n";
            for ( const auto& [ k, v ] : t.fields.items() )
                os << "  " << k << ": " << ( v.is_string() ? v.get< std::string >() : v.dump() ) << "\n";
            if ( !t.message.empty() )
                os << "  message: " << t.message << "\n";
        }
        os << tasks.size() << " task(s), " << failures() << " failed\n";
        return os.str();
    }
};

namespace detail
{

inline const transducer& lookup( const workspace& ws, const json& task, const std::string& key, const std::string& path )
{
    return ws.built( get_string( task, key, path ) );
}

inline std::optional< rational > expected_value( const json& task, const std::string& path )
{
    if ( !task.contains( "expect" ) )
        return std::nullopt;
    return as_rational( task.at( "expect" ), path + ".expect" );
}

inline std::string expected_word( const json& task, const std::string& fallback, const std::string& path )
{
    if ( !task.contains( "expect" ) )
        return fallback;
    return get_string( task, "expect", path );
}

inline constraint_class parse_class( const json& task, const run_options& opt, const std::string& path )
{
    std::string name = task.contains( "class" ) ? get_string( task, "class", path ) : "all";
    if ( name == "all" )
        return constraint_class::all();
    if ( name == "deterministic" )
        return constraint_class::deterministic();
    if ( name == "iid" )
        return constraint_class::iid( get_size_or( task, "grid", opt.grid, path ) );
    if ( name == "det_ufs" )
        return constraint_class::det_ufs( get_size_or( task, "n", opt.n, path ) );
    throw validation_error( path + ".class: unknown class '" + name + "'" );
}

inline void verdict_fields( json& f, const optimality_verdict& v )
{
    f[ "class" ] = v.class_name;
    f[ "verdict" ] = v.verdict_name();
    f[ "policy_lo" ] = fmt( v.policy_lo );
    f[ "policy_hi" ] = fmt( v.policy_hi );
    f[ "policy_exact" ] = v.policy_exact ? fmt( *v.policy_exact ) : "";
    f[ "best_lo" ] = fmt( v.best_lo );
    f[ "best_hi" ] = fmt( v.best_hi );
    f[ "margin" ] = v.margin ? fmt( *v.margin ) : "";
    if ( v.witness_tree )
        f[ "witness_root_action" ] = v.witness_tree->action;
    if ( v.witness_iid )
        f[ "witness_iid" ] = fmt_vector( *v.witness_iid );
    if ( !v.note.empty() )
        f[ "note" ] = v.note;
}

inline void execute( const workspace& ws, const json& task, const run_options& opt, task_report& r )
{
    const std::string path = "tasks[" + std::to_string( r.index ) + "]";
    r.task = get_string( task, "task", path );
    json& f = r.fields;
    std::size_t h = get_size_or( task, "horizon", opt.horizon, path );

    if ( r.task == "eval" )
    {
        const transducer& p = lookup( ws, task, "policy", path );
        const transducer& e = lookup( ws, task, "env", path );
        auto si = success_bounds( p, e, h );
        f[ "policy" ] = task.at( "policy" );
        f[ "env" ] = task.at( "env" );
        f[ "horizon" ] = h;
        f[ "lo" ] = fmt( si.lo );
        f[ "hi" ] = fmt( si.hi );
        f[ "exact" ] = si.exact ? fmt( *si.exact ) : "";
        if ( auto want = expected_value( task, path ) )
        {
            f[ "expect" ] = fmt( *want );
            bool ok = si.exact ? *si.exact == *want : ( si.lo <= *want && *want <= si.hi );
            if ( !ok )
                r.status = "failed";
        }
    }
    else if ( r.task == "plan" )
    {
        const transducer& e = lookup( ws, task, "env", path );
        tree_ptr tree = extract_optimal_policy( e, h );
        f[ "env" ] = task.at( "env" );
        f[ "horizon" ] = h;
        f[ "value" ] = fmt( tree->value );
        f[ "upper_bound" ] = fmt( success_upper_bound( e, h ) );
        f[ "root_action" ] = tree->action;
        f[ "root_unique" ] = tree->unique_argmax;
        f[ "tree_nodes" ] = tree_nodes( *tree );
        if ( auto want = expected_value( task, path ) )
        {
            f[ "expect" ] = fmt( *want );
            if ( tree->value != *want )
                r.status = "failed";
        }
    }
    else if ( r.task == "check-optimal" )
    {
        const transducer& p = lookup( ws, task, "policy", path );
        const transducer& e = lookup( ws, task, "env", path );
        auto v = check_optimal( p, e, h, parse_class( task, opt, path ) );
        verdict_fields( f, v );
        std::string want = expected_word( task, "optimal", path );
        f[ "expect" ] = want;
        if ( v.verdict_name() != want )
            r.status = "failed";
    }
    else if ( r.task == "check-bellman" || r.task == "check-sensorimotor" )
    {
        const transducer& p = lookup( ws, task, "policy", path );
        const transducer& e = lookup( ws, task, "env", path );
        trajectory traj = get_trajectory( field( task, "trajectory", path ), path + ".trajectory" );
        auto report = r.task == "check-bellman" ? bellman_check( p, e, traj, h ) : sensorimotor_bellman_check( p, e, traj, h );
        f[ "trajectory" ] = trajectory_json( traj );
        f[ "result" ] = report.pass ? "pass" : "fail";
        verdict_fields( f, report.verdict );
        std::string want = expected_word( task, "pass", path );
        f[ "expect" ] = want;
        if ( f[ "result" ] != want )
            r.status = "failed";
    }
    else if ( r.task == "check-specifiable" )
    {
        const transducer& p = lookup( ws, task, "policy", path );
        const transducer& e = lookup( ws, task, "env", path );
        auto report = check_specifiable( p, e, h );
        f[ "horizon" ] = h;
        f[ "specifiable" ] = report.specifiable;
        f[ "decision_nodes" ] = report.decision_nodes;
        f[ "min_margin" ] = report.min_margin ? fmt( *report.min_margin ) : "";
        if ( !report.reason.empty() )
            f[ "reason" ] = report.reason;
        bool want = !task.contains( "expect" ) || task.at( "expect" ) == true;
        if ( report.specifiable != want )
            r.status = "failed";
    }
    else if ( r.task == "preconditions" )
    {
        const transducer& p = lookup( ws, task, "policy", path );
        const transducer& e = lookup( ws, task, "env", path );
        std::size_t d = get_size_or( task, "depth", std::min< std::size_t >( opt.depth, 4 ), path );
        auto report = specifiability_preconditions( p, e, d );
        f[ "depth" ] = d;
        f[ "explored" ] = report.explored;
        f[ "uncertain_success" ] = report.uncertain_success;
        f[ "impossible_state" ] = report.impossible_state;
        std::string want = expected_word( task, "clean", path );
        f[ "expect" ] = want;
        if ( ( report.clean() ? "clean" : "violated" ) != want )
            r.status = "failed";
    }
    else if ( r.task == "decompose" )
    {
        const transducer& p = lookup( ws, task, "policy", path );
        std::size_t d = get_size_or( task, "depth", std::min< std::size_t >( opt.depth, 4 ), path );
        auto dec = pointwise_decompose( p, d );
        f[ "found" ] = dec.has_value();
        if ( dec )
        {
            f[ "alpha" ] = fmt( dec->alpha );
            f[ "at" ] = trajectory_json( dec->where );
            f[ "first_emit" ] = evolve( dec->first, dec->where )->emit().str();
            f[ "second_emit" ] = evolve( dec->second, dec->where )->emit().str();
        }
    }
    else if ( r.task == "sweep" )
    {
        const transducer& e = lookup( ws, task, "env", path );
        std::size_t grid = get_size_or( task, "grid", opt.grid, path );
        auto sweep = iid_sweep( e, grid );
        f[ "grid" ] = grid;
        f[ "argmax" ] = fmt_vector( sweep.best );
        f[ "value" ] = fmt( sweep.value );
        f[ "unique" ] = sweep.unique;
        if ( auto want = expected_value( task, path ) )
        {
            f[ "expect" ] = fmt( *want );
            if ( sweep.value != *want )
                r.status = "failed";
        }
    }
    else if ( r.task == "demo" )
    {
        run_options local = opt;
        local.n = get_size_or( task, "n", opt.n, path );
        if ( task.contains( "alpha" ) )
            local.alpha = as_rational( task.at( "alpha" ), path + ".alpha" );
        auto d = run_demo( get_string( task, "name", path ), local );
        f[ "demo" ] = d.name;
        for ( const auto& [ k, v ] : d.fields.items() )
            f[ k ] = v;
        f[ "verdict" ] = d.pass ? "PASS" : "FAIL";
        if ( !d.pass )
            r.status = "failed";
    }
    else
        throw validation_error( path + ".task: unknown task '" + r.task + "'" );
}

} // namespace detail

inline task_report run_task( const workspace& ws, const json& task, std::size_t index, const run_options& opt )
{
    task_report r;
    r.index = index;
    try
    {
        detail::execute( ws, task, opt, r );
    }
    catch ( const std::exception& e )
    {
        r.status = "error";
        r.message = e.what();
    }
    return r;
}

// Checks references and participant alphabets before anything runs.
inline void validate_tasks( const workspace& ws )
{
    const auto& tasks = ws.source().tasks;
    for ( std::size_t k = 0; k < tasks.size(); ++k )
    {
        const std::string path = "tasks[" + std::to_string( k ) + "]";
        const json& t = tasks[ k ];
        std::string kind = detail::get_string( t, "task", path );
        std::optional< transducer > policy;
        std::optional< transducer > env;
        if ( t.contains( "policy" ) )
            policy = ws.built( detail::get_string( t, "policy", path ) );
        if ( t.contains( "env" ) )
        {
            env = ws.built( detail::get_string( t, "env", path ) );
            try
            {
                require_environment( *env );
            }
            catch ( const error& e )
            {
                throw validation_error( path + ": " + e.what() );
            }
        }
        if ( policy && env )
        {
            try
            {
                require_pair( *policy, *env );
            }
            catch ( const error& e )
            {
                throw validation_error( path + ": " + e.what() );
            }
        }
        if ( kind == "demo" )
            detail::get_string( t, "name", path );
    }
}

inline run_report run_scenario( const workspace& ws, const run_options& opt, bool parallel = false )
{
    const auto& tasks = ws.source().tasks;
    run_report out;
    if ( parallel )
    {
        std::vector< std::future< task_report > > pending;
        for ( std::size_t k = 0; k < tasks.size(); ++k )
            pending.push_back( std::async( std::launch::async, [ &, k ] { return run_task( ws, tasks[ k ], k + 1, opt ); } ) );
        for ( auto& f : pending )
            out.tasks.push_back( f.get() );
    }
    else
        for ( std::size_t k = 0; k < tasks.size(); ++k )
            out.tasks.push_back( run_task( ws, tasks[ k ], k + 1, opt ) );
    return out;
}

// A bare demo run is a scenario with a single demo task.
inline scenario demo_scenario( const std::vector< std::string >& names )
{
    scenario sc;
    for ( const auto& n : names )
        sc.tasks.push_back( json{ { "task", "demo" }, { "name", n } } );
    return sc;
}

} // namespace teleo::cli
