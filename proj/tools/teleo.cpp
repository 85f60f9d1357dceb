#include <teleo/cli/runner.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace
{

using namespace teleo;
using namespace teleo::cli;

struct flags
{
    run_options opt;
    std::string alpha = "1/100";
    std::string format = "text";
    bool parallel = false;
};

void add_common( CLI::App* cmd, flags& fl )
{
    cmd->add_option( "--horizon", fl.opt.horizon, "Planner / bound horizon" )->capture_default_str();
    cmd->add_option( "--depth", fl.opt.depth, "Behavioral-equality depth" )->capture_default_str();
    cmd->add_option( "--grid", fl.opt.grid, "i.i.d. grid resolution" )->capture_default_str();
    cmd->add_option( "--alpha", fl.alpha, "Leak probability for the mimic demo (p/q)" )->capture_default_str();
    cmd->add_option( "--n", fl.opt.n, "Size parameter for the mimic demo" )->capture_default_str();
    cmd->add_option( "--format", fl.format, "Report format" )
            ->check( CLI::IsMember( { "text", "structured" } ) )
            ->capture_default_str();
    cmd->add_flag( "--parallel", fl.parallel, "Run independent tasks concurrently" );
}

std::string read_file( const std::string& path )
{
    std::ifstream in( path, std::ios::binary );
    if ( !in )
        throw validation_error( "cannot open '" + path + "'" );
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int emit( const run_report& report, const flags& fl )
{
    if ( fl.format == "structured" )
        std::cout << report.to_json().dump( 2 ) << "\n";
    else
        std::cout << report.to_text();
    return report.failures() == 0 ? 0 : 1;
}

int run_workspace( workspace& ws, flags& fl )
{
    ws.build_all();
    validate_tasks( ws );
    return emit( run_scenario( ws, fl.opt, fl.parallel ), fl );
}

std::vector< std::string > demo_names( const std::vector< std::string >& requested )
{
    if ( !requested.empty() && !( requested.size() == 1 && requested[ 0 ] == "all" ) )
        return requested;
    std::vector< std::string > all;
    for ( const auto& [ name, fn ] : demos() )
        all.push_back( name );
    return all;
}

} // namespace

int main( int argc, char** argv )
{
    CLI::App app{ "Exact evaluation and planning for goal-directed policies and environments" };
    app.require_subcommand( 1 );
    flags fl;

    std::string target;
    bool dump = false;
    auto* run = app.add_subcommand( "run", "Run a scenario file, or demo:NAME" );
    run->add_option( "target", target, "Scenario path or demo:NAME" )->required();
    run->add_flag( "--dump", dump, "Print canonical object definitions and exit" );
    add_common( run, fl );

    std::vector< std::string > names;
    bool list = false;
    auto* demo = app.add_subcommand( "demo", "Run compiled-in demos" );
    demo->add_option( "names", names, "Demo names, or all" );
    demo->add_flag( "--list", list, "List demo names" );
    add_common( demo, fl );

    std::string file, policy, env, expect, trajectory_text, kind = "optimal", cls = "all";
    auto* eval = app.add_subcommand( "eval", "Success probability of a policy in an environment" );
    eval->add_option( "scenario", file )->required();
    eval->add_option( "--policy", policy )->required();
    eval->add_option( "--env", env )->required();
    eval->add_option( "--expect", expect, "Expected exact value (p/q)" );
    add_common( eval, fl );

    auto* plan = app.add_subcommand( "plan", "Optimal finite-horizon value and policy" );
    plan->add_option( "scenario", file )->required();
    plan->add_option( "--env", env )->required();
    add_common( plan, fl );

    auto* check = app.add_subcommand( "check", "Optimality, Bellman and specifiability checks" );
    check->add_option( "scenario", file )->required();
    check->add_option( "--policy", policy )->required();
    check->add_option( "--env", env )->required();
    check->add_option( "--kind", kind )
            ->check( CLI::IsMember( { "optimal", "bellman", "sensorimotor", "specifiable", "preconditions" } ) )
            ->capture_default_str();
    check->add_option( "--class", cls, "all, deterministic, iid or det_ufs" )->capture_default_str();
    check->add_option( "--trajectory", trajectory_text, "Pairs 's,a;s,a' for Bellman checks" );
    add_common( check, fl );

    CLI11_PARSE( app, argc, argv );

    try
    {
        fl.opt.alpha = parse_rational( fl.alpha );
        if ( !is_probability( fl.opt.alpha ) )
            throw validation_error( "--alpha must be a probability" );

        if ( *run )
        {
            if ( target.rfind( "demo:", 0 ) == 0 )
            {
                workspace ws( demo_scenario( demo_names( { target.substr( 5 ) } ) ) );
                return run_workspace( ws, fl );
            }
            workspace ws( load_scenario( read_file( target ) ) );
            if ( dump )
            {
                ws.build_all();
                std::cout << ws.dump().dump( 2 ) << "\n";
                return 0;
            }
            return run_workspace( ws, fl );
        }
        if ( *demo )
        {
            if ( list )
            {
                for ( const auto& [ name, fn ] : demos() )
                    std::cout << name << "\n";
                return 0;
            }
            workspace ws( demo_scenario( demo_names( names ) ) );
            return run_workspace( ws, fl );
        }

        scenario sc = load_scenario( read_file( file ) );
        json task = json::object();
        if ( *eval )
        {
            task = json{ { "task", "eval" }, { "policy", policy }, { "env", env } };
            if ( !expect.empty() )
                task[ "expect" ] = expect;
        }
        else if ( *plan )
            task = json{ { "task", "plan" }, { "env", env } };
        else
        {
            static const std::map< std::string, std::string > tasks{ { "optimal", "check-optimal" },
                                                                    { "bellman", "check-bellman" },
                                                                    { "sensorimotor", "check-sensorimotor" },
                                                                    { "specifiable", "check-specifiable" },
                                                                    { "preconditions", "preconditions" } };
            task = json{ { "task", tasks.at( kind ) }, { "policy", policy }, { "env", env } };
            if ( kind == "optimal" )
                task[ "class" ] = cls;
            if ( kind == "bellman" || kind == "sensorimotor" )
            {
                json pairs = json::array();
                std::stringstream ss( trajectory_text );
                std::string item;
                while ( std::getline( ss, item, ';' ) )
                {
                    auto comma = item.find( ',' );
                    if ( comma == std::string::npos )
                        throw validation_error( "--trajectory: expected 's,a' pairs" );
                    pairs.push_back( json::array( { std::stoul( item.substr( 0, comma ) ),
                                                    std::stoul( item.substr( comma + 1 ) ) } ) );
                }
                task[ "trajectory" ] = pairs;
            }
        }
        sc.tasks = json::array( { task } );
        workspace ws( std::move( sc ) );
        return run_workspace( ws, fl );
    }
    catch ( const std::exception& e )
    {
        std::cerr << e.what() << "\n";
        return 2;
    }
}
