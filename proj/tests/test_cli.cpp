#include <teleo/cli/runner.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace teleo;
using namespace teleo::cli;

namespace
{

std::string read_scenario_file( const std::string& name )
{
    const char* dir = std::getenv( "TELEO_SCENARIOS" );
    std::ifstream in( std::string( dir ? dir : "scenarios" ) + "/" + name );
    if ( !in )
        throw std::runtime_error( "cannot open scenario " + name );
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

workspace built_workspace( std::string_view text )
{
    workspace ws( load_scenario( text ) );
    ws.build_all();
    return ws;
}

const unifilar_machine* machine_of( const transducer& t )
{
    const auto* node = dynamic_cast< const unifilar_node* >( &t.node() );
    return node ? node->machine().get() : nullptr;
}

} // namespace

TEST( ScenarioParsing, SyntaxErrorsCarryPosition )
{
    try
    {
        load_scenario( "{\n  \"objects\": {,\n}" );
        FAIL() << "expected a parse error";
    }
    catch ( const parse_error& e )
    {
        EXPECT_EQ( e.line(), 2 );
        EXPECT_EQ( e.column(), 15 );
    }
    EXPECT_THROW( load_scenario( "" ), parse_error );
}

TEST( ScenarioParsing, StructuralErrors )
{
    EXPECT_THROW( load_scenario( "[]" ), validation_error );
    EXPECT_THROW( load_scenario( R"({"objects": {}, "extra": 1})" ), validation_error );
    EXPECT_THROW( load_scenario( R"({"tasks": {}})" ), validation_error );
    EXPECT_NO_THROW( load_scenario( R"({"objects": {}, "tasks": []})" ) );
}

TEST( ScenarioParsing, DefinitionErrors )
{
    // Unquoted probabilities are rejected so that values stay exact.
    EXPECT_THROW( built_workspace( R"({"objects": {"c": {"kind": "iid", "inputs": 1, "outputs": 2, "emit": {"0": 0.5, "1": "1/2"}}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"c": {"kind": "iid", "inputs": 1, "outputs": 2, "emit": {"0": "1/3", "1": "1/2"}}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"c": {"kind": "iid", "inputs": 1, "outputs": 2, "emit": {"2": "1"}}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"c": {"kind": "iid", "inputs": 1, "outputs": 1, "telos": true, "emit": {"0:maybe": "1"}}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"m": {"kind": "mixture", "weights": ["1"], "components": ["nope"]}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"m": {"kind": "mixture", "weights": ["1"], "components": ["m"]}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"z": {"kind": "zoo", "name": "dragon"}}})" ), validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"z": {"kind": "wizard"}}})" ), validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"d": {"kind": "deterministic", "inputs": 1, "outputs": 2, "initial": 0, "output": [0], "next": [[3]]}}})" ),
                  validation_error );
    EXPECT_THROW( built_workspace( R"({"objects": {"d": {"kind": "doomed", "of": "p"}, "p": {"kind": "constant", "inputs": 1, "outputs": 3, "output": 0}}})" ),
                  alphabet_mismatch );
}

TEST( ScenarioParsing, TaskValidation )
{
    auto ws = built_workspace( R"({
      "objects": {
        "p": {"kind": "constant", "inputs": 2, "outputs": 2, "output": 0},
        "e": {"kind": "zoo", "name": "doom", "states": 1, "actions": 2}
      },
      "tasks": [{"task": "eval", "policy": "p", "env": "e"}]
    })" );
    EXPECT_THROW( validate_tasks( ws ), validation_error );

    auto missing = built_workspace( R"({"objects": {}, "tasks": [{"task": "eval", "policy": "p", "env": "e"}]})" );
    EXPECT_THROW( validate_tasks( missing ), validation_error );

    auto unnamed = built_workspace( R"({"objects": {}, "tasks": [{"task": "demo"}]})" );
    EXPECT_THROW( validate_tasks( unnamed ), validation_error );
}

TEST( ScenarioDump, RoundTripsToIdenticalMachines )
{
    for ( const char* file : { "basics.json", "examples.json" } )
    {
        auto ws = built_workspace( read_scenario_file( file ) );
        json dumped = ws.dump();
        auto again = built_workspace( dumped.dump() );
        EXPECT_EQ( again.dump(), dumped ) << file;
        for ( const auto& [ name, def ] : ws.source().objects.items() )
        {
            const transducer& a = ws.built( name );
            const transducer& b = again.built( name );
            const auto* ma = machine_of( a );
            const auto* mb = machine_of( b );
            ASSERT_EQ( ma == nullptr, mb == nullptr ) << name;
            if ( ma && def.at( "kind" ) != "zoo" )
            {
                EXPECT_TRUE( *ma == *mb ) << name;
            }
            if ( auto moore = ws.moore( name ) )
            {
                EXPECT_TRUE( *moore == *again.moore( name ) ) << name;
            }
            EXPECT_TRUE( behaviorally_equal( a, b, 3 ) ) << name;
        }
    }
}

TEST( ScenarioRun, ShippedScenariosPass )
{
    for ( const char* file : { "basics.json", "examples.json" } )
    {
        auto ws = built_workspace( read_scenario_file( file ) );
        validate_tasks( ws );
        auto report = run_scenario( ws, run_options{} );
        EXPECT_EQ( report.failures(), 0u ) << report.to_text();
    }
}

TEST( ScenarioRun, StructuredOutputIsDeterministic )
{
    auto ws = built_workspace( read_scenario_file( "basics.json" ) );
    std::string serial = run_scenario( ws, run_options{} ).to_json().dump();
    std::string parallel = run_scenario( ws, run_options{}, true ).to_json().dump();
    EXPECT_EQ( serial, parallel );
    EXPECT_EQ( serial, run_scenario( ws, run_options{} ).to_json().dump() );

    json doc = json::parse( serial );
    ASSERT_TRUE( doc.contains( "summary" ) );
    EXPECT_EQ( doc[ "summary" ][ "failed" ], 0 );
    EXPECT_EQ( doc[ "tasks" ][ 0 ][ "fields" ][ "exact" ], "1" );
}

TEST( ScenarioRun, FailingTasksAreIsolated )
{
    auto ws = built_workspace( R"({
      "objects": {
        "p": {"kind": "deterministic", "inputs": 1, "outputs": 2, "initial": 0, "output": [0], "next": [[0]]},
        "e": {"kind": "zoo", "name": "despair", "states": 1, "actions": 2}
      },
      "tasks": [
        {"task": "check-optimal", "policy": "p", "env": "e", "class": "iid"},
        {"task": "eval", "policy": "p", "env": "e", "expect": "1/3"},
        {"task": "eval", "policy": "p", "env": "e", "expect": "1/2"},
        {"task": "teleport"}
      ]
    })" );
    validate_tasks( ws );
    auto report = run_scenario( ws, run_options{} );
    ASSERT_EQ( report.tasks.size(), 4u );
    EXPECT_EQ( report.tasks[ 0 ].status, "error" );
    EXPECT_NE( report.tasks[ 0 ].message.find( "class_unsupported" ), std::string::npos );
    EXPECT_EQ( report.tasks[ 1 ].status, "failed" );
    EXPECT_EQ( report.tasks[ 2 ].status, "ok" );
    EXPECT_EQ( report.tasks[ 3 ].status, "error" );
    EXPECT_EQ( report.failures(), 3u );
    EXPECT_NE( report.to_text().find( "4 task(s), 3 failed" ), std::string::npos );
}

TEST( Demos, CompiledInDemosReport )
{
    run_options opt;
    for ( const char* name : { "doom-despair", "testing-specifiability", "absent-minded-driver", "tricky-testing",
                               "truncation-equivalence" } )
    {
        auto r = run_demo( name, opt );
        EXPECT_TRUE( r.pass ) << name << " " << r.fields.dump();
    }
    EXPECT_THROW( run_demo( "nope", opt ), validation_error );
}
