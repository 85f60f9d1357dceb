#pragma once

#include "scenario.hpp"

#include <functional>

namespace teleo::cli
{

struct run_options
{
    std::size_t horizon = 8;
    std::size_t depth = 6;
    std::size_t grid = 100;
    rational alpha = make_rational( 1, 100 );
    std::size_t n = 2;
};

struct demo_result
{
    std::string name;
    bool pass = false;
    json fields = json::object();
};

namespace detail
{

inline std::string fmt( const rational& r ) { return format_rational( r ); }

inline json fmt_vector( const std::vector< rational >& v )
{
    json out = json::array();
    for ( const auto& r : v )
        out.push_back( format_rational( r ) );
    return out;
}

} // namespace detail

inline demo_result demo_doom_despair( const run_options& )
{
    demo_result r{ "doom-despair" };
    const std::size_t ns = 2;
    const std::size_t na = 2;
    transducer policy = make_iid( ns, na, dist_uniform( na ) );
    rational s_doom = success_exact( policy, doom( ns, na ) );
    rational s_despair = success_exact( policy, despair( ns, na ) );
    rational s_success = success_exact( policy, success_env( ns, na ) );
    bool certified = doom( ns, na ).certified_zero_success();
    r.fields[ "doom" ] = detail::fmt( s_doom );
    r.fields[ "despair" ] = detail::fmt( s_despair );
    r.fields[ "success" ] = detail::fmt( s_success );
    r.fields[ "doom_certified" ] = certified;
    r.pass = s_doom == 0 && s_despair == make_rational( 1, 2 ) && s_success == 1 && certified;
    return r;
}

inline demo_result demo_testing_specifiability( const run_options& opt )
{
    demo_result r{ "testing-specifiability" };
    // Two-state policy over |S| = |A| = 2: alternate on state 0, hold on state 1.
    auto machine = deterministic_machine( 2, 2, { 0, 1 }, { { 1, 0 }, { 0, 1 } } );
    transducer policy = unifilar_to_transducer( machine, 0 );
    transducer env = uniform_testing( policy );
    rational value = success_exact( policy, env );
    std::size_t h = std::min< std::size_t >( opt.horizon, 6 );
    auto spec = check_specifiable( policy, env, h );
    rational mismatch = success_exact( make_constant( 2, 2, 0 ), uniform_testing( make_constant( 2, 2, 1 ) ) );
    r.fields[ "value" ] = detail::fmt( value );
    r.fields[ "horizon" ] = h;
    r.fields[ "specifiable" ] = spec.specifiable;
    r.fields[ "min_margin" ] = spec.min_margin ? detail::fmt( *spec.min_margin ) : "";
    r.fields[ "constant_mismatch" ] = detail::fmt( mismatch );
    r.pass = value == 1 && spec.specifiable && mismatch == make_rational( 3, 4 );
    return r;
}

inline demo_result demo_absent_minded_driver( const run_options& opt )
{
    demo_result r{ "absent-minded-driver" };
    transducer env = absent_minded_env();
    auto sweep = iid_sweep( env, opt.grid );
    rational pc = make_rational( 1, 3 );
    rational sample = success_exact( iid_policy( 1, { pc, 1 - pc } ), env );
    r.fields[ "grid" ] = opt.grid;
    r.fields[ "argmax" ] = detail::fmt_vector( sweep.best );
    r.fields[ "value" ] = detail::fmt( sweep.value );
    r.fields[ "unique" ] = sweep.unique;
    r.fields[ "sample_continue_1/3" ] = detail::fmt( sample );
    r.fields[ "deterministic_optimum" ] = detail::fmt( optimal_value( env, opt.horizon ) );
    auto half = make_rational( 1, 2 );
    r.pass = sweep.best == std::vector< rational >{ half, half } && sweep.value == make_rational( 1, 4 )
             && sweep.unique && sample == pc * ( 1 - pc );
    return r;
}

inline rational mimic_formula( std::size_t n )
{
    mpz_class num = ( mpz_class( 1 ) << ( n - 1 ) ) + ( mpz_class( 1 ) << ( n - 2 ) ) - 1;
    mpz_class den = ( mpz_class( 1 ) << n ) - 1;
    rational q( num, den );
    q.canonicalize();
    return q;
}

inline demo_result demo_ufs_counterexample( const run_options& opt )
{
    demo_result r{ "ufs-counterexample" };
    const std::size_t n = opt.n;
    transducer env = counterexample_env( n );
    transducer policy = imperfect_mimic_policy( n );
    rational expected = mimic_formula( n );
    rational value = success_exact( policy, env );
    auto search = det_ufs_search( env, n );

    // Evolve both policies by (first state, extra action).
    const symbol extra = static_cast< symbol >( n );
    trajectory step{ { 0, extra } };
    transducer leaky = leaky_mimic_policy( n, opt.alpha, n );
    auto base = evolve_pair( policy, env, step );
    auto better = evolve_pair( leaky, env, step );
    rational base_value = success_exact( base->policy, base->env );
    rational better_value = success_exact( better->policy, better->env );

    r.fields[ "n" ] = n;
    r.fields[ "alpha" ] = detail::fmt( opt.alpha );
    r.fields[ "expected" ] = detail::fmt( expected );
    r.fields[ "policy_value" ] = detail::fmt( value );
    r.fields[ "enumerated" ] = search.enumerated;
    r.fields[ "best_deterministic" ] = detail::fmt( search.best );
    r.fields[ "best_is_unique" ] = search.unique_behavior;
    r.fields[ "evolved_policy_value" ] = detail::fmt( base_value );
    r.fields[ "evolved_leaky_value" ] = detail::fmt( better_value );
    r.fields[ "strict_improvement" ] = better_value > base_value;
    r.pass = value == expected && search.best <= value && better_value > base_value;
    return r;
}

inline demo_result demo_tricky_testing( const run_options& opt )
{
    demo_result r{ "tricky-testing" };
    transducer p0 = make_constant( 2, 2, 0 );
    transducer p1 = make_constant( 2, 2, 1 );
    transducer env = tricky_testing( p0, p1 );
    trajectory step{ { 0, 0 } };
    transducer ambivalent = ambivalent_evolve( env, 0, 0 );
    rational stay = success_exact( p0, ambivalent );
    rational swap = success_exact( p1, ambivalent );
    auto laden = bellman_check( p0, env, step, opt.horizon );
    auto sensorimotor = sensorimotor_bellman_check( p0, env, step, opt.horizon );
    r.fields[ "evolved_policy_value" ] = detail::fmt( stay );
    r.fields[ "alternative_value" ] = detail::fmt( swap );
    r.fields[ "value_laden" ] = laden.pass ? "PASS" : "FAIL";
    r.fields[ "sensorimotor" ] = sensorimotor.pass ? "PASS" : "FAIL";
    r.fields[ "sensorimotor_failure_expected" ] = true;
    r.pass = stay == make_rational( 13, 16 ) && swap == make_rational( 15, 16 ) && laden.pass && !sensorimotor.pass;
    return r;
}

inline demo_result demo_truncation_equivalence( const run_options& opt )
{
    demo_result r{ "truncation-equivalence" };
    transducer p0 = make_constant( 2, 2, 0 );
    transducer p1 = make_constant( 2, 2, 1 );
    transducer tricky = tricky_testing( p0, p1 );
    transducer testing = uniform_testing( p0 );
    bool equal = behaviorally_equal( truncate_single_success( tricky ), truncate_single_success( testing ), opt.depth );
    bool preserved = true;
    json values = json::array();
    for ( const auto& [ label, p, e ] : std::vector< std::tuple< std::string, transducer, transducer > >{
                  { "tricky/stay", p0, tricky },
                  { "tricky/swap", p1, tricky },
                  { "testing/swap", p1, testing },
                  { "mimic", imperfect_mimic_policy( 2 ), counterexample_env( 2 ) } } )
    {
        rational plain = success_exact( p, e );
        rational cut = success_exact( p, truncate_single_success( e ) );
        preserved = preserved && plain == cut;
        values.push_back( json{ { "case", label }, { "plain", detail::fmt( plain ) }, { "truncated", detail::fmt( cut ) } } );
    }
    r.fields[ "depth" ] = opt.depth;
    r.fields[ "truncated_tricky_equals_truncated_testing" ] = equal;
    r.fields[ "success_preserved" ] = values;
    r.pass = equal && preserved;
    return r;
}

using demo_fn = std::function< demo_result( const run_options& ) >;

inline const std::vector< std::pair< std::string, demo_fn > >& demos()
{
    static const std::vector< std::pair< std::string, demo_fn > > table{
            { "doom-despair", demo_doom_despair },
            { "testing-specifiability", demo_testing_specifiability },
            { "absent-minded-driver", demo_absent_minded_driver },
            { "ufs-counterexample", demo_ufs_counterexample },
            { "tricky-testing", demo_tricky_testing },
            { "truncation-equivalence", demo_truncation_equivalence },
    };
    return table;
}

inline demo_result run_demo( const std::string& name, const run_options& opt )
{
    for ( const auto& [ key, fn ] : demos() )
        if ( key == name )
            return fn( opt );
    throw validation_error( "unknown demo '" + name + "'" );
}

} // namespace teleo::cli
