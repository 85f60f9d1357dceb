#pragma once

#include "linear.hpp"
#include "machines.hpp"
#include "transducer.hpp"

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace teleo
{

// Environment outputs are pairs (state, telos) coded as 2*s + g, with g = 0
// for nothing and g = 1 for success.
enum class telos : symbol
{
    none = 0,
    success = 1
};

constexpr symbol observation( symbol s, telos g ) { return 2 * s + static_cast< symbol >( g ); }
constexpr symbol observed_state( symbol o ) { return o / 2; }
constexpr bool is_success( symbol o ) { return o % 2 == 1; }

inline std::size_t env_states( const transducer& env ) { return env.outputs() / 2; }
inline std::size_t env_actions( const transducer& env ) { return env.inputs(); }

inline void require_environment( const transducer& env )
{
    if ( env.outputs() % 2 != 0 )
        throw alphabet_mismatch( "environment outputs must be state x telos pairs" );
}

inline void require_pair( const transducer& policy, const transducer& env )
{
    require_environment( env );
    if ( policy.inputs() != env_states( env ) || policy.outputs() != env_actions( env ) )
        throw alphabet_mismatch( "policy is " + std::to_string( policy.inputs() ) + " states -> "
                                 + std::to_string( policy.outputs() ) + " actions, environment is "
                                 + std::to_string( env_actions( env ) ) + " actions -> "
                                 + std::to_string( env_states( env ) ) + " states" );
}

inline rational success_mass( const finite_dist& d )
{
    rational m = 0;
    for ( const auto& [ o, p ] : d )
        if ( is_success( o ) )
            m += p;
    return m;
}

// U_none and U_success over n states.
inline finite_dist uniform_nothing( std::size_t n )
{
    std::vector< finite_dist::entry > e;
    for ( symbol s = 0; s < n; ++s )
        e.emplace_back( observation( s, telos::none ), make_rational( 1, n ) );
    return finite_dist( std::move( e ) );
}

inline finite_dist uniform_success( std::size_t n )
{
    std::vector< finite_dist::entry > e;
    for ( symbol s = 0; s < n; ++s )
        e.emplace_back( observation( s, telos::success ), make_rational( 1, n ) );
    return finite_dist( std::move( e ) );
}

// Coupled system over the trivial input {0}; outputs coded
// (2*s + g) * |A| + a.
struct coupled_symbol
{
    symbol state;
    telos g;
    symbol action;
};

class coupled_node final : public behavior
{
    transducer _policy;
    transducer _env;
    finite_dist _dist;

    [[nodiscard]] symbol actions() const { return static_cast< symbol >( _policy.outputs() ); }

protected:
    behavior_ptr compute_next( symbol, symbol o ) const override
    {
        symbol a = o % actions();
        symbol obs = o / actions();
        return std::make_shared< coupled_node >( _policy.step( observed_state( obs ), a ), _env.step( a, obs ) );
    }
    [[nodiscard]] bool cache_children() const override { return false; }

public:
    coupled_node( transducer policy, transducer env )
        : behavior( 1, env.outputs() * policy.outputs() ), _policy{ std::move( policy ) }, _env{ std::move( env ) },
          _dist{ [ this ] {
              std::vector< finite_dist::entry > e;
              for ( const auto& [ obs, pe ] : _env.emit() )
                  for ( const auto& [ a, pa ] : _policy.emit() )
                      e.emplace_back( obs * actions() + a, pe * pa );
              return finite_dist::trusted( std::move( e ) );
          }() }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        auto kp = _policy.key();
        auto ke = _env.key();
        if ( !kp || !ke )
            return std::nullopt;
        return "c(" + *kp + "|" + *ke + ")";
    }
    [[nodiscard]] bool certified_zero_success() const override { return _env.certified_zero_success(); }

    [[nodiscard]] const transducer& policy() const { return _policy; }
    [[nodiscard]] const transducer& environment() const { return _env; }

    [[nodiscard]] coupled_symbol decode( symbol o ) const
    {
        symbol obs = o / actions();
        return { observed_state( obs ), is_success( obs ) ? telos::success : telos::none, static_cast< symbol >( o % actions() ) };
    }
};

inline transducer couple( const transducer& policy, const transducer& env )
{
    require_pair( policy, env );
    return transducer( std::make_shared< coupled_node >( policy, env ) );
}

inline symbol coupled_encode( std::size_t actions, symbol s, telos g, symbol a )
{
    return observation( s, g ) * static_cast< symbol >( actions ) + a;
}

// Prefix of the success sequence: terms[k] is the probability that the first
// success happens at step k. live_mass is what has not succeeded by step n
// and is not certified to never succeed.
struct bss_prefix
{
    rational bound = 1;
    std::vector< rational > terms;
    rational live_mass = 0;
};

namespace detail
{

// Weighted frontier of coupled nodes; keyed nodes are merged.
struct frontier
{
    std::vector< std::pair< rational, transducer > > items;
    std::unordered_map< std::string, std::size_t > index;

    void add( rational w, transducer t )
    {
        if ( t.certified_zero_success() )
            return;
        if ( auto k = t.key() )
        {
            auto [ it, inserted ] = index.try_emplace( *k, items.size() );
            if ( !inserted )
            {
                items[ it->second ].first += w;
                return;
            }
        }
        items.emplace_back( std::move( w ), std::move( t ) );
    }
};

} // namespace detail

// Action alphabet size of a coupled system, or of a mixture of them.
inline std::size_t coupled_actions( const transducer& coupled )
{
    if ( const auto* node = dynamic_cast< const coupled_node* >( &coupled.node() ) )
        return node->policy().outputs();
    if ( const auto* parts = coupled.node().mixture_components() )
        return coupled_actions( parts->front().component );
    throw alphabet_mismatch( "not a coupled system" );
}

inline bss_prefix success_prefix( const transducer& coupled, std::size_t n )
{
    if ( coupled.inputs() != 1 )
        throw alphabet_mismatch( "success sequences are defined on coupled systems" );
    std::size_t actions = coupled_actions( coupled );

    bss_prefix out;
    detail::frontier cur;
    cur.add( rational( 1 ), coupled );
    for ( std::size_t k = 0; k <= n; ++k )
    {
        rational term = 0;
        detail::frontier nxt;
        for ( auto& [ w, t ] : cur.items )
            for ( const auto& [ o, p ] : t.emit() )
            {
                if ( is_success( o / actions ) )
                    term += w * p;
                else
                    nxt.add( w * p, t.step( 0, o ) );
            }
        out.terms.push_back( term );
        cur = std::move( nxt );
    }
    for ( const auto& [ w, t ] : cur.items )
        out.live_mass += w;
    return out;
}

inline bss_prefix success_prefix( const transducer& policy, const transducer& env, std::size_t n )
{
    return success_prefix( couple( policy, env ), n );
}

// S_n: success within the first n+1 steps (steps 0..n).
inline rational success_within( const transducer& policy, const transducer& env, std::size_t n )
{
    rational total = 0;
    for ( const auto& t : success_prefix( policy, env, n ).terms )
        total += t;
    return total;
}

struct exact_options
{
    // Root mixtures are solved per component and recombined.
    bool decompose_mixtures = true;
    std::size_t max_states = 20000;
};

namespace detail
{

inline rational solve_pair( const transducer& policy, const transducer& env, const exact_options& opt )
{
    struct state
    {
        transducer policy;
        transducer env;
        rational reward = 0;
        std::vector< std::pair< std::size_t, rational > > edges;
        bool zero = false;
    };
    std::deque< state > states;
    std::unordered_map< std::string, std::size_t > index;

    auto intern = [ & ]( const transducer& p, const transducer& e ) -> std::size_t {
        auto kp = p.key();
        auto ke = e.key();
        if ( !kp || !ke )
            throw not_finite_state( std::string( !kp ? "policy" : "environment" ) + " node has no finite-state key" );
        auto [ it, inserted ] = index.try_emplace( *kp + "|" + *ke, states.size() );
        if ( inserted )
        {
            if ( states.size() >= opt.max_states )
                throw not_finite_state( "more than " + std::to_string( opt.max_states ) + " reachable coupled states" );
            states.push_back( state{ p, e, rational( 0 ), {}, false } );
        }
        return it->second;
    };

    intern( policy, env );
    for ( std::size_t q = 0; q < states.size(); ++q )
    {
        if ( states[ q ].env.certified_zero_success() )
        {
            states[ q ].zero = true;
            continue;
        }
        transducer p = states[ q ].policy;
        transducer e = states[ q ].env;
        states[ q ].reward = success_mass( e.emit() );
        std::map< std::size_t, rational > edges;
        for ( const auto& [ a, pa ] : p.emit() )
            for ( const auto& [ obs, pe ] : e.emit() )
            {
                if ( is_success( obs ) )
                    continue;
                std::size_t to = intern( p.step( observed_state( obs ), a ), e.step( a, obs ) );
                edges[ to ] += pa * pe;
            }
        states[ q ].edges.assign( edges.begin(), edges.end() );
    }

    // Minimal solution: states that cannot reach a rewarding state are 0.
    std::size_t n = states.size();
    std::vector< std::vector< std::size_t > > preds( n );
    for ( std::size_t q = 0; q < n; ++q )
        for ( const auto& [ to, w ] : states[ q ].edges )
            preds[ to ].push_back( q );
    std::vector< bool > live( n, false );
    std::vector< std::size_t > work;
    for ( std::size_t q = 0; q < n; ++q )
        if ( !states[ q ].zero && sgn( states[ q ].reward ) > 0 )
        {
            live[ q ] = true;
            work.push_back( q );
        }
    while ( !work.empty() )
    {
        std::size_t q = work.back();
        work.pop_back();
        for ( std::size_t r : preds[ q ] )
            if ( !live[ r ] && !states[ r ].zero )
            {
                live[ r ] = true;
                work.push_back( r );
            }
    }
    if ( !live[ 0 ] )
        return 0;

    std::vector< std::size_t > compact( n, n );
    std::size_t m = 0;
    for ( std::size_t q = 0; q < n; ++q )
        if ( live[ q ] )
            compact[ q ] = m++;
    std::vector< std::vector< rational > > a( m, std::vector< rational >( m ) );
    std::vector< rational > b( m );
    for ( std::size_t q = 0; q < n; ++q )
    {
        if ( !live[ q ] )
            continue;
        std::size_t r = compact[ q ];
        a[ r ][ r ] += 1;
        b[ r ] = states[ q ].reward;
        for ( const auto& [ to, w ] : states[ q ].edges )
            if ( live[ to ] )
                a[ r ][ compact[ to ] ] -= w;
    }
    try
    {
        return solve_linear( std::move( a ), std::move( b ) )[ compact[ 0 ] ];
    }
    catch ( const singular_system& e )
    {
        // Cannot happen once unreachable-success states are removed.
        throw singular_system( std::string( "after zero-success elimination: " ) + e.what() );
    }
}

} // namespace detail

// Exact success probability for finite-state (keyed) pairs, as the minimal
// solution of h = b + M h on the reachable coupled chain.
inline rational success_exact( const transducer& policy, const transducer& env, const exact_options& opt = {} )
{
    require_pair( policy, env );
    if ( opt.decompose_mixtures )
    {
        if ( const auto* parts = policy.node().mixture_components() )
        {
            rational total = 0;
            for ( const auto& part : *parts )
                total += part.weight * success_exact( part.component, env, opt );
            return total;
        }
        if ( const auto* parts = env.node().mixture_components() )
        {
            rational total = 0;
            for ( const auto& part : *parts )
                total += part.weight * success_exact( policy, part.component, opt );
            return total;
        }
    }
    return detail::solve_pair( policy, env, opt );
}

inline std::optional< rational > try_success_exact( const transducer& policy, const transducer& env,
                                                   const exact_options& opt = {} )
{
    try
    {
        return success_exact( policy, env, opt );
    }
    catch ( const not_finite_state& )
    {
        return std::nullopt;
    }
}

struct success_interval
{
    rational lo;
    rational hi;
    std::optional< rational > exact;
    std::size_t horizon_used = 0;
};

inline success_interval success_bounds( const transducer& policy, const transducer& env, std::size_t horizon,
                                        bool with_exact = true )
{
    bss_prefix pre = success_prefix( policy, env, horizon );
    success_interval out;
    out.lo = 0;
    for ( const auto& t : pre.terms )
        out.lo += t;
    out.hi = out.lo + pre.live_mass;
    out.horizon_used = horizon;
    if ( with_exact )
        out.exact = try_success_exact( policy, env );
    return out;
}

// Telos-marginalized evolution: mixture of the two telos branches in
// proportion to their probabilities.
inline transducer ambivalent_evolve( const transducer& env, symbol a, symbol s )
{
    require_environment( env );
    if ( a >= env_actions( env ) || s >= env_states( env ) )
        throw unsupported_observation( "action or state outside the environment alphabets" );
    rational pn = env.emit().prob( observation( s, telos::none ) );
    rational ps = env.emit().prob( observation( s, telos::success ) );
    rational total = pn + ps;
    if ( sgn( total ) == 0 )
        throw unsupported_observation( "state " + std::to_string( s ) + " has probability 0" );
    std::vector< mixture_component > parts;
    if ( sgn( pn ) > 0 )
        parts.push_back( { pn / total, env.step( a, observation( s, telos::none ) ) } );
    if ( sgn( ps ) > 0 )
        parts.push_back( { ps / total, env.step( a, observation( s, telos::success ) ) } );
    return mix( std::move( parts ) );
}

transducer doomify( const transducer& env );

// Folds success mass into nothing for the same state; transitions follow
// the success-ambivalent evolution.
class doomify_node final : public behavior
{
    transducer _env;
    finite_dist _dist;

    static finite_dist fold( const finite_dist& d )
    {
        std::vector< finite_dist::entry > e;
        for ( const auto& [ o, p ] : d )
            e.emplace_back( observation( observed_state( o ), telos::none ), p );
        return finite_dist::trusted( std::move( e ) );
    }

protected:
    behavior_ptr compute_next( symbol a, symbol o ) const override
    {
        return doomify( ambivalent_evolve( _env, a, observed_state( o ) ) ).ptr();
    }

public:
    explicit doomify_node( transducer env )
        : behavior( env.inputs(), env.outputs() ), _env{ std::move( env ) }, _dist{ fold( _env.emit() ) }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        if ( auto k = _env.key() )
            return "D(" + *k + ")";
        return std::nullopt;
    }
    [[nodiscard]] bool certified_zero_success() const override { return true; }
};

inline transducer doomify( const transducer& env )
{
    require_environment( env );
    return transducer( std::make_shared< doomify_node >( env ) );
}

transducer truncate_single_success( const transducer& env );

class truncation_node final : public behavior
{
    transducer _env;

protected:
    behavior_ptr compute_next( symbol a, symbol o ) const override
    {
        transducer child = _env.step( a, o );
        return is_success( o ) ? doomify( child ).ptr() : truncate_single_success( child ).ptr();
    }

public:
    explicit truncation_node( transducer env ) : behavior( env.inputs(), env.outputs() ), _env{ std::move( env ) } {}

    [[nodiscard]] const finite_dist& emit() const override { return _env.emit(); }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        if ( auto k = _env.key() )
            return "Z(" + *k + ")";
        return std::nullopt;
    }
    [[nodiscard]] bool certified_zero_success() const override { return _env.certified_zero_success(); }
};

inline transducer truncate_single_success( const transducer& env )
{
    require_environment( env );
    return transducer( std::make_shared< truncation_node >( env ) );
}

// Finite backing of the truncation of a unifilar environment: a Moore
// machine over (machine state, pending output, after-success flag) whose
// after-success states report nothing in place of success.
inline moore_ptr truncation_machine( const unifilar_machine& m, std::size_t x0 )
{
    if ( m.outputs() % 2 != 0 )
        throw alphabet_mismatch( "environment outputs must be state x telos pairs" );
    std::map< std::tuple< std::size_t, symbol, bool >, std::size_t > ids;
    std::vector< std::tuple< std::size_t, symbol, bool > > hidden;
    auto id_of = [ & ]( std::size_t x, symbol o, bool post ) {
        auto [ it, inserted ] = ids.try_emplace( { x, o, post }, hidden.size() );
        if ( inserted )
            hidden.emplace_back( x, o, post );
        return it->second;
    };

    std::vector< finite_dist::entry > init;
    for ( const auto& [ o, p ] : m.output( x0 ) )
        init.emplace_back( id_of( x0, o, false ), p );

    std::vector< finite_dist > out;
    std::vector< finite_dist > trans;
    for ( std::size_t k = 0; k < hidden.size(); ++k )
    {
        auto [ x, o, post ] = hidden[ k ];
        out.push_back( dist_point( post ? observation( observed_state( o ), telos::none ) : o ) );
        bool post2 = post || is_success( o );
        for ( symbol a = 0; a < m.inputs(); ++a )
        {
            std::size_t x2 = static_cast< std::size_t >( m.transition( x, a, o ) );
            std::vector< finite_dist::entry > e;
            for ( const auto& [ o2, p ] : m.output( x2 ) )
                e.emplace_back( id_of( x2, o2, post2 ), p );
            trans.push_back( finite_dist::trusted( std::move( e ) ) );
        }
    }
    return std::make_shared< moore_machine >( m.inputs(), m.outputs(), finite_dist::trusted( std::move( init ) ),
                                              std::move( out ), std::move( trans ) );
}

// Finite-backed truncation when the environment is a pointed unifilar machine.
inline std::optional< transducer > truncate_finite( const transducer& env )
{
    const auto* node = dynamic_cast< const unifilar_node* >( &env.node() );
    if ( !node )
        return std::nullopt;
    return moore_to_transducer( truncation_machine( *node->machine(), node->state() ) );
}

// Evolution of a policy-environment pair by a sensorimotor trajectory with
// all-nothing telos (inputs = states, outputs = actions).
struct evolved_pair
{
    transducer policy;
    transducer env;
};

inline std::optional< evolved_pair > evolve_pair( const transducer& policy, const transducer& env,
                                                 const trajectory& sa )
{
    transducer p = policy;
    transducer e = env;
    for ( std::size_t k = 0; k < sa.size(); ++k )
    {
        symbol s = sa.input( k );
        symbol a = sa.output( k );
        symbol obs = observation( s, telos::none );
        if ( s >= p.inputs() || !p.supports( a ) || a >= e.inputs() || !e.supports( obs ) )
            return std::nullopt;
        p = p.step( s, a );
        e = e.step( a, obs );
    }
    return evolved_pair{ p, e };
}

} // namespace teleo
