#pragma once

#include "teleo.hpp"
#include "unroll.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace teleo
{

// Fixed total order on actions used to break ties. Empty means numeric.
using action_order = std::vector< symbol >;

namespace detail
{

inline action_order resolve_order( const action_order& order, std::size_t actions )
{
    if ( order.empty() )
    {
        action_order out( actions );
        for ( symbol a = 0; a < actions; ++a )
            out[ a ] = a;
        return out;
    }
    action_order sorted = order;
    std::sort( sorted.begin(), sorted.end() );
    for ( symbol a = 0; a < actions; ++a )
        if ( a >= sorted.size() || sorted[ a ] != a )
            throw validation_error( "action order must be a permutation of the action alphabet" );
    if ( sorted.size() != actions )
        throw validation_error( "action order must be a permutation of the action alphabet" );
    return order;
}

// Memo over (node key, remaining horizon); unkeyed nodes are recomputed.
class value_memo
{
    std::unordered_map< std::string, rational > _values;

public:
    template < typename F >
    rational get( const transducer& env, std::size_t h, F&& compute )
    {
        auto k = env.key();
        if ( !k )
            return compute();
        std::string tag = *k + "#" + std::to_string( h );
        if ( auto it = _values.find( tag ); it != _values.end() )
            return it->second;
        rational v = compute();
        _values.emplace( std::move( tag ), v );
        return v;
    }
};

inline rational optimal_value( const transducer& env, std::size_t h, value_memo& memo )
{
    if ( env.certified_zero_success() )
        return 0;
    return memo.get( env, h, [ & ]() -> rational {
        rational now = success_mass( env.emit() );
        if ( h == 0 )
            return now;
        rational best = 0;
        for ( symbol a = 0; a < env_actions( env ); ++a )
        {
            rational q = 0;
            for ( const auto& [ o, p ] : env.emit() )
                if ( !is_success( o ) )
                    q += p * optimal_value( env.step( a, o ), h - 1, memo );
            if ( q > best )
                best = q;
        }
        return now + best;
    } );
}

// Terminal value 1 at uncertified nodes; mixtures bounded by the mixture of
// component bounds, since the supremum of a sum is at most the sum of suprema.
inline rational success_upper_bound( const transducer& env, std::size_t h, value_memo& memo )
{
    if ( env.certified_zero_success() )
        return 0;
    if ( const auto* parts = env.node().mixture_components() )
    {
        rational total = 0;
        for ( const auto& part : *parts )
            total += part.weight * success_upper_bound( part.component, h, memo );
        return total;
    }
    return memo.get( env, h, [ & ]() -> rational {
        rational now = success_mass( env.emit() );
        rational best = 0;
        for ( symbol a = 0; a < env_actions( env ); ++a )
        {
            rational q = 0;
            for ( const auto& [ o, p ] : env.emit() )
            {
                if ( is_success( o ) )
                    continue;
                transducer child = env.step( a, o );
                if ( h == 0 )
                    q += child.certified_zero_success() ? rational( 0 ) : p;
                else
                    q += p * success_upper_bound( child, h - 1, memo );
            }
            if ( q > best )
                best = q;
        }
        return now + best;
    } );
}

} // namespace detail

// V_h: best probability of a first success within steps 0..h.
inline rational optimal_value( const transducer& env, std::size_t horizon )
{
    require_environment( env );
    detail::value_memo memo;
    return detail::optimal_value( env, horizon, memo );
}

// W_h >= S(pi, env) for every policy pi.
inline rational success_upper_bound( const transducer& env, std::size_t horizon )
{
    require_environment( env );
    detail::value_memo memo;
    return detail::success_upper_bound( env, horizon, memo );
}

// Finite-horizon deterministic policy. Children are keyed by observed state;
// subtrees may be shared.
struct policy_tree
{
    std::size_t horizon = 0;
    symbol action = 0;
    bool unique_argmax = false;
    rational value;                  // value of following this tree from here
    std::optional< rational > margin; // best minus runner-up action value
    std::map< symbol, std::shared_ptr< const policy_tree > > children;
    std::uint64_t id = detail::fresh_uid();
};

using tree_ptr = std::shared_ptr< const policy_tree >;

inline bool same_tree( const policy_tree& a, const policy_tree& b )
{
    if ( a.horizon != b.horizon || a.action != b.action || a.children.size() != b.children.size() )
        return false;
    for ( auto ia = a.children.begin(), ib = b.children.begin(); ia != a.children.end(); ++ia, ++ib )
        if ( ia->first != ib->first || !same_tree( *ia->second, *ib->second ) )
            return false;
    return true;
}

inline std::size_t tree_nodes( const policy_tree& t )
{
    std::size_t n = 1;
    for ( const auto& [ s, c ] : t.children )
        n += tree_nodes( *c );
    return n;
}

namespace detail
{

inline tree_ptr extract( const transducer& env, std::size_t h, const action_order& order, value_memo& memo,
                         std::unordered_map< std::string, tree_ptr >& trees )
{
    std::optional< std::string > tag;
    if ( auto k = env.key() )
    {
        tag = *k + "#" + std::to_string( h );
        if ( auto it = trees.find( *tag ); it != trees.end() )
            return it->second;
    }

    auto node = std::make_shared< policy_tree >();
    node->horizon = h;
    node->value = optimal_value( env, h, memo );
    node->action = order.front();
    if ( h == 0 || env.certified_zero_success() )
    {
        // No remaining decision influences the value.
        node->unique_argmax = false;
    }
    else
    {
        std::vector< rational > q( order.size() );
        for ( std::size_t k = 0; k < order.size(); ++k )
            for ( const auto& [ o, p ] : env.emit() )
                if ( !is_success( o ) )
                    q[ k ] += p * optimal_value( env.step( order[ k ], o ), h - 1, memo );
        std::size_t best = 0;
        for ( std::size_t k = 1; k < q.size(); ++k )
            if ( q[ k ] > q[ best ] )
                best = k;
        node->action = order[ best ];
        std::size_t ties = 0;
        std::optional< rational > runner;
        for ( std::size_t k = 0; k < q.size(); ++k )
        {
            if ( q[ k ] == q[ best ] )
                ++ties;
            else if ( !runner || q[ k ] > *runner )
                runner = q[ k ];
        }
        node->unique_argmax = ties == 1;
        if ( ties > 1 )
            node->margin = rational( 0 );
        else if ( runner )
            node->margin = q[ best ] - *runner;
        for ( const auto& [ o, p ] : env.emit() )
            if ( !is_success( o ) )
                node->children[ observed_state( o ) ] =
                        extract( env.step( node->action, o ), h - 1, order, memo, trees );
    }
    tree_ptr out = node;
    if ( tag )
        trees.emplace( *tag, out );
    return out;
}

} // namespace detail

inline tree_ptr extract_optimal_policy( const transducer& env, std::size_t horizon, const action_order& order = {} )
{
    require_environment( env );
    auto ord = detail::resolve_order( order, env_actions( env ) );
    detail::value_memo memo;
    std::unordered_map< std::string, tree_ptr > trees;
    return detail::extract( env, horizon, ord, memo, trees );
}

// Plays the tree, then the fallback (a constant least action) once the tree
// runs out or an unplanned state is observed.
class tree_policy_node final : public behavior
{
    tree_ptr _tree;
    transducer _fallback;
    finite_dist _dist;

protected:
    behavior_ptr compute_next( symbol s, symbol ) const override
    {
        auto it = _tree->children.find( s );
        if ( it == _tree->children.end() )
            return _fallback.ptr();
        return std::make_shared< tree_policy_node >( it->second, _fallback );
    }
    [[nodiscard]] bool cache_children() const override { return false; }

public:
    tree_policy_node( tree_ptr tree, transducer fallback )
        : behavior( fallback.inputs(), fallback.outputs() ), _tree{ std::move( tree ) },
          _fallback{ std::move( fallback ) }, _dist{ dist_point( _tree->action ) }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override
    {
        return "tree" + std::to_string( _tree->id ) + "/" + *_fallback.key();
    }
};

inline transducer tree_to_policy( const tree_ptr& tree, std::size_t states, std::size_t actions, symbol fallback = 0 )
{
    return transducer( std::make_shared< tree_policy_node >( tree, make_constant( states, actions, fallback ) ) );
}

namespace detail
{

inline tree_ptr deterministify( const transducer& policy, const transducer& env, std::size_t h,
                                const action_order& order, std::unordered_map< std::string, tree_ptr >& memo )
{
    std::optional< std::string > tag;
    auto kp = policy.key();
    auto ke = env.key();
    if ( kp && ke )
    {
        tag = *kp + "|" + *ke + "#" + std::to_string( h );
        if ( auto it = memo.find( *tag ); it != memo.end() )
            return it->second;
    }

    auto node = std::make_shared< policy_tree >();
    node->horizon = h;
    rational now = success_mass( env.emit() );
    node->value = now;

    std::vector< symbol > candidates;
    for ( symbol a : order )
        if ( policy.supports( a ) )
            candidates.push_back( a );
    node->action = candidates.front();

    if ( h > 0 && !env.certified_zero_success() )
    {
        std::optional< rational > best;
        std::size_t ties = 0;
        std::map< symbol, tree_ptr > best_children;
        std::optional< rational > runner;
        for ( symbol a : candidates )
        {
            rational q = 0;
            std::map< symbol, tree_ptr > kids;
            for ( const auto& [ o, p ] : env.emit() )
            {
                if ( is_success( o ) )
                    continue;
                symbol s = observed_state( o );
                tree_ptr sub = deterministify( policy.step( s, a ), env.step( a, o ), h - 1, order, memo );
                q += p * sub->value;
                kids[ s ] = sub;
            }
            if ( !best || q > *best )
            {
                if ( best )
                    runner = *best;
                best = q;
                ties = 1;
                node->action = a;
                best_children = std::move( kids );
            }
            else if ( q == *best )
                ++ties;
            else if ( !runner || q > *runner )
                runner = q;
        }
        node->value = now + *best;
        node->unique_argmax = ties == 1;
        if ( ties > 1 )
            node->margin = rational( 0 );
        else if ( runner )
            node->margin = *best - *runner;
        node->children = std::move( best_children );
    }
    tree_ptr out = node;
    if ( tag )
        memo.emplace( *tag, out );
    return out;
}

} // namespace detail

// Finite-horizon deterministification: at each node, the least action (in the
// given order) among those the policy supports that maximizes the value of
// the deterministified continuation.
inline tree_ptr deterministify( const transducer& policy, const transducer& env, std::size_t horizon,
                                const action_order& order = {} )
{
    require_pair( policy, env );
    auto ord = detail::resolve_order( order, env_actions( env ) );
    std::unordered_map< std::string, tree_ptr > memo;
    return detail::deterministify( policy, env, horizon, ord, memo );
}

// Constraint classes for optimality verdicts.
struct constraint_class
{
    enum class kind
    {
        all,
        deterministic,
        iid,
        det_ufs
    };
    kind k = kind::all;
    std::size_t parameter = 0; // grid resolution for iid, state count for det_ufs

    static constraint_class all() { return { kind::all, 0 }; }
    static constraint_class deterministic() { return { kind::deterministic, 0 }; }
    static constraint_class iid( std::size_t resolution ) { return { kind::iid, resolution }; }
    static constraint_class det_ufs( std::size_t n ) { return { kind::det_ufs, n }; }

    [[nodiscard]] std::string name() const
    {
        switch ( k )
        {
        case kind::all: return "all";
        case kind::deterministic: return "deterministic";
        case kind::iid: return "iid(" + std::to_string( parameter ) + ")";
        case kind::det_ufs: return "det_ufs(" + std::to_string( parameter ) + ")";
        }
        return "?";
    }
};

struct optimality_verdict
{
    enum class kind
    {
        optimal,
        suboptimal,
        inconclusive
    };
    kind verdict = kind::inconclusive;
    std::string class_name;
    rational policy_lo;
    rational policy_hi;
    std::optional< rational > policy_exact;
    rational best_lo; // achievable within the class
    rational best_hi; // upper bound over the class
    std::optional< rational > margin;
    tree_ptr witness_tree;
    std::optional< std::vector< rational > > witness_iid;
    unifilar_ptr witness_machine;
    std::string note;

    [[nodiscard]] std::string verdict_name() const
    {
        switch ( verdict )
        {
        case kind::optimal: return "optimal";
        case kind::suboptimal: return "suboptimal";
        case kind::inconclusive: return "inconclusive";
        }
        return "?";
    }
};

struct iid_sweep_result
{
    std::vector< rational > best;
    rational value;
    bool unique = false;
    std::size_t evaluated = 0;
};

// i.i.d. policy over the environment's actions from a probability vector.
inline transducer iid_policy( std::size_t states, const std::vector< rational >& probs )
{
    std::vector< finite_dist::entry > e;
    for ( symbol a = 0; a < probs.size(); ++a )
        e.emplace_back( a, probs[ a ] );
    return make_iid( states, probs.size(), finite_dist( std::move( e ) ) );
}

// Exact success of every i.i.d. policy on the simplex grid with the given
// resolution (all probability vectors with denominators dividing it).
inline iid_sweep_result iid_sweep( const transducer& env, std::size_t resolution )
{
    require_environment( env );
    if ( resolution < 2 )
        throw validation_error( "grid resolution must be at least 2" );
    const std::size_t k = env_actions( env );
    iid_sweep_result out;
    std::size_t ties = 0;
    std::vector< std::size_t > counts( k, 0 );

    std::function< void( std::size_t, std::size_t ) > rec = [ & ]( std::size_t pos, std::size_t left ) {
        if ( pos + 1 == k )
        {
            counts[ pos ] = left;
            std::vector< rational > probs;
            for ( std::size_t c : counts )
                probs.push_back( make_rational( static_cast< long >( c ), resolution ) );
            rational v = success_exact( iid_policy( env_states( env ), probs ), env );
            ++out.evaluated;
            if ( out.evaluated == 1 || v > out.value )
            {
                out.value = v;
                out.best = probs;
                ties = 1;
            }
            else if ( v == out.value )
                ++ties;
            return;
        }
        for ( std::size_t c = 0; c <= left; ++c )
        {
            counts[ pos ] = c;
            rec( pos + 1, left - c );
        }
    };
    rec( 0, resolution );
    out.unique = ties == 1;
    return out;
}

// Explicit telos-coded environment graph reached under every action, used by
// the floating-point screen of the UFS enumeration.
struct explicit_env
{
    std::vector< double > success;
    std::vector< std::vector< double > > nothing; // [e][s]
    std::vector< std::vector< std::vector< int > > > next; // [e][a][s], -1 when impossible
    std::vector< bool > zero;
};

inline explicit_env explore_environment( const transducer& env, std::size_t limit = 5000 )
{
    require_environment( env );
    const std::size_t ns = env_states( env );
    const std::size_t na = env_actions( env );
    explicit_env out;
    std::vector< transducer > nodes;
    std::unordered_map< std::string, int > index;
    auto intern = [ & ]( const transducer& e ) -> int {
        auto k = e.key();
        if ( !k )
            throw not_finite_state( "environment node has no finite-state key" );
        auto [ it, inserted ] = index.try_emplace( *k, static_cast< int >( nodes.size() ) );
        if ( inserted )
        {
            if ( nodes.size() >= limit )
                throw not_finite_state( "environment has more than " + std::to_string( limit ) + " reachable nodes" );
            nodes.push_back( e );
        }
        return it->second;
    };
    intern( env );
    for ( std::size_t q = 0; q < nodes.size(); ++q )
    {
        transducer e = nodes[ q ];
        out.zero.push_back( e.certified_zero_success() );
        out.success.push_back( success_mass( e.emit() ).get_d() );
        std::vector< double > nothing( ns, 0.0 );
        std::vector< std::vector< int > > next( na, std::vector< int >( ns, -1 ) );
        if ( !out.zero.back() )
            for ( const auto& [ o, p ] : e.emit() )
            {
                if ( is_success( o ) )
                    continue;
                symbol s = observed_state( o );
                nothing[ s ] = p.get_d();
                for ( symbol a = 0; a < na; ++a )
                    next[ a ][ s ] = intern( e.step( a, o ) );
            }
        out.nothing.push_back( std::move( nothing ) );
        out.next.push_back( std::move( next ) );
    }
    return out;
}

struct ufs_candidate
{
    std::vector< symbol > output;           // [x]
    std::vector< std::vector< int > > next; // [x][s]
};

namespace detail
{

// Success of a deterministic machine on the explicit environment, in doubles.
inline double screen_value( const explicit_env& env, const ufs_candidate& m )
{
    const std::size_t ns = env.nothing.front().size();
    std::map< std::pair< int, int >, int > index;
    std::vector< std::pair< int, int > > states;
    auto intern = [ & ]( int x, int e ) {
        auto [ it, inserted ] = index.try_emplace( { x, e }, static_cast< int >( states.size() ) );
        if ( inserted )
            states.emplace_back( x, e );
        return it->second;
    };
    intern( 0, 0 );
    std::vector< std::vector< std::pair< int, double > > > edges;
    for ( std::size_t q = 0; q < states.size(); ++q )
    {
        auto [ x, e ] = states[ q ];
        std::vector< std::pair< int, double > > out;
        if ( !env.zero[ e ] )
        {
            symbol a = m.output[ x ];
            for ( symbol s = 0; s < ns; ++s )
                if ( env.nothing[ e ][ s ] > 0 )
                    out.emplace_back( intern( m.next[ x ][ s ], env.next[ e ][ a ][ s ] ), env.nothing[ e ][ s ] );
        }
        edges.push_back( std::move( out ) );
    }
    const std::size_t n = states.size();
    std::vector< std::vector< int > > preds( n );
    for ( std::size_t q = 0; q < n; ++q )
        for ( auto [ to, w ] : edges[ q ] )
            preds[ to ].push_back( static_cast< int >( q ) );
    std::vector< bool > live( n, false );
    std::vector< int > work;
    for ( std::size_t q = 0; q < n; ++q )
        if ( !env.zero[ states[ q ].second ] && env.success[ states[ q ].second ] > 0 )
        {
            live[ q ] = true;
            work.push_back( static_cast< int >( q ) );
        }
    while ( !work.empty() )
    {
        int q = work.back();
        work.pop_back();
        for ( int r : preds[ q ] )
            if ( !live[ r ] && !env.zero[ states[ r ].second ] )
            {
                live[ r ] = true;
                work.push_back( r );
            }
    }
    if ( !live[ 0 ] )
        return 0.0;
    std::vector< int > compact( n, -1 );
    int m2 = 0;
    for ( std::size_t q = 0; q < n; ++q )
        if ( live[ q ] )
            compact[ q ] = m2++;
    std::vector< std::vector< double > > a( m2, std::vector< double >( m2, 0.0 ) );
    std::vector< double > b( m2, 0.0 );
    for ( std::size_t q = 0; q < n; ++q )
    {
        if ( !live[ q ] )
            continue;
        int r = compact[ q ];
        a[ r ][ r ] += 1.0;
        b[ r ] = env.success[ states[ q ].second ];
        for ( auto [ to, w ] : edges[ q ] )
            if ( live[ to ] )
                a[ r ][ compact[ to ] ] -= w;
    }
    return solve_linear( std::move( a ), std::move( b ) )[ compact[ 0 ] ];
}

// Calls f for every deterministic machine with at most n states, all
// reachable from state 0, in canonical discovery order.
template < typename F >
void enumerate_ufs( std::size_t n, std::size_t ns, std::size_t na, F&& f )
{
    for ( std::size_t m = 1; m <= n; ++m )
    {
        ufs_candidate c;
        c.output.assign( m, 0 );
        c.next.assign( m, std::vector< int >( ns, 0 ) );
        std::function< void( std::size_t, int ) > fill_next = [ & ]( std::size_t cell, int max_seen ) {
            if ( cell == m * ns )
            {
                if ( max_seen + 1 != static_cast< int >( m ) )
                    return;
                std::function< void( std::size_t ) > fill_out = [ & ]( std::size_t x ) {
                    if ( x == m )
                    {
                        f( c );
                        return;
                    }
                    for ( symbol a = 0; a < na; ++a )
                    {
                        c.output[ x ] = a;
                        fill_out( x + 1 );
                    }
                };
                fill_out( 0 );
                return;
            }
            std::size_t x = cell / ns;
            if ( static_cast< int >( x ) > max_seen )
                return; // row of an unreachable state
            int limit = std::min( max_seen + 1, static_cast< int >( m ) - 1 );
            for ( int y = 0; y <= limit; ++y )
            {
                c.next[ x ][ cell % ns ] = y;
                fill_next( cell + 1, std::max( max_seen, y ) );
            }
        };
        fill_next( 0, 0 );
    }
}

inline std::size_t ufs_count_bound( std::size_t n, std::size_t ns, std::size_t na )
{
    double total = 0;
    for ( std::size_t m = 1; m <= n; ++m )
        total += std::pow( double( na ), double( m ) ) * std::pow( double( m ), double( m * ns ) );
    return total > 1e18 ? std::numeric_limits< std::size_t >::max() : static_cast< std::size_t >( total );
}

} // namespace detail

inline unifilar_ptr candidate_machine( const ufs_candidate& c, std::size_t ns, std::size_t na )
{
    return deterministic_machine( ns, na, c.output, c.next );
}

struct ufs_search_result
{
    rational best;
    std::vector< unifilar_ptr > maximizers; // exact maximizers, state 0 initial
    std::size_t enumerated = 0;
    std::size_t confirmed = 0;
    bool unique_behavior = false;
};

// Best deterministic machine with at most n states. Candidates are screened
// in double precision; every candidate within tolerance of the screened
// maximum is re-solved exactly.
inline ufs_search_result det_ufs_search( const transducer& env, std::size_t n, double tolerance = 1e-9 )
{
    require_environment( env );
    const std::size_t ns = env_states( env );
    const std::size_t na = env_actions( env );
    if ( n == 0 || n > 3 )
        throw class_unsupported( "deterministic UFS enumeration is limited to 1..3 states" );
    if ( detail::ufs_count_bound( n, ns, na ) > 20'000'000 )
        throw class_unsupported( "deterministic UFS enumeration too large for these alphabets" );

    explicit_env graph = explore_environment( env );
    std::vector< std::pair< double, ufs_candidate > > scored;
    double top = -1.0;
    ufs_search_result out;
    detail::enumerate_ufs( n, ns, na, [ & ]( const ufs_candidate& c ) {
        ++out.enumerated;
        double v = detail::screen_value( graph, c );
        if ( v > top + tolerance )
        {
            top = v;
            std::erase_if( scored, [ & ]( const auto& e ) { return e.first < top - tolerance; } );
        }
        if ( v >= top - tolerance )
            scored.emplace_back( v, c );
    } );

    bool first = true;
    for ( const auto& [ v, c ] : scored )
    {
        auto machine = candidate_machine( c, ns, na );
        rational exact = success_exact( unifilar_to_transducer( machine, 0 ), env );
        ++out.confirmed;
        if ( first || exact > out.best )
        {
            out.best = exact;
            out.maximizers.clear();
            first = false;
        }
        if ( exact == out.best )
            out.maximizers.push_back( machine );
    }

    // Distinct machines may realize the same transducer; n-state machines
    // that agree to depth 2n agree forever.
    out.unique_behavior = true;
    for ( std::size_t k = 1; k < out.maximizers.size(); ++k )
        if ( !behaviorally_equal( unifilar_to_transducer( out.maximizers[ 0 ], 0 ),
                                  unifilar_to_transducer( out.maximizers[ k ], 0 ), 2 * n ) )
            out.unique_behavior = false;
    return out;
}

inline optimality_verdict check_optimal( const transducer& policy, const transducer& env, std::size_t horizon,
                                         const constraint_class& cls = constraint_class::all() )
{
    require_pair( policy, env );
    optimality_verdict v;
    v.class_name = cls.name();
    success_interval si = success_bounds( policy, env, horizon );
    v.policy_exact = si.exact;
    v.policy_lo = si.exact ? *si.exact : si.lo;
    v.policy_hi = si.exact ? *si.exact : si.hi;

    switch ( cls.k )
    {
    case constraint_class::kind::all:
    case constraint_class::kind::deterministic: {
        // Some deterministic policy attains the unconstrained optimum, so both
        // classes share the same bounds.
        v.best_lo = optimal_value( env, horizon );
        v.best_hi = success_upper_bound( env, horizon );
        if ( v.policy_lo >= v.best_hi )
            v.verdict = optimality_verdict::kind::optimal;
        else if ( v.policy_hi < v.best_lo )
        {
            v.verdict = optimality_verdict::kind::suboptimal;
            v.margin = v.best_lo - v.policy_hi;
            v.witness_tree = extract_optimal_policy( env, horizon );
        }
        else
        {
            v.verdict = optimality_verdict::kind::inconclusive;
            v.note = "policy interval overlaps the optimum interval";
        }
        return v;
    }
    case constraint_class::kind::iid: {
        if ( !dynamic_cast< const iid_node* >( &policy.node() ) )
            throw class_unsupported( "policy is not i.i.d." );
        if ( !si.exact )
            throw not_finite_state( "i.i.d. policy success is not exactly solvable on this environment" );
        iid_sweep_result sweep = iid_sweep( env, cls.parameter );
        v.best_lo = sweep.value;
        v.best_hi = sweep.value;
        v.note = "grid resolution " + std::to_string( cls.parameter ) + ( sweep.unique ? ", grid argmax unique"
                                                                                       : ", grid argmax not unique" );
        if ( *si.exact >= sweep.value )
            v.verdict = optimality_verdict::kind::optimal;
        else
        {
            v.verdict = optimality_verdict::kind::suboptimal;
            v.margin = sweep.value - *si.exact;
            v.witness_iid = sweep.best;
        }
        return v;
    }
    case constraint_class::kind::det_ufs: {
        if ( !si.exact )
            throw not_finite_state( "policy success is not exactly solvable on this environment" );
        ufs_search_result search = det_ufs_search( env, cls.parameter );
        v.best_lo = search.best;
        v.best_hi = search.best;
        v.note = std::to_string( search.enumerated ) + " machines enumerated, "
                 + std::to_string( search.maximizers.size() ) + " exact maximizers";
        if ( *si.exact >= search.best )
            v.verdict = optimality_verdict::kind::optimal;
        else
        {
            v.verdict = optimality_verdict::kind::suboptimal;
            v.margin = search.best - *si.exact;
            v.witness_machine = search.maximizers.front();
        }
        return v;
    }
    }
    throw class_unsupported( cls.name() );
}

struct bellman_report
{
    bool pass = false;
    optimality_verdict verdict;
    transducer evolved_policy;
    transducer evolved_env;
};

inline bellman_report bellman_check( const transducer& policy, const transducer& env, const trajectory& sa,
                                     std::size_t horizon )
{
    require_pair( policy, env );
    auto evolved = evolve_pair( policy, env, sa );
    if ( !evolved )
        throw invalid_trajectory( "evolution by " + sa.str() + " is not valid for the pair" );
    bellman_report r;
    r.evolved_policy = evolved->policy;
    r.evolved_env = evolved->env;
    r.verdict = check_optimal( evolved->policy, evolved->env, horizon );
    r.pass = r.verdict.verdict == optimality_verdict::kind::optimal;
    return r;
}

inline bellman_report sensorimotor_bellman_check( const transducer& policy, const transducer& env,
                                                  const trajectory& sa, std::size_t horizon )
{
    require_pair( policy, env );
    transducer p = policy;
    transducer e = env;
    for ( std::size_t k = 0; k < sa.size(); ++k )
    {
        symbol s = sa.input( k );
        symbol a = sa.output( k );
        if ( s >= p.inputs() || !p.supports( a ) )
            throw invalid_trajectory( "policy cannot play " + std::to_string( a ) + " at step " + std::to_string( k ) );
        try
        {
            e = ambivalent_evolve( e, a, s );
        }
        catch ( const unsupported_observation& ex )
        {
            throw invalid_trajectory( std::string( "step " ) + std::to_string( k ) + ": " + ex.what() );
        }
        p = p.step( s, a );
    }
    bellman_report r;
    r.evolved_policy = p;
    r.evolved_env = e;
    r.verdict = check_optimal( p, e, horizon );
    r.pass = r.verdict.verdict == optimality_verdict::kind::optimal;
    return r;
}

struct specifiability_report
{
    bool specifiable = false;
    optimality_verdict verdict;
    std::size_t decision_nodes = 0;
    std::optional< rational > min_margin;
    std::string reason;
};

// Unique optimality at finite horizon: optimal, the optimal tree has a unique
// argmax at every node with a decision left, and the policy plays it.
inline specifiability_report check_specifiable( const transducer& policy, const transducer& env, std::size_t horizon )
{
    require_pair( policy, env );
    specifiability_report r;
    if ( !policy.emit().is_point() )
    {
        r.reason = "policy is not deterministic";
        return r;
    }
    r.verdict = check_optimal( policy, env, horizon );
    if ( r.verdict.verdict != optimality_verdict::kind::optimal )
    {
        r.reason = "policy is " + r.verdict.verdict_name();
        return r;
    }
    tree_ptr tree = extract_optimal_policy( env, horizon );

    std::function< bool( const policy_tree&, const transducer& ) > walk = [ & ]( const policy_tree& node,
                                                                                 const transducer& p ) {
        if ( node.horizon == 0 || node.children.empty() )
            return true;
        ++r.decision_nodes;
        if ( !node.unique_argmax )
        {
            r.reason = "tie between optimal actions";
            return false;
        }
        if ( !p.emit().is_point() || !p.supports( node.action ) )
        {
            r.reason = "policy deviates from the unique optimal action";
            return false;
        }
        if ( node.margin && ( !r.min_margin || *node.margin < *r.min_margin ) )
            r.min_margin = node.margin;
        for ( const auto& [ s, child ] : node.children )
            if ( !walk( *child, p.step( s, node.action ) ) )
                return false;
        return true;
    };
    if ( !walk( *tree, policy ) )
        return r;
    if ( r.decision_nodes == 0 )
    {
        r.reason = "no decision within the horizon";
        return r;
    }
    r.specifiable = true;
    return r;
}

struct precondition_report
{
    std::vector< std::string > uncertain_success; // valid, but the all-nothing variant is not
    std::vector< std::string > impossible_state;  // some state has probability 0
    std::size_t explored = 0;

    [[nodiscard]] bool clean() const { return uncertain_success.empty() && impossible_state.empty(); }
};

inline precondition_report specifiability_preconditions( const transducer& policy, const transducer& env,
                                                         std::size_t depth, std::size_t max_findings = 16 )
{
    require_pair( policy, env );
    precondition_report r;
    const std::size_t ns = env_states( env );

    auto describe = []( const std::vector< std::array< symbol, 3 > >& path ) {
        std::string out = "[";
        for ( std::size_t k = 0; k < path.size(); ++k )
        {
            if ( k )
                out += ",";
            out += "(" + std::to_string( path[ k ][ 0 ] ) + "," + ( path[ k ][ 1 ] ? "success" : "none" ) + ","
                   + std::to_string( path[ k ][ 2 ] ) + ")";
        }
        return out + "]";
    };

    std::vector< std::array< symbol, 3 > > path;
    std::function< void( const transducer&, const transducer&, const std::optional< transducer >&, std::size_t ) > dfs =
            [ & ]( const transducer& p, const transducer& e, const std::optional< transducer >& shadow,
                   std::size_t left ) {
                ++r.explored;
                for ( symbol s = 0; s < ns; ++s )
                    if ( !e.supports( observation( s, telos::none ) ) && !e.supports( observation( s, telos::success ) )
                         && r.impossible_state.size() < max_findings )
                        r.impossible_state.push_back( describe( path ) + " state " + std::to_string( s ) );
                if ( left == 0 )
                    return;
                for ( const auto& [ a, pa ] : p.emit() )
                    for ( const auto& [ o, pe ] : e.emit() )
                    {
                        symbol s = observed_state( o );
                        path.push_back( { s, static_cast< symbol >( is_success( o ) ), a } );
                        std::optional< transducer > sh;
                        if ( shadow && shadow->supports( observation( s, telos::none ) ) )
                            sh = shadow->step( a, observation( s, telos::none ) );
                        if ( shadow && !sh && r.uncertain_success.size() < max_findings )
                            r.uncertain_success.push_back( describe( path ) );
                        dfs( p.step( s, a ), e.step( a, o ), sh, left - 1 );
                        path.pop_back();
                    }
            };
    dfs( policy, env, env, depth );
    return r;
}

struct decomposition
{
    rational alpha;
    transducer first;
    transducer second;
    trajectory where;
};

// Splits the first non-point emission found (breadth first) into p +/- delta
// (e_o1 - e_o2) and lifts the split back along the trajectory by splicing.
inline std::optional< decomposition > pointwise_decompose( const transducer& policy, std::size_t search_depth,
                                                           std::optional< std::size_t > verify_depth = std::nullopt )
{
    std::deque< std::pair< trajectory, transducer > > queue;
    queue.emplace_back( trajectory{}, policy );
    while ( !queue.empty() )
    {
        auto [ path, node ] = queue.front();
        queue.pop_front();
        const finite_dist& d = node.emit();
        if ( !d.is_point() )
        {
            const auto& entries = d.entries();
            rational min_p = entries.front().second;
            for ( const auto& [ o, p ] : entries )
                min_p = std::min( min_p, p );
            rational delta = min_p / 2;
            // Moves mass between the two smallest support symbols.
            auto shifted = [ & ]( const rational& sign ) {
                std::vector< finite_dist::entry > e = entries;
                e[ 0 ].second += sign * delta;
                e[ 1 ].second -= sign * delta;
                return finite_dist( std::move( e ) );
            };
            transducer up = reemit( node, shifted( rational( 1 ) ) );
            transducer down = reemit( node, shifted( rational( -1 ) ) );
            decomposition out{ make_rational( 1, 2 ), splice( policy, path, up ), splice( policy, path, down ), path };
            std::size_t vd = verify_depth.value_or( search_depth + 2 );
            if ( !behaviorally_equal( mix( { out.alpha, out.alpha }, { out.first, out.second } ), policy, vd ) )
                throw validation_error( "decomposition does not reproduce the policy" );
            return out;
        }
        if ( path.size() >= search_depth )
            continue;
        symbol o = d.max_symbol();
        for ( symbol i = 0; i < node.inputs(); ++i )
        {
            trajectory next = path;
            next.push( i, o );
            queue.emplace_back( std::move( next ), node.step( i, o ) );
        }
    }
    return std::nullopt;
}

} // namespace teleo
