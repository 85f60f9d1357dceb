#pragma once

#include "dist.hpp"
#include "error.hpp"
#include "trajectory.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace teleo
{

class behavior;
class transducer;
using behavior_ptr = std::shared_ptr< const behavior >;

struct mixture_component;

// A node of a (possibly infinite) transducer tree. Subclasses provide the
// output distribution and construct children on demand. Children are cached
// per (input, output) when cache_children() is true, so repeated traversals
// reuse posterior computations.
class behavior : public std::enable_shared_from_this< behavior >
{
    std::size_t _inputs;
    std::size_t _outputs;

    mutable std::mutex _cache_mutex;
    mutable std::map< std::pair< symbol, symbol >, behavior_ptr > _children;

protected:
    virtual behavior_ptr compute_next( symbol i, symbol o ) const = 0;

    // Nodes that are cheap to rebuild (finite machines) skip the cache, which
    // would otherwise keep an unbounded unrolled tree alive.
    [[nodiscard]] virtual bool cache_children() const { return true; }

public:
    behavior( std::size_t inputs, std::size_t outputs ) : _inputs{ inputs }, _outputs{ outputs }
    {
        if ( inputs == 0 || outputs == 0 )
            throw empty_alphabet( "transducer alphabets must be nonempty" );
    }
    virtual ~behavior() = default;

    behavior( const behavior& ) = delete;
    behavior& operator=( const behavior& ) = delete;

    [[nodiscard]] std::size_t inputs() const { return _inputs; }
    [[nodiscard]] std::size_t outputs() const { return _outputs; }

    [[nodiscard]] virtual const finite_dist& emit() const = 0;

    // Canonical identity: equal keys imply equal behavior. Absent for nodes
    // without a finite description.
    [[nodiscard]] virtual std::optional< std::string > key() const { return std::nullopt; }

    // Read as a teleo-environment (outputs coded as 2*s+g), a true value means
    // no reachable node ever emits success.
    [[nodiscard]] virtual bool certified_zero_success() const { return false; }

    [[nodiscard]] virtual const std::vector< mixture_component >* mixture_components() const { return nullptr; }

    // Caller guarantees i < inputs() and o in the support of emit().
    [[nodiscard]] behavior_ptr next( symbol i, symbol o ) const
    {
        if ( !cache_children() )
            return compute_next( i, o );
        {
            std::lock_guard lock( _cache_mutex );
            if ( auto it = _children.find( { i, o } ); it != _children.end() )
                return it->second;
        }
        // Computed outside the lock; children may recurse into other nodes.
        behavior_ptr child = compute_next( i, o );
        std::lock_guard lock( _cache_mutex );
        return _children.try_emplace( { i, o }, std::move( child ) ).first->second;
    }
};

// Value handle over a shared immutable behavior node.
class transducer
{
    behavior_ptr _node;

public:
    transducer() = default;
    transducer( behavior_ptr node ) : _node{ std::move( node ) } {}

    [[nodiscard]] bool valid() const { return static_cast< bool >( _node ); }
    [[nodiscard]] const behavior& node() const { return *_node; }
    [[nodiscard]] const behavior_ptr& ptr() const { return _node; }

    [[nodiscard]] std::size_t inputs() const { return _node->inputs(); }
    [[nodiscard]] std::size_t outputs() const { return _node->outputs(); }
    [[nodiscard]] const finite_dist& emit() const { return _node->emit(); }
    [[nodiscard]] std::optional< std::string > key() const { return _node->key(); }
    [[nodiscard]] bool certified_zero_success() const { return _node->certified_zero_success(); }

    [[nodiscard]] bool supports( symbol o ) const { return _node->emit().contains( o ); }

    [[nodiscard]] transducer step( symbol i, symbol o ) const
    {
        if ( i >= inputs() )
            throw invalid_trajectory( "input symbol " + std::to_string( i ) + " outside alphabet of size "
                                      + std::to_string( inputs() ) );
        if ( !supports( o ) )
            throw unsupported_output( "output " + std::to_string( o ) + " has probability 0" );
        return transducer( _node->next( i, o ) );
    }
};

struct mixture_component
{
    rational weight;
    transducer component;
};

namespace detail
{

inline std::atomic< std::uint64_t > next_uid{ 1 };

inline std::uint64_t fresh_uid() { return next_uid.fetch_add( 1, std::memory_order_relaxed ); }

inline void require_same_alphabets( const transducer& a, const transducer& b, const char* what )
{
    if ( a.inputs() != b.inputs() || a.outputs() != b.outputs() )
        throw alphabet_mismatch( std::string( what ) + ": alphabet sizes differ" );
}

} // namespace detail

// i.i.d. transducer: the same emission at every step regardless of history.
class iid_node final : public behavior
{
    finite_dist _dist;
    std::string _key;

protected:
    behavior_ptr compute_next( symbol, symbol ) const override { return shared_from_this(); }
    [[nodiscard]] bool cache_children() const override { return false; }

public:
    iid_node( std::size_t inputs, std::size_t outputs, finite_dist dist )
        : behavior( inputs, outputs ), _dist{ std::move( dist ) }
    {
        if ( _dist.max_symbol() >= outputs )
            throw alphabet_mismatch( "emission uses symbol outside the output alphabet" );
        _key = "iid" + std::to_string( inputs ) + "/" + std::to_string( outputs ) + _dist.str();
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override { return _key; }
};

inline transducer make_iid( std::size_t inputs, std::size_t outputs, finite_dist dist )
{
    return transducer( std::make_shared< iid_node >( inputs, outputs, std::move( dist ) ) );
}

inline transducer make_constant( std::size_t inputs, std::size_t outputs, symbol o )
{
    return make_iid( inputs, outputs, dist_point( o ) );
}

// Generic lazy node from callbacks; used for one-off constructions in tests
// and for nodes whose behavior is easiest to state as a closure.
class lazy_node final : public behavior
{
    finite_dist _dist;
    std::function< transducer( symbol, symbol ) > _next;
    std::optional< std::string > _key;

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override { return _next( i, o ).ptr(); }

public:
    lazy_node( std::size_t inputs, std::size_t outputs, finite_dist dist,
               std::function< transducer( symbol, symbol ) > next, std::optional< std::string > key )
        : behavior( inputs, outputs ), _dist{ std::move( dist ) }, _next{ std::move( next ) }, _key{ std::move( key ) }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override { return _key; }
};

inline transducer make_lazy( std::size_t inputs, std::size_t outputs, finite_dist dist,
                             std::function< transducer( symbol, symbol ) > next,
                             std::optional< std::string > key = std::nullopt )
{
    return transducer(
            std::make_shared< lazy_node >( inputs, outputs, std::move( dist ), std::move( next ), std::move( key ) ) );
}

// Same transitions as the base node, different emission. The emission must
// have the same support, otherwise transitions would be undefined.
class reemit_node final : public behavior
{
    transducer _base;
    finite_dist _dist;

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override { return _base.step( i, o ).ptr(); }
    [[nodiscard]] bool cache_children() const override { return false; }

public:
    reemit_node( transducer base, finite_dist dist )
        : behavior( base.inputs(), base.outputs() ), _base{ std::move( base ) }, _dist{ std::move( dist ) }
    {
        if ( _dist.support() != _base.emit().support() )
            throw invalid_distribution( "replacement emission must keep the support" );
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
};

inline transducer reemit( transducer base, finite_dist dist )
{
    return transducer( std::make_shared< reemit_node >( std::move( base ), std::move( dist ) ) );
}

transducer mix( std::vector< mixture_component > parts );

// Finite weighted mixture with Bayesian posterior transitions.
class mixture_node final : public behavior
{
    std::vector< mixture_component > _parts;
    finite_dist _dist;
    std::optional< std::string > _key;

    static finite_dist combine( const std::vector< mixture_component >& parts )
    {
        std::vector< finite_dist::entry > entries;
        for ( const auto& part : parts )
            for ( const auto& [ o, p ] : part.component.emit() )
                entries.emplace_back( o, part.weight * p );
        return finite_dist::trusted( std::move( entries ) );
    }

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override
    {
        rational total = _dist.prob( o );
        std::vector< mixture_component > posterior;
        for ( const auto& part : _parts )
        {
            rational p = part.component.emit().prob( o );
            if ( sgn( p ) == 0 )
                continue;
            posterior.push_back( { part.weight * p / total, part.component.step( i, o ) } );
        }
        return mix( std::move( posterior ) ).ptr();
    }

public:
    // Expects parts already normalized, flattened and merged (see mix()).
    explicit mixture_node( std::vector< mixture_component > parts )
        : behavior( parts.front().component.inputs(), parts.front().component.outputs() ),
          _parts{ std::move( parts ) }, _dist{ combine( _parts ) }
    {
        std::string k = "mix{";
        for ( const auto& part : _parts )
        {
            auto ck = part.component.key();
            if ( !ck )
                return;
            k += format_rational( part.weight ) + ":" + *ck + ";";
        }
        _key = k + "}";
    }

    [[nodiscard]] const finite_dist& emit() const override { return _dist; }
    [[nodiscard]] std::optional< std::string > key() const override { return _key; }

    [[nodiscard]] bool certified_zero_success() const override
    {
        for ( const auto& part : _parts )
            if ( !part.component.certified_zero_success() )
                return false;
        return true;
    }

    [[nodiscard]] const std::vector< mixture_component >* mixture_components() const override { return &_parts; }
};

// Canonicalizes the mixture: nested mixtures are flattened, zero weights
// dropped and keyed duplicates merged. A single surviving component is
// returned as is.
inline transducer mix( std::vector< mixture_component > parts )
{
    if ( parts.empty() )
        throw weight_sum_mismatch( "mixture of no components" );
    {
        std::vector< rational > ws;
        for ( const auto& part : parts )
            ws.push_back( part.weight );
        check_weights( ws );
    }
    for ( const auto& part : parts )
        detail::require_same_alphabets( parts.front().component, part.component, "mix" );

    std::vector< mixture_component > flat;
    for ( auto& part : parts )
    {
        if ( sgn( part.weight ) == 0 )
            continue;
        if ( const auto* inner = part.component.node().mixture_components() )
        {
            for ( const auto& sub : *inner )
                flat.push_back( { part.weight * sub.weight, sub.component } );
        }
        else
            flat.push_back( std::move( part ) );
    }

    std::vector< mixture_component > merged;
    std::map< std::string, std::size_t > by_key;
    std::vector< std::optional< std::string > > keys;
    for ( auto& part : flat )
    {
        auto k = part.component.key();
        if ( k )
        {
            if ( auto it = by_key.find( *k ); it != by_key.end() )
            {
                merged[ it->second ].weight += part.weight;
                continue;
            }
            by_key.emplace( *k, merged.size() );
        }
        keys.push_back( k );
        merged.push_back( std::move( part ) );
    }

    if ( merged.size() == 1 )
        return merged.front().component;

    // Keyed mixtures are ordered by key so that equal mixtures print equal keys.
    bool all_keyed = std::all_of( keys.begin(), keys.end(), []( const auto& k ) { return k.has_value(); } );
    if ( all_keyed )
    {
        std::vector< std::size_t > order( merged.size() );
        for ( std::size_t k = 0; k < order.size(); ++k )
            order[ k ] = k;
        std::sort( order.begin(), order.end(), [ & ]( std::size_t a, std::size_t b ) { return *keys[ a ] < *keys[ b ]; } );
        std::vector< mixture_component > sorted;
        for ( std::size_t k : order )
            sorted.push_back( std::move( merged[ k ] ) );
        merged = std::move( sorted );
    }
    return transducer( std::make_shared< mixture_node >( std::move( merged ) ) );
}

inline transducer mix( const std::vector< rational >& weights, const std::vector< transducer >& ts )
{
    if ( weights.size() != ts.size() )
        throw weight_sum_mismatch( "weight and transducer lists differ in length" );
    std::vector< mixture_component > parts;
    for ( std::size_t k = 0; k < ts.size(); ++k )
        parts.push_back( { weights[ k ], ts[ k ] } );
    return mix( std::move( parts ) );
}

// Evolution by a trajectory; nullopt stands for the failure marker.
inline std::optional< transducer > evolve( const transducer& t, const trajectory& traj )
{
    transducer cur = t;
    for ( std::size_t k = 0; k < traj.size(); ++k )
    {
        if ( traj.input( k ) >= cur.inputs() || !cur.supports( traj.output( k ) ) )
            return std::nullopt;
        cur = cur.step( traj.input( k ), traj.output( k ) );
    }
    return cur;
}

inline std::optional< transducer > evolve( const std::optional< transducer >& t, const trajectory& traj )
{
    if ( !t )
        return std::nullopt;
    return evolve( *t, traj );
}

class splice_node final : public behavior
{
    transducer _base;
    trajectory _path; // nonempty
    transducer _replacement;

protected:
    behavior_ptr compute_next( symbol i, symbol o ) const override;

public:
    splice_node( transducer base, trajectory path, transducer replacement )
        : behavior( base.inputs(), base.outputs() ), _base{ std::move( base ) }, _path{ std::move( path ) },
          _replacement{ std::move( replacement ) }
    {
    }

    [[nodiscard]] const finite_dist& emit() const override { return _base.emit(); }
};

// Behaves like t except that after exactly traj it continues as t2.
inline transducer splice( const transducer& t, const trajectory& traj, const transducer& t2 )
{
    detail::require_same_alphabets( t, t2, "splice" );
    if ( !evolve( t, traj ) )
        throw invalid_trajectory( "splice path " + traj.str() + " is not a valid evolution" );
    if ( traj.empty() )
        return t2;
    return transducer( std::make_shared< splice_node >( t, traj, t2 ) );
}

inline behavior_ptr splice_node::compute_next( symbol i, symbol o ) const
{
    transducer child = _base.step( i, o );
    if ( _path.input( 0 ) == i && _path.output( 0 ) == o )
        return splice( child, _path.suffix( 1 ), _replacement ).ptr();
    return child.ptr();
}

} // namespace teleo
