#include <teleo/machines.hpp>
#include <teleo/unroll.hpp>

#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace teleo;
namespace tt = teleo::testing;

namespace
{

rational q( long n, unsigned long d = 1 ) { return make_rational( n, d ); }

// Hidden state (x, pending output) with a point emission; the unifilar
// transition and the next emission draw become the Moore kernel.
moore_ptr unifilar_as_moore( const unifilar_machine& m, std::size_t x0 )
{
    std::map< std::pair< std::size_t, symbol >, std::size_t > ids;
    std::vector< std::pair< std::size_t, symbol > > hidden;
    auto id = [ & ]( std::size_t x, symbol o ) {
        auto [ it, inserted ] = ids.try_emplace( { x, o }, hidden.size() );
        if ( inserted )
            hidden.emplace_back( x, o );
        return it->second;
    };
    std::vector< finite_dist::entry > init;
    for ( const auto& [ o, p ] : m.output( x0 ) )
        init.emplace_back( id( x0, o ), p );
    std::vector< finite_dist > out;
    std::vector< finite_dist > kernel;
    for ( std::size_t k = 0; k < hidden.size(); ++k )
    {
        auto [ x, o ] = hidden[ k ];
        out.push_back( dist_point( o ) );
        for ( symbol i = 0; i < m.inputs(); ++i )
        {
            auto x2 = static_cast< std::size_t >( m.transition( x, i, o ) );
            std::vector< finite_dist::entry > e;
            for ( const auto& [ o2, p ] : m.output( x2 ) )
                e.emplace_back( id( x2, o2 ), p );
            kernel.push_back( finite_dist( std::move( e ) ) );
        }
    }
    return std::make_shared< moore_machine >( m.inputs(), m.outputs(), finite_dist( std::move( init ) ), out, kernel );
}

std::vector< symbol > digits( std::size_t value, std::size_t base, std::size_t len )
{
    std::vector< symbol > d( len );
    for ( std::size_t k = len; k-- > 0; value /= base )
        d[ k ] = static_cast< symbol >( value % base );
    return d;
}

} // namespace

TEST( Unifilar, OneStateMachineIsIid )
{
    finite_dist d{ { 0, q( 1, 3 ) }, { 2, q( 2, 3 ) } };
    std::vector< std::vector< std::vector< int > > > trans{ { { 0, 0, 0 }, { 0, 0, 0 } } };
    auto m = std::make_shared< unifilar_machine >( 2, 3, std::vector< finite_dist >{ d }, trans );
    EXPECT_TRUE( behaviorally_equal( unifilar_to_transducer( m, 0 ), make_iid( 2, 3, d ), 5 ) );
}

TEST( Unifilar, FlipFlopAlternates )
{
    auto m = deterministic_machine( 2, 2, { 0, 1 }, { { 1, 1 }, { 0, 0 } } );
    auto t = unifilar_to_transducer( m, 0 );
    auto table = unroll( t, 3 );
    for ( std::size_t w = 0; w < table.input_words( 3 ); ++w )
        EXPECT_EQ( table.at( 3, w, 0b0101 ), 1 );
    EXPECT_EQ( t.step( 1, 0 ).emit(), dist_point( 1 ) );
    EXPECT_EQ( t.step( 0, 0 ).step( 0, 1 ).key(), t.key() );
}

TEST( Unifilar, ValidatesConstruction )
{
    using rows = std::vector< std::vector< std::vector< int > > >;
    auto d = dist_point( 0 );
    EXPECT_THROW( unifilar_machine( 1, 1, {}, rows{} ), validation_error );
    EXPECT_THROW( unifilar_machine( 1, 1, { d }, rows{ { { 3 } } } ), validation_error );
    EXPECT_THROW( unifilar_machine( 1, 1, { dist_point( 2 ) }, rows{ { { 0 } } } ), validation_error );
    EXPECT_THROW( unifilar_machine( 0, 1, { d }, rows{ { {} } } ), empty_alphabet );
    // Unsupported outputs may be left undefined.
    EXPECT_NO_THROW( unifilar_machine( 1, 2, { d }, rows{ { { 0, unifilar_machine::undefined } } } ) );
    auto m = deterministic_machine( 1, 1, { 0 }, { { 0 } } );
    EXPECT_THROW( unifilar_to_transducer( m, 4 ), unknown_state );
}

TEST( Unifilar, PaddingKeepsBehavior )
{
    tt::rng g( 2 );
    for ( int k = 0; k < 10; ++k )
    {
        auto m = tt::random_unifilar( g, 3, 2, 3 );
        auto padded = pad_machine( *m );
        EXPECT_EQ( padded->states(), m->states() + 1 );
        for ( std::size_t x = 0; x < m->states(); ++x )
            EXPECT_TRUE( behaviorally_equal( unifilar_to_transducer( padded, x ), unifilar_to_transducer( m, x ), 4 ) );
        EXPECT_TRUE( behaviorally_equal( unifilar_to_transducer( padded, 3 ), unifilar_to_transducer( m, 0 ), 4 ) );
    }
}

TEST( Moore, BeliefFilterOnHiddenCoin )
{
    // Hidden state picks a coin once: state 0 always emits 0, state 1 is fair.
    // Both states persist regardless of input.
    moore_machine m( 1, 2, dist_uniform( 2 ), { dist_point( 0 ), dist_uniform( 2 ) }, { dist_point( 0 ), dist_point( 1 ) } );
    auto t = moore_to_transducer( std::make_shared< moore_machine >( m ) );
    EXPECT_EQ( t.emit().prob( 0 ), q( 3, 4 ) );
    auto after0 = t.step( 0, 0 );
    EXPECT_EQ( after0.emit().prob( 0 ), q( 5, 6 ) );
    auto after1 = t.step( 0, 1 );
    EXPECT_EQ( after1.emit(), dist_uniform( 2 ) );
    // Revisited belief maps to the same interned state.
    EXPECT_EQ( after1.step( 0, 1 ).key(), after1.key() );
}

TEST( Moore, ValidatesConstruction )
{
    EXPECT_THROW( moore_machine( 1, 2, dist_point( 0 ), {}, {} ), validation_error );
    EXPECT_THROW( moore_machine( 1, 2, dist_point( 1 ), { dist_point( 0 ) }, { dist_point( 0 ) } ), unknown_state );
    EXPECT_THROW( moore_machine( 1, 2, dist_point( 0 ), { dist_point( 0 ) }, { dist_point( 3 ) } ), unknown_state );
    EXPECT_THROW( moore_machine( 2, 2, dist_point( 0 ), { dist_point( 0 ) }, { dist_point( 0 ) } ), validation_error );
    EXPECT_THROW( moore_machine( 1, 2, dist_point( 0 ), { dist_point( 5 ) }, { dist_point( 0 ) } ), validation_error );
}

TEST( Moore, UnrollingMatchesHiddenPathSums )
{
    tt::rng g( 19 );
    for ( int k = 0; k < 15; ++k )
    {
        auto m = tt::random_moore( g, tt::uniform_int( g, 1, 3 ), 2, 2 );
        auto table = unroll( moore_to_transducer( m ), 3 );
        EXPECT_TRUE( is_causal( table ) );
        for ( std::size_t n = 0; n <= 3; ++n )
            for ( std::size_t w = 0; w < table.input_words( n ); ++w )
                for ( std::size_t u = 0; u < table.output_words( n + 1 ); ++u )
                    EXPECT_EQ( table.at( n, w, u ),
                               tt::hidden_path_probability( *m, digits( w, 2, n ), digits( u, 2, n + 1 ) ) );
    }
}

TEST( Moore, StartingMixtureIsMixtureOfStarts )
{
    tt::rng g( 23 );
    for ( int k = 0; k < 15; ++k )
    {
        std::size_t n = tt::uniform_int( g, 2, 3 );
        auto m = tt::random_moore( g, n, 2, 3 );
        auto prior = tt::random_dist( g, n );
        std::vector< rational > w;
        std::vector< transducer > parts;
        for ( const auto& [ y, p ] : prior )
        {
            w.push_back( p );
            parts.push_back( moore_to_transducer( *m, dist_point( y ) ) );
        }
        EXPECT_TRUE( behaviorally_equal( moore_to_transducer( *m, prior ), mix( w, parts ), 4 ) );
    }
}

TEST( Moore, UnifilarEmbeddingAgrees )
{
    tt::rng g( 43 );
    for ( int k = 0; k < 10; ++k )
    {
        auto u = tt::random_unifilar( g, 3, 2, 2 );
        auto as_moore = unifilar_as_moore( *u, 0 );
        EXPECT_TRUE( behaviorally_equal( moore_to_transducer( as_moore ), unifilar_to_transducer( u, 0 ), 4 ) );
    }
}

TEST( Moore, MixtureOfUnifilarMachinesIsMoore )
{
    tt::rng g( 47 );
    for ( int k = 0; k < 10; ++k )
    {
        auto a = tt::random_unifilar( g, 2, 2, 2 );
        auto b = tt::random_unifilar( g, 2, 2, 2 );
        auto ma = unifilar_as_moore( *a, 0 );
        auto mb = unifilar_as_moore( *b, 0 );
        // Disjoint union with the prior split by the mixture weight.
        rational alpha = tt::random_weight( g );
        std::size_t off = ma->states();
        std::vector< finite_dist > out;
        std::vector< finite_dist > kernel;
        auto shift = [ & ]( const finite_dist& d ) {
            std::vector< finite_dist::entry > e;
            for ( const auto& [ y, p ] : d )
                e.emplace_back( y + off, p );
            return finite_dist( std::move( e ) );
        };
        for ( std::size_t y = 0; y < ma->states(); ++y )
        {
            out.push_back( ma->output( y ) );
            for ( symbol i = 0; i < 2; ++i )
                kernel.push_back( ma->transition( y, i ) );
        }
        for ( std::size_t y = 0; y < mb->states(); ++y )
        {
            out.push_back( mb->output( y ) );
            for ( symbol i = 0; i < 2; ++i )
                kernel.push_back( shift( mb->transition( y, i ) ) );
        }
        std::vector< finite_dist::entry > init;
        for ( const auto& [ y, p ] : ma->init() )
            init.emplace_back( y, alpha * p );
        for ( const auto& [ y, p ] : mb->init() )
            init.emplace_back( y + off, ( 1 - alpha ) * p );
        auto joint = std::make_shared< moore_machine >( 2, 2, finite_dist( std::move( init ) ), out, kernel );
        auto mixed = mix( { alpha, 1 - alpha }, { unifilar_to_transducer( a, 0 ), unifilar_to_transducer( b, 0 ) } );
        EXPECT_TRUE( behaviorally_equal( moore_to_transducer( joint ), mixed, 4 ) );
    }
}
