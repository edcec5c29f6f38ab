#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/parallel.hpp"
#include "boxlab/rng.hpp"
#include "boxlab/stats.hpp"
#include "boxlab/synth.hpp"

using namespace boxlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BoxEmbed make_box(std::vector<double> center, std::vector<double> delta) {
    return BoxEmbed(std::move(center), std::move(delta));
}

// Dyadic coordinates (multiples of 1/256) are exactly representable, so
// identities that hold in exact arithmetic must hold bit-for-bit on them.
BoxEmbed random_dyadic_box(Rng& rng, std::size_t dim) {
    std::vector<double> center(dim), delta(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        center[d] = static_cast<double>(static_cast<long>(rng.index(1025)) - 512) / 256.0;
        delta[d] = static_cast<double>(rng.index(256) + 1) / 256.0;
    }
    return BoxEmbed(center, delta);
}

BoxEmbed random_box(Rng& rng, std::size_t dim, double center_span = 2.0, double delta_lo = 0.1,
                    double delta_hi = 1.5) {
    std::vector<double> center(dim), delta(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        center[d] = rng.uniform(-center_span, center_span);
        delta[d] = rng.uniform(delta_lo, delta_hi);
    }
    return BoxEmbed(center, delta);
}

}  // namespace

TEST_CASE("corners from center and delta", "[boxcore]") {
    auto [l1, u1] = corners(make_box({0, 0}, {1, 1}));
    CHECK(l1 == std::vector<double>{-1, -1});
    CHECK(u1 == std::vector<double>{1, 1});

    auto [l2, u2] = corners(make_box({2}, {0.5}));
    CHECK(l2 == std::vector<double>{1.5});
    CHECK(u2 == std::vector<double>{2.5});

    auto [l3, u3] = corners(make_box({1, -1, 0}, {0.5, 0.5, 0.5}));
    CHECK(l3 == std::vector<double>{0.5, -1.5, -0.5});
    CHECK(u3 == std::vector<double>{1.5, -0.5, 0.5});
}

TEST_CASE("box construction rejects bad widths", "[boxcore]") {
    CHECK_THROWS_AS(make_box({0}, {0}), input_error);
    CHECK_THROWS_AS(make_box({0}, {-1}), input_error);
    CHECK_THROWS_AS(make_box({0}, {1e-12}), input_error);
    CHECK_THROWS_AS(make_box({0, 0}, {1}), input_error);
    CHECK_THROWS_AS(make_box({std::nan("")}, {1}), input_error);
    CHECK_THROWS_AS(make_box({0}, {std::numeric_limits<double>::infinity()}), input_error);
    CHECK_NOTHROW(make_box({0}, {1e-9}));

    auto b = BoxEmbed::from_corners({-1, 0}, {1, 4});
    CHECK(b.center() == std::vector<double>{0, 2});
    CHECK(b.delta() == std::vector<double>{1, 2});
    CHECK_THROWS_AS(BoxEmbed::from_corners({1}, {1}), input_error);
}

TEST_CASE("hard volume closed forms", "[boxcore]") {
    CHECK(hard_volume(make_box({0, 0}, {1, 1})) == 4.0);
    CHECK(hard_volume(make_box({7, -3, 2}, {0.5, 0.5, 0.5})) == 1.0);
}

TEST_CASE("hard volume agrees with uniform sampling in D=4", "[boxcore]") {
    Rng rng(7, 0);
    auto box = random_box(rng, 4, 1.0, 0.3, 1.0);
    // Estimate Vol(box) as a hit rate against an enclosing box so the
    // sampler actually has something to resolve.
    std::vector<double> big_delta(4);
    for (int d = 0; d < 4; ++d) big_delta[d] = box.delta()[d] * 1.5;
    auto container = BoxEmbed(box.center(), big_delta);
    auto est = monte_carlo_volume({box, container}, McMode::intersection, 1'000'000, 7);
    CHECK_THAT(est.value, WithinRel(hard_volume(box), 0.01));
    CHECK_THAT(est.value, WithinAbs(hard_volume(box), 3.0 * est.std_error));
}

TEST_CASE("hard intersection volume", "[boxcore]") {
    auto a = make_box({0, 0}, {1, 1});
    auto b = make_box({0.5, 0}, {0.5, 1});
    CHECK(hard_intersection_volume(a, b) == 2.0);
    CHECK(hard_intersection_volume(make_box({0}, {1}), make_box({5}, {1})) == 0.0);
    CHECK(hard_intersection_volume(a, a) == hard_volume(a));
    CHECK_THROWS_AS(hard_intersection_volume(a, make_box({0}, {1})), dimension_mismatch);
}

TEST_CASE("intersection is symmetric and bounded", "[boxcore]") {
    Rng rng(11, 0);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t dim = 1 + rng.index(6);
        auto a = random_box(rng, dim);
        auto b = random_box(rng, dim);
        double ab = hard_intersection_volume(a, b);
        CHECK(ab == hard_intersection_volume(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= std::min(hard_volume(a), hard_volume(b)));
    }
}

TEST_CASE("entailment probability", "[boxcore]") {
    auto a = make_box({0.5, 0}, {0.5, 1});
    auto b = make_box({0, 0}, {1, 1});
    CHECK(entailment_prob(a, b) == 1.0);
    CHECK(entailment_prob(make_box({0}, {1}), make_box({5}, {1})) == 0.0);
    CHECK(entailment_prob(b, b) == 1.0);
}

TEST_CASE("containment gives entailment exactly one", "[boxcore]") {
    Rng rng(13, 0);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t dim = 1 + rng.index(8);
        auto outer = random_box(rng, dim);
        std::vector<double> center(dim), delta(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            delta[d] = outer.delta()[d] * rng.uniform(0.2, 0.8);
            double slack = outer.delta()[d] - delta[d];
            center[d] = outer.center()[d] + slack * rng.uniform(-0.9, 0.9);
        }
        BoxEmbed inner(center, delta);
        REQUIRE(contains(outer, inner));
        CHECK(entailment_prob(inner, outer) == 1.0);
        CHECK_THAT(entailment_prob(outer, inner),
                   WithinRel(hard_volume(inner) / hard_volume(outer), 1e-12));
    }
}

TEST_CASE("translation leaves hard quantities unchanged", "[boxcore]") {
    Rng rng(17, 0);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t dim = 1 + rng.index(5);
        auto a = random_dyadic_box(rng, dim);
        auto b = random_dyadic_box(rng, dim);
        std::vector<double> shift(dim);
        for (std::size_t d = 0; d < dim; ++d)
            shift[d] = static_cast<double>(static_cast<long>(rng.index(513)) - 256) / 256.0;
        auto at = a.translated(shift);
        auto bt = b.translated(shift);
        CHECK(hard_volume(at) == hard_volume(a));
        CHECK(hard_intersection_volume(at, bt) == hard_intersection_volume(a, b));
        CHECK(entailment_prob(at, bt) == entailment_prob(a, b));
    }
}

TEST_CASE("gumbel interval overlap approaches the hard overlap", "[boxcore]") {
    const std::vector<double> one_lo = {0.0}, one_hi = {2.0};
    CHECK_THAT(gumbel_interval_overlap(one_lo, one_hi, 0.001), WithinAbs(2.0, 0.01));
    const std::vector<double> two_lo = {0.0, 5.0}, two_hi = {1.0, 6.0};
    CHECK_THAT(gumbel_interval_overlap(two_lo, two_hi, 0.001), WithinAbs(0.0, 0.01));

    // For two intervals the LSE sandwich gives |smooth - hard| <= beta*(ln 2 + ln 2).
    Rng rng(19, 0);
    for (double beta : {0.2, 0.001}) {
        double bound = beta * (std::log(2.0) + std::log(2.0)) + 1e-12;
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> lowers(2), uppers(2);
            for (int i = 0; i < 2; ++i) {
                lowers[i] = rng.uniform(-2.0, 2.0);
                uppers[i] = lowers[i] + rng.uniform(0.0, 3.0);
            }
            double hard = std::max(std::min(uppers[0], uppers[1]) - std::max(lowers[0], lowers[1]), 0.0);
            double smooth = gumbel_interval_overlap(lowers, uppers, beta);
            CHECK(std::abs(smooth - hard) <= bound);
            CHECK(smooth >= 0.0);
            // Positivity is guaranteed in the log domain, where deep
            // disjointness cannot underflow.
            CHECK(std::isfinite(log_gumbel_interval_overlap(lowers, uppers, beta)));
        }
    }
}

TEST_CASE("gumbel volume", "[boxcore]") {
    auto cube = make_box({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
    CHECK_THAT(gumbel_volume(cube, GumbelParams(0.001, 0.001)), WithinRel(1.0, 0.01));
    CHECK(gumbel_volume(cube, GumbelParams(1.0, 0.001)) > hard_volume(cube));
    CHECK_THAT(gumbel_volume(make_box({0}, {10}), GumbelParams(1.0, 0.001)), WithinRel(20.0, 0.1));
}

TEST_CASE("gumbel intersection volume", "[boxcore]") {
    GumbelParams tight(0.001, 0.001);
    auto cube = make_box({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
    CHECK_THAT(gumbel_intersection_volume(cube, cube, tight), WithinRel(1.0, 0.01));
    CHECK(gumbel_intersection_volume(make_box({0}, {1}), make_box({9}, {1}), tight) < 1e-3);

    auto a = make_box({0.5, 0}, {0.5, 1});
    auto b = make_box({0, 0}, {1, 1});
    double ratio = gumbel_intersection_volume(a, b, tight) / gumbel_volume(a, tight);
    CHECK_THAT(ratio, WithinRel(1.0, 0.01));
}

TEST_CASE("gumbel entailment probability", "[boxcore]") {
    GumbelParams tight(0.001, 0.001);
    GumbelParams defaults;
    auto a = make_box({0.5, 0}, {0.5, 1});
    auto b = make_box({0, 0}, {1, 1});
    CHECK_THAT(gumbel_entailment_prob(a, a, tight), WithinRel(1.0, 0.01));
    CHECK(gumbel_entailment_prob(make_box({0}, {1}), make_box({40}, {1}), defaults) < 1e-2);
    CHECK(gumbel_entailment_prob(a, b, tight) >= entailment_prob(a, b) - 0.02);
    CHECK(gumbel_entailment_prob(b, a, defaults) > 0.0);
}

TEST_CASE("gumbel intersection converges to hard as beta shrinks", "[boxcore]") {
    const std::vector<double> betas = {1.0, 0.1, 0.01, 0.001};
    Rng rng(23, 0);
    std::vector<double> max_abs_err(betas.size(), 0.0);
    double worst_rel_at_tightest = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t dim = 1 + rng.index(8);
        auto a = random_box(rng, dim);
        auto b = random_box(rng, dim);
        double hard = hard_intersection_volume(a, b);
        for (std::size_t k = 0; k < betas.size(); ++k) {
            GumbelParams params(1.0, betas[k]);
            double smooth = gumbel_intersection_volume(a, b, params);
            max_abs_err[k] = std::max(max_abs_err[k], std::abs(smooth - hard));
            if (k + 1 == betas.size() && hard > 0.01)
                worst_rel_at_tightest =
                    std::max(worst_rel_at_tightest, std::abs(smooth - hard) / hard);
        }
    }
    for (std::size_t k = 1; k < betas.size(); ++k) CHECK(max_abs_err[k] <= max_abs_err[k - 1]);
    CHECK(worst_rel_at_tightest <= 0.02);
}

TEST_CASE("hard quantities match uniform sampling", "[boxcore]") {
    Rng rng(29, 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t dim = 1 + rng.index(4);
        auto a = random_box(rng, dim, 1.0, 0.3, 1.2);
        auto b = random_box(rng, dim, 1.0, 0.3, 1.2);
        double hard_union = hard_volume(a) + hard_volume(b) - hard_intersection_volume(a, b);
        auto est_union = monte_carlo_volume({a, b}, McMode::volume, 100'000, 100 + trial);
        CHECK_THAT(est_union.value, WithinAbs(hard_union, 3.0 * est_union.std_error + 1e-9));
        auto est_int = monte_carlo_volume({a, b}, McMode::intersection, 100'000, 200 + trial);
        CHECK_THAT(est_int.value,
                   WithinAbs(hard_intersection_volume(a, b), 3.0 * est_int.std_error + 1e-9));
    }
}

TEST_CASE("join", "[boxcore]") {
    auto a = BoxEmbed::from_corners({0, 0}, {1, 1});
    auto b = BoxEmbed::from_corners({2, 0}, {3, 1});
    auto j = join(a, b);
    auto [jl, ju] = corners(j);
    CHECK(jl == std::vector<double>{0, 0});
    CHECK(ju == std::vector<double>{3, 1});

    auto inner = make_box({0.5, 0}, {0.5, 1});
    auto outer = make_box({0, 0}, {1, 1});
    auto [cl, cu] = corners(join(inner, outer));
    CHECK(cl == std::vector<double>{-1, -1});
    CHECK(cu == std::vector<double>{1, 1});

    auto [sl, su] = corners(join(a, a));
    CHECK(sl == std::vector<double>{0, 0});
    CHECK(su == std::vector<double>{1, 1});
}

TEST_CASE("join laws on exact coordinates", "[boxcore]") {
    Rng rng(31, 0);
    auto same = [](const BoxEmbed& x, const BoxEmbed& y) {
        auto [xl, xu] = corners(x);
        auto [yl, yu] = corners(y);
        return xl == yl && xu == yu;
    };
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t dim = 1 + rng.index(4);
        auto a = random_dyadic_box(rng, dim);
        auto b = random_dyadic_box(rng, dim);
        auto c = random_dyadic_box(rng, dim);
        CHECK(same(join(a, b), join(b, a)));
        CHECK(same(join(join(a, b), c), join(a, join(b, c))));
        CHECK(same(join(a, a), a));
        CHECK(contains(join(a, b), a));
        CHECK(contains(join(a, b), b));
    }
}

TEST_CASE("csdelta entailment score", "[boxcore]") {
    CHECK(csdelta_entailment(VectorEmbed{{2, 0}}, VectorEmbed{{2, 0}}) == 0.0);
    CHECK_THAT(csdelta_entailment(VectorEmbed{{2, 0}}, VectorEmbed{{1, 0}}), WithinAbs(1.0, 1e-12));
    CHECK_THAT(csdelta_entailment(VectorEmbed{{1, 1}}, VectorEmbed{{3, 0}}),
               WithinAbs(-0.70710678, 1e-6));
    CHECK_THROWS_AS(csdelta_entailment(VectorEmbed{{0, 0}}, VectorEmbed{{1, 0}}), input_error);
}

TEST_CASE("gumbel params validation", "[boxcore]") {
    CHECK_THROWS_AS(GumbelParams(0.0, 0.001), input_error);
    CHECK_THROWS_AS(GumbelParams(1.0, -0.5), input_error);
    GumbelParams defaults;
    CHECK(defaults.beta_vol == 1.0);
    CHECK(defaults.beta_int == 0.001);
}

TEST_CASE("rng streams are deterministic and independent", "[boxcore]") {
    Rng a(42, 1), b(42, 1), c(42, 2);
    bool diverged = false;
    for (int i = 0; i < 100; ++i) {
        double x = a.uniform01();
        CHECK(x == b.uniform01());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        if (x != c.uniform01()) diverged = true;
    }
    CHECK(diverged);

    Rng d(1, 0);
    std::vector<int> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    d.shuffle(perm);
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    Rng e(5, 0);
    for (int i = 0; i < 1000; ++i) {
        auto idx = e.index(7);
        CHECK(idx < 7);
    }
}

TEST_CASE("rank correlation", "[boxcore]") {
    std::vector<double> x = {1, 2, 2, 3};
    CHECK(fractional_ranks(x) == std::vector<double>{1.0, 2.5, 2.5, 4.0});

    auto rho = spearman({1, 2, 3, 4}, {1, 4, 9, 16});
    REQUIRE(rho.has_value());
    CHECK_THAT(*rho, WithinAbs(1.0, 1e-12));

    auto neg = pearson({1, 2, 3}, {3, 2, 1});
    REQUIRE(neg.has_value());
    CHECK_THAT(*neg, WithinAbs(-1.0, 1e-12));

    CHECK_FALSE(spearman({1, 1, 1}, {1, 2, 3}).has_value());
}

TEST_CASE("parallel for covers every index once", "[boxcore]") {
    setenv("BOXLAB_THREADS", "3", 1);
    CHECK(thread_count() == 3);
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    unsetenv("BOXLAB_THREADS");
    CHECK(thread_count() >= 1);
}
