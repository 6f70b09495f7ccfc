#include <catch_amalgamated.hpp>

#include <random>

#include "fraccur/sobolev.hpp"
#include "oracles.hpp"

using namespace fraccur;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Index idx(std::initializer_list<std::int64_t> v) {
    Index r{};
    int i = 0;
    for (auto x : v) r[i++] = x;
    return r;
}

GridFunction unit_indicator(int d, int level) {
    Index hi{};
    for (int i = 0; i < d; ++i) hi[i] = std::int64_t(1) << level;
    return GridFunction(d, level, Index{}, hi, std::vector<double>(std::size_t(1) << (level * d), 1.0));
}

GridFunction random_function(std::mt19937_64& rng, int d, int level, const Index& lo, const Index& hi, bool binary) {
    GridFunction u(d, level, lo, hi);
    std::uniform_real_distribution<double> v(-1, 1);
    std::bernoulli_distribution b(0.5);
    for (std::size_t o = 0; o < u.size(); ++o) u[o] = binary ? (b(rng) ? 1.0 : 0.0) : v(rng);
    return u;
}

} // namespace

TEST_CASE("gagliardo of zero and bad exponents", "[sobolev]") {
    GridFunction z(1, 3, idx({0}), idx({8}));
    CHECK(gagliardo(z, 0.5).value == 0.0);
    CHECK_THROWS_AS(gagliardo(z, 0.0), Error);
    CHECK_THROWS_AS(gagliardo(z, 1.0), Error);
    CHECK(frac_perimeter(z, 0.3) == 0.0);
    CHECK(bv_norm(z) == 0.0);
}

TEST_CASE("perimeter of the unit interval is 4 / (s (1 - s))", "[sobolev]") {
    for (double alpha : {0.2, 0.5, 0.7}) {
        const double s = 1 - alpha, expect = 4 / (s * (1 - s));
        for (int level : {0, 4, 10}) {
            auto u = unit_indicator(1, level);
            auto r = gagliardo(u, alpha);
            CHECK_THAT(r.value, WithinRel(expect, 1e-9));
            CHECK(std::abs(r.value - expect) <= r.error + 1e-12 * expect);
        }
    }
    // alpha = 1/2 at level 10 through the FFT path
    auto u = unit_indicator(1, 10);
    auto r = gagliardo(u, 0.5, {.direct_below = 16});
    CHECK(r.fft);
    CHECK_THAT(r.value, WithinRel(16.0, 1e-9));
}

TEST_CASE("one-dimensional sums match a naive double loop", "[sobolev][oracle]") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 6; ++rep) {
        const int level = rep % 4;
        const std::int64_t lo = rep - 3, n = 3 + rep;
        auto u = random_function(rng, 1, level, idx({lo}), idx({lo + n}), rep % 2 == 0);
        for (double alpha : {0.3, 0.6}) {
            const double ref = oracle::gagliardo_1d(u.values(), lo, level, alpha);
            CHECK_THAT(gagliardo(u, alpha).value, WithinRel(ref, 1e-8));
        }
    }
}

TEST_CASE("planar rectangles match the polar-form oracle", "[sobolev][oracle]") {
    struct Case {
        int w, h, level;
        double alpha;
    };
    for (auto c : {Case{1, 1, 0, 0.5}, Case{2, 1, 0, 0.3}, Case{3, 2, 1, 0.5}, Case{4, 4, 2, 0.8}, Case{5, 3, 0, 0.2}}) {
        GridFunction u(2, c.level, idx({0, 0}), idx({c.w, c.h}), std::vector<double>(std::size_t(c.w * c.h), 1.0));
        const double h = dyadic(c.level);
        const double ref = oracle::rect_perimeter(c.w * h, c.h * h, 3 - c.alpha);
        auto r = gagliardo(u, c.alpha);
        CHECK_THAT(r.value, WithinRel(ref, 1e-7));
        CHECK_THAT(frac_perimeter_pairs(u, c.alpha), WithinRel(ref, 1e-7));
    }
}

TEST_CASE("FFT layer cake agrees with the direct pair sum", "[sobolev][property]") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 4; ++rep) {
        auto u = random_function(rng, 2, 3, idx({-3, 1}), idx({7, 9}), true);
        u[5] = 2.5;
        u[17] = -0.75;
        auto a = gagliardo(u, 0.4, {.direct_below = 1u << 20});
        auto b = gagliardo(u, 0.4, {.direct_below = 0});
        CHECK_FALSE(a.fft);
        CHECK(b.fft);
        CHECK_THAT(b.value, WithinRel(a.value, 1e-11));
    }
    auto v = random_function(rng, 1, 7, idx({0}), idx({100}), false);
    // many distinct values: the layer cake is declined
    CHECK_FALSE(gagliardo(v, 0.5, {.direct_below = 0}).fft);
}

TEST_CASE("perimeter equals the A x A^c form", "[sobolev]") {
    std::mt19937_64 rng(13);
    for (int d = 1; d <= 2; ++d) {
        auto A = d == 1 ? random_function(rng, 1, 2, idx({0}), idx({12}), true)
                        : random_function(rng, 2, 2, idx({0, 0}), idx({6, 5}), true);
        CHECK_THAT(frac_perimeter_pairs(A, 0.5), WithinRel(frac_perimeter(A, 0.5), 1e-11));
    }
    GridFunction bad(1, 0, idx({0}), idx({2}), {1.0, 0.5});
    CHECK_THROWS_AS(frac_perimeter(bad, 0.5), Error);
}

TEST_CASE("dyadic rescaling multiplies by 2^(d-1+alpha)", "[sobolev][property]") {
    std::mt19937_64 rng(17);
    for (int d = 1; d <= 2; ++d)
        for (double alpha : {0.25, 0.5, 0.75}) {
            auto u = d == 1 ? random_function(rng, 1, 3, idx({0}), idx({9}), false)
                            : random_function(rng, 2, 3, idx({0, 0}), idx({5, 4}), false);
            const double g = gagliardo(u, alpha).value, g2 = gagliardo(rescale_dyadic(u, 1), alpha).value;
            CHECK_THAT(std::log2(g2 / g), WithinAbs(d - 1 + alpha, 1e-12));
        }
}

TEST_CASE("seminorms are 1-homogeneous", "[sobolev][property]") {
    std::mt19937_64 rng(19);
    auto u = random_function(rng, 2, 2, idx({0, 0}), idx({5, 6}), false);
    for (double c : {3.0, -0.5}) {
        const auto cu = c * u;
        CHECK_THAT(gagliardo(cu, 0.5).value, WithinRel(std::abs(c) * gagliardo(u, 0.5).value, 1e-14));
        CHECK_THAT(bv_norm(cu), WithinRel(std::abs(c) * bv_norm(u), 1e-14));
        CHECK_THAT(l1_norm(cu), WithinRel(std::abs(c) * l1_norm(u), 1e-14));
    }
}

TEST_CASE("BV seminorm counts facets", "[sobolev]") {
    for (int d = 1; d <= 3; ++d) CHECK(bv_norm(unit_indicator(d, 0)) == 2.0 * d);
    CHECK(bv_norm(unit_indicator(2, 4)) == 4.0);
    GridFunction L(2, 0, idx({0, 0}), idx({2, 2}), {1, 1, 1, 0});
    CHECK(bv_norm(L) == 8.0);
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 20; ++rep) {
        auto A = random_function(rng, 2, 3, idx({-2, 0}), idx({6, 5}), true);
        CHECK_THAT(bv_norm(A), WithinAbs(mass(boundary(to_chain(A))), 1e-12));
    }
}

TEST_CASE("interpolation ratio", "[sobolev]") {
    auto u = unit_indicator(1, 6);
    CHECK_THAT(interpolation_ratio(u, 0.5), WithinRel(16 / std::sqrt(2.0), 1e-9));
    std::mt19937_64 rng(29);
    auto v = random_function(rng, 2, 2, idx({0, 0}), idx({4, 4}), false);
    const double r = interpolation_ratio(v, 0.4);
    CHECK_THAT(interpolation_ratio(3.0 * v, 0.4), WithinRel(r, 1e-13));
    CHECK_THAT(interpolation_ratio(rescale_dyadic(v, 2), 0.4), WithinRel(r, 1e-12));
    GridFunction z(1, 0, idx({0}), idx({3}));
    CHECK_THROWS_AS(interpolation_ratio(z, 0.5), Error);
}

TEST_CASE("dyadic decomposition by cube averages", "[sobolev]") {
    // constant on 0-cubes: everything sits in u_0
    auto one = unit_indicator(2, 3);
    auto dec = dyadic_decompose(one, 3);
    CHECK(dec.parts[0][0] == 1.0);
    for (std::size_t k = 1; k < dec.parts.size(); ++k) CHECK(dec.parts[k].is_zero());

    // indicator of [0, 1/2]
    GridFunction half(1, 3, idx({0}), idx({4}), {1, 1, 1, 1});
    auto h = dyadic_decompose(half, 3);
    CHECK(h.parts[0][0] == 0.5);
    CHECK(h.parts[1][0] == 0.5);
    CHECK(h.parts[1][1] == -0.5);
    CHECK(h.parts[2].is_zero());
    CHECK(h.parts[3].is_zero());
    CHECK(h.residual.is_zero());

    CHECK_THROWS_AS(dyadic_decompose(half, 4), Error);
    GridFunction off(1, 2, idx({-1}), idx({2}), {1, 1, 1});
    CHECK_THROWS_AS(dyadic_decompose(off, 1), Error);
    // zero padding outside the unit cube is harmless
    GridFunction padded(1, 2, idx({-1}), idx({5}), {0, 1, 1, 1, 1, 0});
    const auto p = dyadic_decompose(padded, 2);
    CHECK(p.parts[0][0] == 1.0);
    CHECK(p.residual.is_zero());
}

TEST_CASE("decomposition telescopes and stays L1 bounded", "[sobolev][property]") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 1 + rep % 2, L = 5;
        const std::int64_t n = std::int64_t(1) << L;
        auto u = random_function(rng, d, L, idx({0, 0}), idx({n, d == 2 ? n : 0}), rep % 3 == 0);
        const int depth = 1 + rep % L;
        auto dec = dyadic_decompose(u, depth);
        GridFunction sum = refine(dec.parts[0], depth);
        for (int k = 1; k <= depth; ++k) {
            const auto pk = refine(dec.parts[std::size_t(k)], depth - k);
            for (std::size_t o = 0; o < sum.size(); ++o) sum[o] += pk[o];
        }
        const auto& vd = dec.averages.back();
        for (std::size_t o = 0; o < sum.size(); ++o) CHECK_THAT(sum[o], WithinAbs(vd[o], 1e-14));
        for (auto& p : dec.parts) CHECK(l1_norm(p) <= 2 * l1_norm(u) + 1e-14);
        CHECK(l1_norm(dec.residual) <= 2 * l1_norm(u) + 1e-14);
    }
    // residual shrinks with depth for a smooth function
    auto s = GridFunction::sample(2, 6, idx({0, 0}), idx({64, 64}),
                                  [](const Point& x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]); });
    double prev = 1e9;
    for (int depth = 0; depth <= 6; ++depth) {
        const double r = l1_norm(dyadic_decompose(s, depth).residual);
        CHECK(r < prev);
        prev = r;
    }
    CHECK(prev == 0.0);
}

TEST_CASE("equivalence certificate", "[sobolev]") {
    GridFunction z(1, 2, idx({0}), idx({4}));
    auto c0 = equivalence_certificate(z, 0.5, 2);
    CHECK_FALSE(c0.defined);
    CHECK(c0.gagliardo == 0.0);
    CHECK(c0.cost == 0.0);

    // unit interval: cost is |D1|^(1/2) |1|^(1/2) = sqrt 2
    auto c1 = equivalence_certificate(unit_indicator(1, 8), 0.5, 8);
    CHECK_THAT(c1.cost, WithinRel(std::sqrt(2.0), 1e-14));
    CHECK_THAT(c1.ratio, WithinRel(16 / std::sqrt(2.0), 1e-9));

    // unit square at level 8: frozen regression value, ratio = S(1/2)
    auto c2 = equivalence_certificate(unit_indicator(2, 8), 0.5, 8);
    CHECK_THAT(c2.cost, WithinRel(2.0, 1e-14));
    CHECK_THAT(c2.ratio, WithinRel(oracle::rect_perimeter(1, 1, 2.5) / 2, 1e-7));
    CHECK_THAT(c2.ratio * c2.inverse, WithinRel(1.0, 1e-15));
}
