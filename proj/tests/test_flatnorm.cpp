#include <catch_amalgamated.hpp>

#include <random>

#include "fraccur/flatnorm.hpp"
#include "oracles.hpp"

using namespace fraccur;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Face face(std::initializer_list<std::int64_t> base, std::uint32_t axes) {
    Face f;
    int i = 0;
    for (auto b : base) f.base[i++] = b;
    f.axes = axes;
    return f;
}

Index idx(std::initializer_list<std::int64_t> v) {
    Index r{};
    int i = 0;
    for (auto x : v) r[i++] = x;
    return r;
}

CubicalChain random_in_box(std::mt19937_64& rng, int d, int m, int level, const Index& lo, const Index& hi, int n) {
    std::uniform_int_distribution<int> coef(-2, 2);
    auto faces = oracle::box_faces(d, m, lo, hi);
    std::uniform_int_distribution<std::size_t> pick(0, faces.size() - 1);
    CubicalChain t(d, m, level);
    for (int k = 0; k < n; ++k) t.add(faces[pick(rng)], coef(rng) * 0.5);
    return t;
}

} // namespace

TEST_CASE("flat norm of two nearby points is their distance", "[flatnorm]") {
    for (int k = 1; k <= 6; ++k) {
        CubicalChain t(1, 0, k);
        t.add(face({0}, 0), 1.0);
        t.add(face({1}, 0), -1.0);
        auto r = flat_norm(t);
        CHECK_THAT(r.value, WithinRel(dyadic(k), 1e-12));
        CHECK(r.gap < 1e-12);
    }
    CubicalChain p(2, 0, 3);
    p.add(face({0, 0}, 0), 1.0);
    p.add(face({1, 0}, 0), -1.0);
    CHECK_THAT(flat_norm(p).value, WithinRel(0.125, 1e-12));
}

TEST_CASE("flat norm of a unit segment is its length", "[flatnorm]") {
    CubicalChain t(2, 1, 0);
    t.add(face({0, 0}, 0b01), 1.0);
    CHECK_THAT(flat_norm(t).value, WithinRel(1.0, 1e-12));
    CHECK_THAT(flat_norm(t, 2, {FlatBackend::dense}).value, WithinRel(1.0, 1e-12));
}

TEST_CASE("boundary of a small dyadic square fills in", "[flatnorm]") {
    for (int k = 0; k <= 5; ++k) {
        CubicalChain sq(2, 2, k);
        sq.add(face({0, 0}, 0b11), 1.0);
        const double expect = std::min(4.0 * dyadic(k), dyadic(2 * k));
        auto r = flat_norm(boundary(sq));
        CHECK_THAT(r.value, WithinRel(expect, 1e-12));
    }
}

TEST_CASE("top-degree chains have flat norm equal to mass", "[flatnorm]") {
    CubicalChain sq(2, 2, 2);
    sq.add(face({0, 0}, 0b11), 1.5);
    sq.add(face({3, 1}, 0b11), -2.0);
    CHECK(flat_norm(sq).value == mass(sq));
}

TEST_CASE("dense simplex agrees with vertex enumeration", "[flatnorm][oracle]") {
    std::mt19937_64 rng(17);
    struct Case {
        int d, m;
        Index lo, hi;
    };
    const std::vector<Case> cases = {
        {1, 0, idx({0}), idx({4})},
        {2, 1, idx({0, 0}), idx({2, 2})},
        {2, 0, idx({0, 0}), idx({2, 1})},
        {3, 1, idx({0, 0, 0}), idx({1, 1, 1})},
        {3, 2, idx({0, 0, 0}), idx({2, 1, 1})},
    };
    for (auto& c : cases)
        for (int rep = 0; rep < 6; ++rep) {
            const int level = rep % 3;
            auto t = random_in_box(rng, c.d, c.m, level, c.lo, c.hi, 3);
            if (t.empty()) continue;
            auto dom = ComplexDomain::box(c.d, level, c.lo, c.hi);
            const double ref = oracle::flat_norm_enum(t, c.lo, c.hi);
            auto r = flat_norm(t, dom, {FlatBackend::dense});
            CHECK_THAT(r.value, WithinAbs(ref, 1e-9));
            CHECK(r.gap < 1e-9);
        }
}

TEST_CASE("network backends agree with the dense simplex", "[flatnorm][property]") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 12; ++rep) {
        const Index lo = idx({0, 0}), hi = idx({4, 3});
        auto dom = ComplexDomain::box(2, 2, lo, hi);
        auto t1 = random_in_box(rng, 2, 1, 2, idx({1, 1}), idx({3, 2}), 5);
        auto t0 = random_in_box(rng, 2, 0, 2, idx({1, 1}), idx({3, 2}), 4);
        for (auto* t : {&t1, &t0}) {
            if (t->empty()) continue;
            auto a = flat_norm(*t, dom, {FlatBackend::dense});
            auto b = flat_norm(*t, dom, {FlatBackend::network});
            CHECK_THAT(b.value, WithinAbs(a.value, 1e-10));
            CHECK(b.gap < 1e-10);
        }
    }
    for (int rep = 0; rep < 6; ++rep) {
        auto dom = ComplexDomain::box(3, 1, idx({0, 0, 0}), idx({3, 2, 2}));
        auto t = random_in_box(rng, 3, 2, 1, idx({1, 0, 0}), idx({2, 1, 1}), 4);
        if (t.empty()) continue;
        auto a = flat_norm(t, dom, {FlatBackend::dense});
        auto b = flat_norm(t, dom, {FlatBackend::network});
        CHECK_THAT(b.value, WithinAbs(a.value, 1e-10));
    }
}

TEST_CASE("flat norm is a seminorm on random chains", "[flatnorm][property]") {
    std::mt19937_64 rng(29);
    const Index lo = idx({0, 0}), hi = idx({5, 5});
    auto dom = ComplexDomain::box(2, 1, lo, hi);
    for (int rep = 0; rep < 10; ++rep) {
        auto a = random_in_box(rng, 2, 1, 1, idx({1, 1}), idx({4, 4}), 6);
        auto b = random_in_box(rng, 2, 1, 1, idx({1, 1}), idx({4, 4}), 6);
        const double fa = flat_norm(a, dom).value, fb = flat_norm(b, dom).value;
        CHECK(flat_norm(a + b, dom).value <= fa + fb + 1e-12);
        CHECK_THAT(flat_norm(2.5 * a, dom).value, WithinAbs(2.5 * fa, 1e-10));
        CHECK(fa <= mass(a) + 1e-12);
        auto ab = a;
        ab.add(face({2, 2}, 0b01), 0); // no-op
        CHECK(flat_norm(ab, dom).value == fa);
    }
}

TEST_CASE("band domains give an upper bound on the box value", "[flatnorm]") {
    std::mt19937_64 rng(31);
    auto t = random_in_box(rng, 2, 1, 3, idx({4, 4}), idx({10, 10}), 20);
    const double full = flat_norm(t, ComplexDomain::box(2, 3, idx({0, 0}), idx({14, 14}))).value;
    const double band = flat_norm(t, ComplexDomain::band(t, 2)).value;
    CHECK(band >= full - 1e-12);
    CHECK(band <= mass(t) + 1e-12);
}

TEST_CASE("chain escaping the domain is rejected", "[flatnorm]") {
    CubicalChain t(2, 1, 0);
    t.add(face({5, 5}, 0b01), 1.0);
    auto dom = ComplexDomain::box(2, 0, idx({0, 0}), idx({2, 2}));
    CHECK_THROWS_AS(flat_norm(t, dom), Error);
}

TEST_CASE("lp constant matches its closed form", "[flatnorm]") {
    const double a = 0.3, b = 1.0;
    const double q = std::pow(2.0, b - a);
    CHECK_THAT(lp_constant(a, b), WithinRel(q / (q - 1) + 1 / (1 - std::pow(2.0, -a)), 1e-15));
    CHECK_THROWS(lp_constant(0.5, 0.5));
    CHECK_THROWS(lp_constant(0.0, 0.5));
}

TEST_CASE("fractional costs", "[flatnorm]") {
    CubicalChain sq(2, 2, 0);
    sq.add(face({0, 0}, 0b11), 1.0);
    auto dec = decompose_exact({sq});
    // unit square: N = 5, F = M = 1
    CHECK_THAT(frac_cost(dec, 0.5), WithinRel(std::sqrt(5.0), 1e-12));
    CHECK_THAT(frac_cost_tilde(dec, 0.5), WithinRel(2.0, 1e-12));
    // homogeneity of the tilde cost under x -> 2x in top degree
    auto big = decompose_exact({rescale_dyadic(sq, -1 * -1)});
    CHECK_THAT(frac_cost_tilde(big, 0.4), WithinRel(std::pow(2.0, 1 + 0.4) * frac_cost_tilde(dec, 0.4), 1e-12));
    CHECK_THROWS(frac_cost(dec, 1.0));
}

TEST_CASE("greedy improver never increases cost", "[flatnorm]") {
    CubicalChain a(2, 1, 2), b(2, 1, 2);
    a.add(face({0, 0}, 0b01), 1.0);
    a.add(face({1, 0}, 0b01), 1.0);
    b.add(face({2, 0}, 0b01), 1.0);
    b.add(face({3, 0}, 0b01), 1.0);
    auto r = improve_decomposition({a, b}, 0.5);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] + 1e-12);
    CHECK(approx_equal(decomposition_sum(r.best), a + b));
}
