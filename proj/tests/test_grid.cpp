#include <catch_amalgamated.hpp>

#include <random>

#include "fraccur/grid.hpp"

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

CubicalChain random_chain(std::mt19937_64& rng, int d, int m, int level, int n) {
    CubicalChain t(d, m, level);
    std::uniform_int_distribution<int> pos(-3, 3);
    std::uniform_int_distribution<int> coef(-3, 3);
    std::vector<std::uint32_t> masks;
    for (std::uint32_t s = 0; s < (1u << d); ++s)
        if (popcount(s) == m) masks.push_back(s);
    std::uniform_int_distribution<std::size_t> pick(0, masks.size() - 1);
    for (int k = 0; k < n; ++k) {
        Face f;
        for (int i = 0; i < d; ++i) f.base[i] = pos(rng);
        f.axes = masks[pick(rng)];
        t.add(f, coef(rng));
    }
    return t;
}

} // namespace

TEST_CASE("unit square boundary is the counterclockwise loop", "[grid]") {
    CubicalChain sq(2, 2, 0);
    sq.add(face({0, 0}, 0b11), 1.0);
    auto b = boundary(sq);
    REQUIRE(b.size() == 4);
    CHECK(b.coeff(face({0, 0}, 0b01)) == 1.0);
    CHECK(b.coeff(face({1, 0}, 0b10)) == 1.0);
    CHECK(b.coeff(face({0, 1}, 0b01)) == -1.0);
    CHECK(b.coeff(face({0, 0}, 0b10)) == -1.0);
    CHECK(mass(sq) == 1.0);
    CHECK(mass(b) == 4.0);
    CHECK(normal_mass(sq) == 5.0);
}

TEST_CASE("boundary of boundary vanishes exactly", "[grid][property]") {
    std::mt19937_64 rng(7);
    for (int d = 2; d <= 4; ++d)
        for (int m = 2; m <= d; ++m)
            for (int rep = 0; rep < 20; ++rep) {
                auto t = random_chain(rng, d, m, 3, 12);
                CHECK(boundary(boundary(t)).empty());
            }
}

TEST_CASE("unit cube in R^3 has six oriented faces of mass six", "[grid]") {
    CubicalChain c(3, 3, 0);
    c.add(face({0, 0, 0}, 0b111), 1.0);
    auto b = boundary(c);
    CHECK(b.size() == 6);
    CHECK(mass(b) == 6.0);
    CHECK(boundary(b).empty());
}

TEST_CASE("point chain has no boundary", "[grid]") {
    CubicalChain p(2, 0, 0);
    p.add(face({0, 0}, 0), 1.0);
    CHECK(mass(p) == 1.0);
    CHECK_THROWS_AS(boundary(p), Error);
    try {
        boundary(p);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::precondition);
    }
}

TEST_CASE("refinement preserves mass and commutes with boundary", "[grid][property]") {
    std::mt19937_64 rng(11);
    for (int d = 1; d <= 3; ++d)
        for (int m = 1; m <= d; ++m)
            for (int rep = 0; rep < 10; ++rep) {
                auto t = random_chain(rng, d, m, 2, 8);
                auto r = refine(t, 2);
                CHECK_THAT(mass(r), WithinRel(mass(t), 1e-14));
                CHECK(approx_equal(boundary(r), refine(boundary(t), 2)));
            }
}

TEST_CASE("dyadic rescaling multiplies mass by 2^m", "[grid]") {
    std::mt19937_64 rng(3);
    auto t = random_chain(rng, 2, 1, 4, 10);
    CHECK_THAT(mass(rescale_dyadic(t, 1)), WithinRel(2.0 * mass(t), 1e-14));
}

TEST_CASE("Kuhn triangulation preserves mass and boundary", "[grid]") {
    std::mt19937_64 rng(5);
    for (int d = 2; d <= 3; ++d)
        for (int m = 1; m <= d; ++m) {
            auto t = random_chain(rng, d, m, 1, 6);
            auto s = triangulate(t);
            CHECK_THAT(mass(s), WithinRel(mass(t), 1e-12));
            CHECK(approx_equal(boundary(s), triangulate(boundary(t))));
        }
}

TEST_CASE("cone boundary formula", "[grid][cone]") {
    SECTION("degree one: boundary of a cone over a closed polygon is the polygon") {
        SimplicialChain poly(2, 1);
        const int n = 64;
        for (int k = 0; k < n; ++k) {
            const double a = 2 * M_PI * k / n, b = 2 * M_PI * ((k + 1) % n) / n;
            poly.add({make_point({std::cos(a), std::sin(a)}), make_point({std::cos(b), std::sin(b)})}, 1.0);
        }
        poly.canonicalize();
        auto c = cone(make_point({0, 0}), poly);
        CHECK(approx_equal(boundary(c), poly));
        CHECK_THAT(mass(c), WithinAbs(M_PI, 0.01));
    }
    SECTION("degree one with an open curve: boundary is T minus the cone over its boundary") {
        SimplicialChain seg(2, 1);
        seg.add({make_point({1, 0}), make_point({2, 1})}, 1.0);
        const Point a = make_point({0, 3});
        auto lhs = boundary(cone(a, seg));
        auto rhs = seg - cone(a, boundary(seg));
        CHECK(approx_equal(lhs, rhs));
    }
    SECTION("degree zero: the cone over a point is the segment from the apex") {
        SimplicialChain pt(2, 0);
        pt.add({make_point({1, 2})}, 1.0);
        auto c = cone(make_point({0, 0}), pt);
        REQUIRE(c.size() == 1);
        CHECK_THAT(mass(c), WithinRel(std::sqrt(5.0), 1e-14));
        SimplicialChain expect(2, 0);
        expect.add({make_point({1, 2})}, 1.0);
        expect.add({make_point({0, 0})}, -1.0);
        expect.canonicalize();
        CHECK(approx_equal(boundary(c), expect));
        // weight-zero 0-chains satisfy d(a cone T) = T
        SimplicialChain dip(2, 0);
        dip.add({make_point({1, 2})}, 1.0);
        dip.add({make_point({3, -1})}, -1.0);
        dip.canonicalize();
        CHECK(approx_equal(boundary(cone(make_point({0, 0}), dip)), dip));
    }
    SECTION("mass bound M(a cone T) <= diam(K) M(T) / (m+1)") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int rep = 0; rep < 50; ++rep) {
            SimplicialChain t(3, 1);
            for (int k = 0; k < 5; ++k)
                t.add({make_point({u(rng), u(rng), u(rng)}), make_point({u(rng), u(rng), u(rng)})}, u(rng));
            t.canonicalize();
            const Point a = make_point({u(rng), u(rng), u(rng)});
            auto c = cone(a, t);
            // the hull of the apex and T fits in [-1,1]^3
            CHECK(mass(c) <= 2 * std::sqrt(3.0) * mass(t) / 2 + 1e-12);
        }
    }
}

TEST_CASE("simplicial canonical form merges and cancels", "[grid]") {
    SimplicialChain t(2, 1);
    t.add({make_point({0, 0}), make_point({1, 0})}, 1.0);
    t.add({make_point({1, 0}), make_point({0, 0})}, 1.0);
    t.canonicalize();
    CHECK(t.empty());
    t.add({make_point({0, 0}), make_point({0, 0})}, 5.0);
    t.canonicalize();
    CHECK(t.empty());
}

TEST_CASE("subdivision keeps the chain up to boundary and mass", "[grid]") {
    SimplicialChain tri(2, 2);
    tri.add({make_point({0, 0}), make_point({1, 0}), make_point({0, 1})}, 2.0);
    auto s = subdivide(tri, 0.2);
    CHECK_THAT(mass(s), WithinRel(1.0, 1e-12));
    CHECK_THAT(mass(boundary(s)), WithinRel(mass(boundary(tri)), 1e-12));
    for (auto& x : s.simplices())
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) CHECK(dist(x.v[a], x.v[b], 2) <= 0.2 + 1e-12);
}
