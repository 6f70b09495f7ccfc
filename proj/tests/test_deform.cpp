#include <catch_amalgamated.hpp>

#include <random>

#include "fraccur/deform.hpp"

using namespace fraccur;
using Catch::Matchers::WithinAbs;

namespace {

// Affine 1-form w = sum_i (a_i + sum_j B_ij x_j) dx_i; its differential is constant.
struct AffineForm {
    int d;
    double a[kMaxDim];
    double B[kMaxDim][kMaxDim];

    double coef(int i, const Point& x) const {
        double s = a[i];
        for (int j = 0; j < d; ++j) s += B[i][j] * x[j];
        return s;
    }
    double on_segment(const Point& p, const Point& q) const {
        Point mid{};
        for (int i = 0; i < d; ++i) mid[i] = 0.5 * (p[i] + q[i]);
        double s = 0;
        for (int i = 0; i < d; ++i) s += coef(i, mid) * (q[i] - p[i]);
        return s;
    }
    // dw = sum_{i<j} (B_ji - B_ij) dx_i ^ dx_j
    double d_on_triangle(const Point& p, const Point& q, const Point& r) const {
        double s = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                const double u_i = q[i] - p[i], u_j = q[j] - p[j], v_i = r[i] - p[i], v_j = r[j] - p[j];
                s += (B[j][i] - B[i][j]) * 0.5 * (u_i * v_j - u_j * v_i);
            }
        return s;
    }
    double eval(const SimplicialChain& t) const {
        double s = 0;
        for (auto& x : t.simplices())
            s += x.c * (t.degree() == 1 ? on_segment(x.v[0], x.v[1]) : d_on_triangle(x.v[0], x.v[1], x.v[2]));
        return s;
    }
    double eval(const CubicalChain& t) const {
        double s = 0;
        const double h = t.cell();
        for (auto& [f, c] : t.terms()) {
            Point p = face_corner(f, t.level(), d), q = p;
            const int ax = __builtin_ctz(f.axes);
            q[ax] += h;
            s += c * on_segment(p, q);
        }
        return s;
    }
};

AffineForm random_form(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(-1, 1);
    AffineForm w{d, {}, {}};
    for (int i = 0; i < d; ++i) {
        w.a[i] = u(rng);
        for (int j = 0; j < d; ++j) w.B[i][j] = u(rng);
    }
    return w;
}

SimplicialChain random_polyline(std::mt19937_64& rng, int d, int n, bool closed) {
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) {
        Point p{};
        for (int j = 0; j < d; ++j) p[j] = u(rng);
        pts.push_back(p);
    }
    SimplicialChain t(d, 1);
    for (int i = 0; i + 1 < n; ++i) t.add({pts[i], pts[i + 1]}, 1.0);
    if (closed) t.add({pts[n - 1], pts[0]}, 1.0);
    return t.canonicalize();
}

} // namespace

TEST_CASE("deformation identity T = P + dR + S holds against affine forms", "[deform][property]") {
    std::mt19937_64 rng(41);
    for (int d = 2; d <= 3; ++d)
        for (int k = 1; k <= 4; ++k)
            for (int rep = 0; rep < 4; ++rep) {
                auto t = random_polyline(rng, d, 6, rep % 2 == 0);
                auto r = deform(t, k);
                for (int f = 0; f < 3; ++f) {
                    auto w = random_form(rng, d);
                    const double lhs = w.eval(t);
                    const double rhs = w.eval(r.P) + w.eval(r.R) + w.eval(r.S);
                    CHECK_THAT(rhs, WithinAbs(lhs, 1e-10));
                }
                // P is an integral chain here
                for (auto& [face, c] : r.P.terms()) CHECK(c == std::round(c));
            }
}

TEST_CASE("closed curves deform to cycles with no S part", "[deform]") {
    std::mt19937_64 rng(43);
    auto t = random_polyline(rng, 2, 8, true);
    auto r = deform(t, 4);
    CHECK(boundary(r.P).empty());
    CHECK(r.S.empty());
}

TEST_CASE("boundary of P is the deformed boundary of T", "[deform]") {
    std::mt19937_64 rng(44);
    auto t = random_polyline(rng, 2, 5, false);
    auto r = deform(t, 3);
    // dT = dP + dS
    SimplicialChain lhs = boundary(t);
    SimplicialChain rhs = triangulate(boundary(r.P)) + boundary(r.S);
    CHECK(approx_equal(lhs, rhs, 1e-9));
}

TEST_CASE("mass ratios stay bounded", "[deform]") {
    std::mt19937_64 rng(45);
    double worst_r = 0, worst_s = 0, worst_p = 0;
    for (int rep = 0; rep < 20; ++rep) {
        auto t = random_polyline(rng, 2, 10, false);
        for (int k = 2; k <= 6; ++k) {
            auto r = deform(t, k);
            worst_r = std::max(worst_r, r.ratio_R);
            worst_s = std::max(worst_s, r.ratio_S);
            worst_p = std::max(worst_p, r.ratio_P);
            CHECK(r.support_C <= 2.0);
        }
    }
    CHECK(worst_r < 8.0);
    CHECK(worst_s < 8.0);
    CHECK(worst_p < 8.0);
}

TEST_CASE("point chains move to grid vertices", "[deform]") {
    SimplicialChain p(2, 0);
    p.add({make_point({0.3, 0.7})}, 2.0);
    p.add({make_point({-0.41, 0.12})}, -1.0);
    auto r = deform(p, 2);
    CHECK(r.P.size() == 2);
    double total = 0;
    for (auto& [f, c] : r.P.terms()) total += c;
    CHECK(total == 1.0);
    // 0-form identity: f(T) = f(P) + df(R) for affine f
    auto f = [](const Point& x) { return 0.3 + 1.7 * x[0] - 0.4 * x[1]; };
    double lhs = 2.0 * f(make_point({0.3, 0.7})) - f(make_point({-0.41, 0.12}));
    double rhs = 0;
    for (auto& [face, c] : r.P.terms()) rhs += c * f(face_corner(face, r.P.level(), 2));
    for (auto& s : r.R.simplices()) rhs += s.c * (f(s.v[1]) - f(s.v[0]));
    CHECK_THAT(rhs, WithinAbs(lhs, 1e-12));
}

TEST_CASE("chains already on the grid are unchanged", "[deform]") {
    CubicalChain t(2, 1, 2);
    Face f;
    f.axes = 1;
    t.add(f, 1.0);
    auto r = deform(t, 3);
    CHECK(approx_equal(r.P, refine(t, 1)));
    CHECK(r.R.empty());
    auto s = deform(triangulate(refine(t, 1)), 3);
    CHECK(approx_equal(s.P, refine(t, 1)));
    CHECK(mass(s.R) < 1e-14);
}

TEST_CASE("flat distance between nearby segments", "[deform]") {
    SimplicialChain a(2, 1), b(2, 1);
    a.add({make_point({0.1, 0.3}), make_point({0.9, 0.3})}, 1.0);
    b.add({make_point({0.1, 0.31}), make_point({0.9, 0.31})}, 1.0);
    auto fd = flat_distance(a, b, 6);
    // true distance is about 0.8 * 0.01 + 2 * 0.01
    CHECK(std::abs(fd.value - 0.028) <= fd.error_bound + 1e-12);
    CHECK(deform(a, 6).ratio_R >= 0);
}
