#pragma once

#include <iostream>
#include <numbers>
#include <optional>

#include <CLI11.hpp>

#include "deform.hpp"
#include "flatnorm.hpp"
#include "fractal.hpp"
#include "holder.hpp"
#include "io.hpp"
#include "pushforward.hpp"
#include "sobolev.hpp"
#include "young.hpp"

namespace fraccur::cli {

// One invocation: the arguments that define it, plus the output sink.
struct Run {
    std::string sub;
    std::vector<std::string> args; // everything after the program name except --threads
    std::uint64_t seed = 1;
    std::string out;
    json inputs = json::object();
    std::ostream* os = &std::cout;

    json config() const { return {{"subcommand", sub}, {"args", args}, {"seed", seed}}; }

    void input(const std::string& path) {
        if (std::filesystem::is_regular_file(path)) inputs[path] = sha256_file(path);
    }

    // Result document to --out with a manifest, or to stdout.
    void emit(const json& result, const json& measured) { emit_text(dump_json(result), measured); }

    void emit_text(const std::string& text, const json& measured) {
        if (out.empty()) {
            *os << text;
            return;
        }
        write_file(out, text);
        write_manifest(out, config(), inputs, measured);
        *os << "wrote " << out << "\n";
        for (auto& [k, v] : measured.items())
            if (!v.is_structured()) *os << "  " << k << " = " << v.dump() << "\n";
    }
};

namespace detail {

inline std::pair<int, int> parse_range(const std::string& s) {
    const auto dots = s.find("..");
    if (dots == std::string::npos) fail(ErrorKind::config, "expected a range a..b, got " + s);
    try {
        const int a = std::stoi(s.substr(0, dots)), b = std::stoi(s.substr(dots + 2));
        if (a > b) fail(ErrorKind::config, "empty range " + s);
        return {a, b};
    } catch (const std::logic_error&) {
        fail(ErrorKind::config, "bad range " + s);
    }
}

// "1/16" or "0.0625"; must be a power of two. Returns k with eps = 2^-k.
inline int parse_dyadic_eps(const std::string& s) {
    double v = 0;
    try {
        const auto slash = s.find('/');
        v = slash == std::string::npos ? std::stod(s) : std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    } catch (const std::logic_error&) {
        fail(ErrorKind::config, "bad eps " + s);
    }
    if (!(v > 0 && v <= 1)) fail(ErrorKind::config, "eps must lie in (0, 1]");
    const int k = int(std::lround(-std::log2(v)));
    if (std::ldexp(1.0, -k) != v) fail(ErrorKind::config, "eps must be a power of two: " + s);
    return k;
}

inline std::vector<double> parse_list(const std::string& s, std::size_t n, const std::string& what) {
    auto v = parse_csv_numbers(s, what);
    if (v.size() != n) fail(ErrorKind::config, what + " needs " + std::to_string(n) + " numbers");
    return v;
}

inline json cauchy_json(const CauchySeries& c) {
    return {{"sums", c.sums}, {"increments", c.increments}, {"value", c.value}, {"ratio", c.ratio},
            {"theory", c.theory}, {"tail", c.tail}, {"cauchy", c.cauchy}};
}

inline std::string cauchy_csv(const CauchySeries& c) {
    std::string s = "level,sum,increment\n";
    for (std::size_t l = 0; l < c.sums.size(); ++l) {
        s += std::to_string(l + 1) + "," + format_double(c.sums[l]) + ",";
        if (l > 0) s += format_double(c.increments[l - 1]);
        s += "\n";
    }
    return s;
}

inline json run_json(const PushforwardRun& r) {
    return {{"map", r.map},           {"m", r.m},
            {"alpha", r.alpha},       {"beta", r.beta},
            {"gamma", r.gamma},       {"distances", r.distances},
            {"distance_error", r.distance_error}, {"sup_step", r.sup_step},
            {"ratio", r.ratio},       {"tail", r.tail},
            {"converged", r.converged}, {"verdict", r.verdict},
            {"stages", r.stages.size()}, {"result", to_json(r.result())}};
}

// Number-or-null for values that may be infinite.
inline json finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace detail

int run(const std::vector<std::string>& argv, std::ostream& os = std::cout, std::ostream& es = std::cerr);

namespace detail {

struct Check {
    std::string name;
    std::function<bool()> ok;
};

inline CubicalChain cube(int d, int m = -1, int level = 0) {
    if (m < 0) m = d;
    CubicalChain t(d, m, level);
    Face f;
    f.axes = (1u << m) - 1u;
    t.add(f, 1);
    return t;
}

inline FormComponent linear(double c0, double c1, double c2) {
    return {[=](const Point& p) { return c0 + c1 * p[0] + c2 * p[1]; }, [=](const Point&) { return make_point({c1, c2}); }};
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// The examples whose expected values follow from definitions alone.
inline std::vector<Check> selftest_checks() {
    std::vector<Check> c;
    const auto sq = cube(2);
    auto add = [&](std::string n, std::function<bool()> f) { c.push_back({std::move(n), std::move(f)}); };

    add("boundary of the unit square has four unit edges", [=] {
        const auto b = boundary(sq);
        return b.size() == 4 && mass(b) == 4 && boundary(b).empty();
    });
    add("boundary of boundary of the unit cube vanishes", [] { return boundary(boundary(cube(3))).empty(); });
    add("shared face cancels", [] {
        auto t = cube(2);
        Face f;
        f.axes = 3;
        f.base = Index{1, 0};
        t.add(f, 1);
        return boundary(t).size() == 6 && mass(boundary(t)) == 6;
    });
    add("mass of a single face", [] {
        CubicalChain t(3, 2, 3);
        Face f;
        f.axes = 5;
        t.add(f, -2.5);
        return mass(t) == 2.5 / 64;
    });
    add("refinement preserves mass", [=] { return at_level(sq, 1).size() == 4 && mass(at_level(sq, 1)) == 1; });
    add("triangle mass", [] {
        SimplicialChain t(2, 2);
        t.add({make_point({0, 0}), make_point({1, 0}), make_point({0, 1})}, 2);
        return near(mass(t), 1, 1e-15);
    });
    add("normal mass of the unit square", [=] { return normal_mass(sq) == 5 && normal_mass(CubicalChain(2, 1, 0)) == 0; });
    add("normal mass of a short segment", [] { return normal_mass(cube(1, 1, 5)) == 1.0 / 32 + 2; });
    add("refine twice equals refine by two", [] {
        const auto e = cube(2, 1);
        return refine_once(e).size() == 2 && approx_equal(refine_once(refine_once(e)), refine(e, 2), 0) &&
               mass(refine(boundary(cube(2)), 3)) == 4;
    });
    add("cone over a cycle has that cycle as boundary", [=] {
        const auto T = triangulate(boundary(sq));
        return approx_equal(boundary(cone(make_point({0, 0}), T)), T);
    });
    add("flat norm of the zero chain", [] { return flat_norm(CubicalChain(2, 1, 0)).value == 0; });
    add("flat norm of two points", [] {
        CubicalChain t(1, 0, 2);
        Face a, b;
        a.base = Index{1};
        b.base = Index{3};
        t.add(a, 1);
        t.add(b, -1);
        return near(flat_norm(t).value, 0.5, 1e-12);
    });
    add("unit cube decomposition cost", [=] {
        const auto dec = decompose_exact({sq});
        return near(frac_cost_tilde(dec, 0.3), std::pow(4.0, 0.7), 1e-12);
    });
    add("decomposition cost rescales by 2^(d-1+alpha)", [=] {
        const auto t = at_level(sq, 2);
        const double a = frac_cost_tilde(decompose_exact({t}), 0.4), b = frac_cost_tilde(decompose_exact({rescale_dyadic(t, 1)}), 0.4);
        return near(b / a, std::exp2(1.4), 1e-12);
    });
    add("deformation fixes grid chains", [=] {
        const auto t = at_level(boundary(sq), 4);
        const auto r = deform(t, 4);
        return approx_equal(r.P, t) && mass(r.R) == 0 && mass(r.S) == 0;
    });
    add("paraproduct constant blows up as beta decreases to alpha", [] { return lp_constant(0.5, 0.5001) > lp_constant(0.5, 0.9); });
    add("seminorms of zero", [] {
        const GridFunction z(2, 3, Index{0, 0}, Index{8, 8});
        return gagliardo(z, 0.5).value == 0 && frac_perimeter(z, 0.5) == 0;
    });
    add("BV norm of the unit square and an L shape", [] {
        const GridFunction u(2, 0, Index{0, 0}, Index{1, 1}, {1.0});
        const GridFunction L(2, 0, Index{0, 0}, Index{2, 2}, {1.0, 1.0, 1.0, 0.0});
        return bv_norm(u) == 4 && bv_norm(L) == 8;
    });
    add("interpolation ratio is homogeneous", [] {
        GridFunction u(2, 3, Index{0, 0}, Index{8, 8});
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = double((i * 7) % 5) - 2;
        return near(interpolation_ratio(u, 0.5), interpolation_ratio(3 * u, 0.5), 1e-12);
    });
    add("dyadic parts of the half indicator", [] {
        const GridFunction u(1, 3, Index{0}, Index{4}, {1.0, 1.0, 1.0, 1.0});
        const auto dd = dyadic_decompose(u, 3);
        return dd.parts[0][0] == 0.5 && dd.parts[1][0] == 0.5 && dd.parts[1][1] == -0.5 && dd.parts[2].is_zero() &&
               dd.parts[3].is_zero();
    });
    add("equivalence is undefined for zero", [] {
        return !equivalence_certificate(GridFunction(2, 3, Index{0, 0}, Index{8, 8}), 0.5, 3).defined;
    });
    add("a dyadic corner meets 2^d closed cubes", [] {
        return box_count(OccupancySet::from_points(2, {make_point({0.5, 0.25})}), 4) == 4;
    });
    add("box dimension of a square and a segment", [] {
        const auto s = box_dimension(square(0, 1), 2, 6);
        const auto g = box_dimension(OccupancySet::from_segments(2, {{make_point({0.0123, 0.3141}), make_point({0.9871, 0.2718})}}), 4, 10);
        return near(s.slope, 2, 0.05) && near(g.slope, 1, 0.05);
    });
    add("a point is summable", [] { return summability(OccupancySet::from_points(2, {make_point({0.3, 0.3})}), 1, 10).converging; });
    add("unit disk area", [] {
        const auto r = rasterize(disk(make_point({0, 0}), 1), 8);
        double s = 0;
        for (double v : r.values()) s += v;
        return near(s * r.cell() * r.cell(), std::numbers::pi, 0.01 * std::numbers::pi);
    });
    add("koch generation 0 is the triangle", [] {
        const auto r = rasterize(koch_snowflake(0, make_point({0.5, 0.5}), 0.6), 9);
        double s = 0;
        for (double v : r.values()) s += v;
        return near(s * r.cell() * r.cell(), std::sqrt(3.0) / 4 * 0.36, 0.01 * 0.36);
    });
    add("weierstrass rejects a = 1 and sums its series at 0", [] {
        bool threw = false;
        try {
            weierstrass(1.0);
        } catch (const Error& e) {
            threw = e.kind() == ErrorKind::precondition;
        }
        const double q = std::exp2(-0.6);
        return threw && near(weierstrass(0.6)(0.0), (1 - std::pow(q, 20)) / (1 - q), 1e-12);
    });
    add("takagi with one term is the triangle wave", [] {
        const auto t = takagi(1);
        return t(0.25) == 0.25 && t(0.5) == 0.5 && t(0.75) == 0.25;
    });
    add("fbm is reproducible", [] { return fbm_like(0.7, 42)(0.3) == fbm_like(0.7, 42)(0.3); });
    add("mollification keeps constants and affine maps", [] {
        const Mollified c(constant_map(2.5), 0.125), a(power_function(1), 0.125);
        Point v{}, w{};
        c.eval(make_point({0.4}), v);
        a.eval(make_point({0.4}), w);
        return near(v[0], 2.5, 1e-13) && near(w[0], 0.4, 1e-13);
    });
    add("holder quotient of affine and constant maps", [] {
        const auto a = holder_quotient(linear_combination({{-1.5, power_function(1)}}), 2000);
        return near(a.max_quotient, 1.5, 1e-9) && holder_quotient(constant_map(3.0), 2000).max_quotient == 0;
    });
    add("lipschitz pushforwards", [=] {
        const auto T = triangulate(boundary(sq));
        const auto dbl = lipschitz_pushforward(affine({{2, 0}, {0, 2}}, Point{}, unit_box(2)), triangulate(cube(2, 1)));
        const double c = std::cos(std::numbers::pi / 6), s = std::sin(std::numbers::pi / 6);
        const auto rot = lipschitz_pushforward(affine({{c, -s}, {s, c}}, Point{}, unit_box(2)), T);
        return approx_equal(lipschitz_pushforward(identity_map(2), T), T) && near(mass(dbl), 2, 1e-12) && near(mass(rot), 4, 1e-9);
    });
    add("rough graphs are rejected for curves", [] {
        try {
            holder_pushforward(graph_curve(weierstrass(0.45)), 0.45, cube(1), 0, 4, 1e-3);
        } catch (const Error& e) {
            return e.kind() == ErrorKind::precondition;
        }
        return false;
    });
    add("identity degree is the indicator", [] {
        const auto U = disk(make_point({0.5, 0.5}), 0.3);
        const auto deg = degree_field(identity_map(2), U, 5, Index{0, 0}, Index{32, 32});
        for (std::size_t o = 0; o < deg.degree.size(); ++o) {
            if (deg.flagged[o] != 0) continue;
            const auto cc = deg.degree.cell_at(o);
            const Point x = make_point({(double(cc[0]) + 0.5) / 32, (double(cc[1]) + 0.5) / 32});
            if (deg.degree[o] != (U.contains(x) ? 1.0 : 0.0)) return false;
        }
        return true;
    });
    add("forms on the unit square", [=] {
        const auto x1dx2 = smooth_form(2, 1, {linear(0, 0, 0), linear(0, 1, 0)});
        return form_eval(constant_form(2, 2, {1.0}), sq) == 1 && form_eval(constant_form(2, 1, {1.0, 0.0}), boundary(sq)) == 0 &&
               near(form_eval(x1dx2, boundary(sq)), 1, 1e-15);
    });
    add("stokes for smooth and constant forms", [=] {
        const auto x1dx2 = smooth_form(2, 1, {linear(0, 0, 0), linear(0, 1, 0)});
        const auto s = stokes_check(x1dx2, at_level(sq, 8));
        const auto k = stokes_check(constant_form(2, 1, {0.3, 0.2}), at_level(sq, 4));
        return near(s.lhs, 1, 1e-12) && s.gap <= 1e-3 && k.lhs == 0 && near(k.rhs, 0, 1e-14);
    });
    add("young integral of t dt", [] { return near(young_1d(power_function(1), power_function(1), 12).value, 0.5, std::exp2(-12)); });
    add("young integral of powers", [] { return near(young_1d(power_function(2), power_function(3), 16).value, 0.6, 1e-4); });
    add("zust integral of affine maps", [] {
        const auto g1 = linear_combination({{2.0, coordinate(0, 2)}, {0.5, coordinate(1, 2)}});
        const auto g2 = linear_combination({{-1.0, coordinate(0, 2)}, {3.0, coordinate(1, 2)}});
        const auto z = zust_integral({constant_map(1.0, 2), g1, g2}, 4);
        const auto v = zust_integral({constant_map(1.0, 2), coordinate(0, 2), coordinate(1, 2)}, 4);
        return near(z.value, 6.5, 1e-12) && near(v.value, 1, 1e-14);
    });
    add("wedge of constants is pointwise", [=] {
        const auto w = constant_form(2, 1, {0.5, 2.0}), e = constant_form(2, 1, {-1.0, 3.0});
        const auto s = wedge_eval(w, e, sq, 2);
        return s.partial[0] == form_eval(wedge(w, e), at_level(sq, 2)) && near(s.value, 3.5, 1e-14);
    });
    add("leibniz for constant forms", [=] {
        return leibniz_check(constant_form(2, 0, {2.0}), constant_form(2, 1, {1.0, -1.0}), at_level(sq, 4)) <= 1e-14;
    });
    return c;
}

// Writes the built-in sets, chains, functions and forms under dir, each with a
// manifest, plus index.json. Returns the index.
inline json write_corpus(const std::string& dir, const Run& r) {
    json index = json::array();
    auto put = [&](const std::string& name, const std::string& rel, const std::string& kind, const std::string& bytes,
                   json measured = json::object()) {
        const auto path = (std::filesystem::path(dir) / rel).string();
        write_file(path, bytes);
        measured["name"] = name;
        write_manifest(path, r.config(), json::object(), measured);
        index.push_back({{"name", name}, {"kind", kind}, {"path", rel}, {"sha256", sha256_file(path)}});
    };
    auto put_raster = [&](const std::string& name, const std::string& stem, int level) {
        const auto U = parse_set(name);
        const auto A = rasterize(U, level);
        const auto csv = (std::filesystem::path(dir) / ("sets/" + stem + ".csv")).string();
        write_file(csv, grid_csv(A));
        std::size_t cells = 0;
        for (double v : A.values()) cells += v != 0;
        put(name, "sets/" + stem + ".json", "set", dump_json(grid_header(A, stem + ".csv")), {{"cells", cells}, {"level", level}});
    };

    for (int k = 0; k <= 7; ++k) put_raster("koch:" + std::to_string(k), "koch_" + std::to_string(k), 8);
    put_raster("disk", "disk", 6);
    put_raster("square", "square", 6);
    put_raster("cantor:4,ratio=0.3", "cantor", 8);
    put_raster("star:k=5,amp=0.2", "star", 7);
    {
        const auto K = koch_curve(4);
        json segs = json::array();
        for (auto& sg : K.segments()) segs.push_back({fraccur::detail::point_to(sg.a, 2), fraccur::detail::point_to(sg.b, 2)});
        put("kochcurve:4", "sets/kochcurve_4.json", "polyline", dump_json({{"d", 2}, {"segments", segs}}), {{"segments", K.segments().size()}});
    }

    auto put_chain = [&](const std::string& name, const json& j) {
        put(name, "chains/" + name + ".json", "chain", dump_json(j));
    };
    {
        CubicalChain t(1, 0, 2);
        Face a, b;
        a.base = Index{1};
        b.base = Index{3};
        t.add(a, 1);
        t.add(b, -1);
        put_chain("two_points", to_json(t));
    }
    put_chain("unit_interval", to_json(detail::cube(1)));
    put_chain("unit_square", to_json(detail::cube(2)));
    put_chain("unit_square_boundary", to_json(boundary(detail::cube(2))));
    {
        CubicalChain t(2, 2, 0);
        for (auto [x, y] : {std::pair{0, 0}, {1, 0}, {0, 1}}) {
            Face f;
            f.axes = 3;
            f.base = Index{x, y};
            t.add(f, 1);
        }
        put_chain("l_shape", to_json(t));
    }
    {
        SimplicialChain t(2, 2);
        t.add({make_point({0, 0}), make_point({1, 0}), make_point({0, 1})}, 2);
        put_chain("triangle", to_json(t));
    }
    {
        // closed curve off the grid, for deformation
        SimplicialChain t(2, 1);
        std::vector<Point> v;
        for (int k = 0; k < 5; ++k)
            v.push_back(make_point({0.5 + 0.37 * std::cos(0.3 + 2 * std::numbers::pi * k / 5), 0.5 + 0.37 * std::sin(0.3 + 2 * std::numbers::pi * k / 5)}));
        for (int k = 0; k < 5; ++k) t.add({v[std::size_t(k)], v[std::size_t((k + 1) % 5)]}, 1);
        put_chain("pentagon", to_json(t));
    }
    {
        std::mt19937_64 rng(r.seed);
        CubicalChain t(2, 1, 4);
        for (int k = 0; k < 12; ++k) {
            Face f;
            f.axes = 1u << (rng() % 2);
            f.base = Index{std::int64_t(rng() % 16), std::int64_t(rng() % 16)};
            t.add(f, double(int(rng() % 7) - 3));
        }
        put_chain("random", to_json(t));
    }

    json specs = json::array();
    for (const char* sp : {"weierstrass:a=0.6", "weierstrass:a=0.8", "takagi:terms=16", "fbm:h=0.7,seed=42", "graph:a=0.8",
                           "weierstrass2d:a=0.8,amp=0.1", "zsquare", "shear:a=0.8,amp=0.2"}) {
        const auto f = parse_function(sp);
        specs.push_back({{"spec", sp}, {"name", f.name()}, {"gamma", f.gamma()}, {"constant", f.lip()}, {"in", f.in_dim()}, {"out", f.out_dim()}});
    }
    put("functions", "functions/specs.json", "function-specs", dump_json(specs));
    for (auto [stem, sp] : {std::pair{"weierstrass_0.6", "weierstrass:a=0.6"}, {"weierstrass_0.8", "weierstrass:a=0.8"},
                            {"takagi", "takagi:terms=16"}, {"fbm_0.7", "fbm:h=0.7,seed=42"}}) {
        const auto f = parse_function(sp);
        std::string csv = "t,value\n";
        for (int i = 0; i <= 1024; ++i) {
            const double t = i / 1024.0;
            csv += format_double(t) + "," + format_double(f(t)) + "\n";
        }
        put(sp, std::string("functions/") + stem + ".csv", "samples", csv, {{"gamma", f.gamma()}});
    }

    put("omega", "forms/omega.json", "form",
        dump_json({{"d", 2}, {"m", 1}, {"name", "omega"}, {"components", {"lift:a=0.8,axis=1,d=2", "lift:a=0.8,axis=0,d=2,phase=1"}}}));
    put("eta", "forms/eta.json", "form",
        dump_json({{"d", 2}, {"m", 1}, {"name", "eta"}, {"components", {"lift:a=0.7,axis=0,d=2,phase=0.5", "lift:a=0.9,axis=1,d=2"}}}));
    put("dg1_dg2", "forms/dg1_dg2.json", "form",
        dump_json({{"d", 2}, {"differential_product", {"shear:a=0.8,amp=0.2", "coord:i=1,d=2"}}}));

    const auto ipath = (std::filesystem::path(dir) / "index.json").string();
    write_file(ipath, dump_json({{"objects", index}, {"count", index.size()}}));
    write_manifest(ipath, r.config(), json::object(), {{"count", index.size()}});
    return index;
}

} // namespace detail

inline int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    CLI::App app{"Fractional currents toolkit", "fraccur"};
    app.fallthrough();
    app.require_subcommand(1);

    int threads = 0;
    std::uint64_t seed = 1;
    app.add_option("--threads", threads, "worker threads (default FRACCUR_THREADS, else 1)");
    app.add_option("--seed", seed, "seed for randomized steps");

    std::string out, chain, fn, set, map, omega, eta, levels = "2..8", eps = "1/16", report = "json", box, backend = "auto",
                                                   emit_dec, dir, manifest;
    std::string g[4];
    double alpha = 0.5, beta = 0.25, gamma = 0, tol = 1e-3;
    int pad = 2, level = 8, depth = 8, kmax = 8, nmax = 8, grid = 256, d = 1, samples = 10000, u_level = -1;
    double push_alpha = 0, wedge_tol = 0;
    int young_level = 12, zust_level = 10, wedge_nmax = 6;
    long max_iter = 0;
    bool top = false, exact = false, region = false;

    auto with_out = [&](CLI::App* s) { s->add_option("--out", out, "output file (stdout when omitted)"); };
    std::vector<std::pair<CLI::App*, std::function<void(Run&)>>> handlers;

    // ---- flat norm and deformation ----
    auto* s_flat = app.add_subcommand("flatnorm", "flat norm of a chain");
    s_flat->add_option("--chain", chain)->required();
    s_flat->add_option("--pad", pad);
    s_flat->add_option("--backend", backend)->check(CLI::IsMember({"auto", "dense", "network"}));
    s_flat->add_option("--max-iter", max_iter, "simplex iteration cap");
    s_flat->add_option("--level", level, "grid level for simplicial input");
    with_out(s_flat);
    handlers.push_back({s_flat, [&](Run& r) {
                            r.input(chain);
                            const auto any = load_chain(chain);
                            CubicalChain t = std::holds_alternative<CubicalChain>(any) ? std::get<CubicalChain>(any)
                                                                                        : deform(std::get<SimplicialChain>(any), level).P;
                            FlatNormOptions opt;
                            opt.backend = backend == "dense" ? FlatBackend::dense : backend == "network" ? FlatBackend::network : FlatBackend::automatic;
                            if (max_iter > 0) opt.max_iter = max_iter;
                            const auto f = flat_norm(t, pad, opt);
                            r.emit({{"value", f.value}, {"lp_value", f.lp_value}, {"gap", f.gap}, {"backend", f.backend},
                                    {"iterations", f.iterations}, {"cells", f.cells}, {"mass", mass(t)}, {"normal_mass", normal_mass(t)},
                                    {"witness", to_json(f.witness)}, {"residual", to_json(f.residual)}},
                                   {{"value", f.value}, {"gap", f.gap}, {"mass", mass(t)}});
                        }});

    auto* s_def = app.add_subcommand("deform", "deform a chain onto the eps grid");
    s_def->add_option("--chain", chain)->required();
    s_def->add_option("--eps", eps, "grid size, a power of two such as 1/16");
    with_out(s_def);
    handlers.push_back({s_def, [&](Run& r) {
                            r.input(chain);
                            const int k = detail::parse_dyadic_eps(eps);
                            const auto any = load_chain(chain);
                            const auto res = std::holds_alternative<CubicalChain>(any) ? deform(std::get<CubicalChain>(any), k)
                                                                                       : deform(std::get<SimplicialChain>(any), k);
                            r.emit({{"eps", res.eps}, {"level", k}, {"P", to_json(res.P)}, {"mass_R", mass(res.R)}, {"mass_S", mass(res.S)},
                                    {"ratio_R", res.ratio_R}, {"ratio_S", res.ratio_S}, {"ratio_P", res.ratio_P}, {"support_C", res.support_C}},
                                   {{"ratio_R", res.ratio_R}, {"ratio_S", res.ratio_S}, {"ratio_P", res.ratio_P}, {"support_C", res.support_C}});
                        }});

    // ---- fractional seminorms ----
    auto* s_gag = app.add_subcommand("gagliardo", "W^{1-alpha,1} seminorm of a grid function");
    s_gag->add_option("--fn", fn)->required();
    s_gag->add_option("--alpha", alpha);
    with_out(s_gag);
    handlers.push_back({s_gag, [&](Run& r) {
                            r.input(fn);
                            const auto u = load_grid_function(fn);
                            const auto v = gagliardo(u, alpha);
                            r.emit({{"value", v.value}, {"error", v.error}, {"interior", v.interior}, {"exterior", v.exterior}, {"fft", v.fft}},
                                   {{"value", v.value}, {"error", v.error}});
                        }});

    auto* s_per = app.add_subcommand("perimeter", "fractional perimeter of a set");
    s_per->add_option("--set", set)->required();
    s_per->add_option("--alpha", alpha);
    s_per->add_option("--level", level, "raster level for set specs");
    with_out(s_per);
    handlers.push_back({s_per, [&](Run& r) {
                            r.input(set);
                            const bool file = std::filesystem::is_regular_file(set);
                            const GridFunction A = file ? load_grid_function(set) : rasterize(parse_set(set), level);
                            const double v = frac_perimeter(A, alpha);
                            r.emit({{"value", v}, {"level", A.level()}, {"alpha", alpha}}, {{"value", v}});
                        }});

    auto* s_dec = app.add_subcommand("decompose", "dyadic decomposition cost against the seminorm");
    s_dec->add_option("--fn", fn)->required();
    s_dec->add_option("--depth", depth);
    s_dec->add_option("--alpha", alpha);
    with_out(s_dec);
    handlers.push_back({s_dec, [&](Run& r) {
                            r.input(fn);
                            const auto c = equivalence_certificate(load_grid_function(fn), alpha, depth);
                            r.emit({{"gagliardo", c.gagliardo}, {"cost", c.cost}, {"ratio", detail::finite(c.ratio)},
                                    {"inverse", detail::finite(c.inverse)}, {"defined", c.defined}, {"terms", c.terms}},
                                   {{"ratio", detail::finite(c.ratio)}, {"gagliardo", c.gagliardo}, {"cost", c.cost}});
                        }});

    // ---- fractal sets ----
    auto* s_box = app.add_subcommand("boxdim", "box-counting dimension");
    s_box->add_option("--set", set)->required();
    s_box->add_option("--levels", levels, "k1..k2");
    s_box->add_flag("--region", region, "measure the set itself even when it carries a boundary curve");
    with_out(s_box);
    handlers.push_back({s_box, [&](Run& r) {
                            r.input(set);
                            const auto [k1, k2] = detail::parse_range(levels);
                            const auto A = parse_set(set);
                            // fractal domains are measured through their boundary curve
                            const auto b = box_dimension(A.has_boundary() && !region ? A.boundary() : A, k1, k2);
                            r.emit({{"slope", b.slope}, {"residual", b.residual}, {"levels", b.levels}, {"counts", b.counts}},
                                   {{"slope", b.slope}, {"residual", b.residual}});
                        }});

    auto* s_wh = app.add_subcommand("whitney", "Whitney decomposition and its fractional cost");
    s_wh->add_option("--set", set)->required();
    s_wh->add_option("--kmax", kmax);
    s_wh->add_option("--alpha", alpha);
    s_wh->add_option("--emit-decomposition", emit_dec, "write the parts T_k as chains");
    s_wh->add_flag("--exact", exact, "exact flat norms of the parts");
    with_out(s_wh);
    handlers.push_back({s_wh, [&](Run& r) {
                            r.input(set);
                            const auto wc = whitney_chain(parse_set(set), alpha, kmax, exact);
                            const auto& w = wc.whitney;
                            std::vector<std::int64_t> bound;
                            for (int k = 1; k <= w.kmax; ++k) bound.push_back(w.card_bound(k));
                            const json series = {{"terms", wc.series.terms}, {"partial", wc.series.partial}, {"ratio", wc.series.ratio},
                                                 {"converging", wc.series.converging}, {"tail", detail::finite(wc.series.tail)}};
                            const json measured = {{"k0", w.k0}, {"covered", w.covered}, {"ratio", wc.series.ratio},
                                                   {"converging", wc.series.converging}, {"residual_mass", wc.residual_mass}};
                            if (!emit_dec.empty()) {
                                json parts = json::array();
                                for (std::size_t i = 0; i < wc.dec.chains.size(); ++i) {
                                    const auto& p = wc.dec.parts[i];
                                    parts.push_back({{"k", w.k0 + int(i)}, {"mass", p.mass}, {"bmass", p.bmass}, {"flat", p.flat},
                                                     {"normal", p.normal}, {"chain", to_json(wc.dec.chains[i])}});
                                }
                                write_file(emit_dec, dump_json({{"alpha", alpha}, {"exact", wc.dec.exact}, {"parts", parts}}));
                                write_manifest(emit_dec, r.config(), r.inputs, measured);
                            }
                            r.emit({{"k0", w.k0}, {"kmax", w.kmax}, {"card", w.card}, {"card_bound", bound},
                                    {"boundary_cubes", w.boundary_cubes}, {"covered", w.covered}, {"cost", wc.cost},
                                    {"series", series}, {"raster_mass", wc.raster_mass}, {"residual_mass", wc.residual_mass}},
                                   measured);
                        }});

    // ---- Holder maps ----
    auto* s_hol = app.add_subcommand("holder", "Holder diagnostics and the mollified approximating sequence");
    s_hol->add_option("--fn", fn, "function spec")->required();
    s_hol->add_option("--samples", samples);
    s_hol->add_option("--nmax", nmax);
    with_out(s_hol);
    handlers.push_back({s_hol, [&](Run& r) {
                            const auto f = parse_function(fn);
                            const auto q = holder_quotient(f, std::size_t(std::max(samples, 1)), r.seed);
                            json steps = json::array();
                            bool ok = true;
                            for (int n = 0; n <= nmax; ++n) {
                                const auto s = approx_sequence(f, n);
                                ok = ok && s.ok();
                                steps.push_back({{"n", n}, {"sup_error", s.sup_error}, {"step", s.step}, {"lip", s.lip},
                                                 {"bound_sup", s.bound_sup}, {"bound_step", s.bound_step}, {"bound_lip", s.bound_lip},
                                                 {"ok", s.ok()}});
                            }
                            r.emit({{"name", f.name()}, {"gamma", f.gamma()}, {"declared_constant", f.lip()},
                                    {"max_quotient", q.max_quotient}, {"exponent", q.exponent}, {"approx", steps}},
                                   {{"max_quotient", q.max_quotient}, {"exponent", q.exponent}, {"approx_ok", ok}});
                        }});

    auto* s_push = app.add_subcommand("push", "Holder pushforward of a chain");
    s_push->add_option("--chain", chain)->required();
    s_push->add_option("--map", map)->required();
    s_push->add_option("--gamma", gamma, "Holder exponent (default: declared)");
    s_push->add_option("--alpha", push_alpha);
    s_push->add_option("--tol", tol);
    s_push->add_option("--nmax", nmax);
    s_push->add_flag("--top", top, "top-dimensional pushforward by the cone construction");
    with_out(s_push);
    handlers.push_back({s_push, [&](Run& r) {
                            r.input(chain);
                            const auto f = parse_function(map);
                            const double gm = gamma > 0 ? gamma : f.gamma();
                            const auto any = load_chain(chain);
                            if (top) {
                                if (!std::holds_alternative<CubicalChain>(any)) fail(ErrorKind::config, "--top needs a cubical chain");
                                const auto tp = top_pushforward(f, gm, std::get<CubicalChain>(any), push_alpha, nmax, tol);
                                r.emit({{"boundary", detail::run_json(tp.boundary_run)}, {"apex", fraccur::detail::point_to(tp.apex, 2)},
                                        {"boundary_gap", tp.boundary_gap}, {"chain", to_json(tp.chain)}},
                                       {{"ratio", detail::finite(tp.boundary_run.ratio)}, {"converged", tp.boundary_run.converged},
                                        {"boundary_gap", tp.boundary_gap}, {"mass", mass(tp.chain)}});
                                return;
                            }
                            const auto run = std::holds_alternative<CubicalChain>(any)
                                                 ? holder_pushforward(f, gm, std::get<CubicalChain>(any), push_alpha, nmax, tol)
                                                 : holder_pushforward(f, gm, std::get<SimplicialChain>(any), push_alpha, nmax, tol);
                            r.emit(detail::run_json(run), {{"ratio", detail::finite(run.ratio)}, {"tail", detail::finite(run.tail)},
                                                           {"converged", run.converged}, {"verdict", run.verdict}});
                        }});

    auto* s_deg = app.add_subcommand("degree", "Brouwer degree field of a planar map on a set");
    s_deg->add_option("--set", set)->required();
    s_deg->add_option("--map", map)->required();
    s_deg->add_option("--grid", grid, "cells per side");
    s_deg->add_option("--beta", beta, "regularity exponent of the W^{1-beta,1} check");
    s_deg->add_option("--box", box, "x0,y0,x1,y1 (default: around the image of the boundary)");
    s_deg->add_option("--u-level", u_level, "raster level of the set boundary");
    with_out(s_deg);
    handlers.push_back({s_deg, [&](Run& r) {
                            r.input(set);
                            if (!(beta > 0 && beta < 1)) fail(ErrorKind::precondition, "beta must lie in (0, 1)");
                            if (grid < 2 || grid > 4096) fail(ErrorKind::config, "--grid must lie in 2..4096");
                            const auto f = parse_function(map);
                            const auto U = parse_set(set);
                            double x0, y0, x1, y1;
                            if (box.empty()) {
                                const int l0 = 5;
                                const auto [a, b] = image_grid(f, U, l0, 1);
                                x0 = std::ldexp(double(a[0]), -l0), y0 = std::ldexp(double(a[1]), -l0);
                                x1 = std::ldexp(double(b[0]), -l0), y1 = std::ldexp(double(b[1]), -l0);
                            } else {
                                const auto v = detail::parse_list(box, 4, "--box");
                                x0 = v[0], y0 = v[1], x1 = v[2], y1 = v[3];
                            }
                            if (!(x1 > x0 && y1 > y0)) fail(ErrorKind::config, "empty degree box");
                            const double side = std::max(x1 - x0, y1 - y0);
                            const int L = int(std::floor(std::log2(double(grid) / side)));
                            Index lo{}, hi{};
                            lo[0] = std::int64_t(std::floor(std::ldexp(x0, L)));
                            lo[1] = std::int64_t(std::floor(std::ldexp(y0, L)));
                            hi[0] = lo[0] + grid;
                            hi[1] = lo[1] + grid;
                            const auto deg = degree_field(f, U, L, lo, hi, u_level);
                            const double reg = degree_regularity(deg.degree, beta);
                            std::string csv = "y1,y2,degree,flag\n";
                            const double h = dyadic(L);
                            double dmin = 0, dmax = 0;
                            for (std::size_t o = 0; o < deg.degree.size(); ++o) {
                                const auto c = deg.degree.cell_at(o);
                                csv += format_double((double(c[0]) + 0.5) * h) + "," + format_double((double(c[1]) + 0.5) * h) + "," +
                                       format_double(deg.degree[o]) + "," + (deg.flagged[o] != 0 ? "1" : "0") + "\n";
                                if (deg.flagged[o] == 0) {
                                    dmin = std::min(dmin, deg.degree[o]);
                                    dmax = std::max(dmax, deg.degree[o]);
                                }
                            }
                            r.emit_text(csv, {{"level", L}, {"lo", {lo[0], lo[1]}}, {"hi", {hi[0], hi[1]}}, {"flagged", deg.flagged_count()},
                                              {"tolerance", deg.tolerance}, {"beta", beta}, {"regularity", reg},
                                              {"min_degree", dmin}, {"max_degree", dmax}});
                        }});

    // ---- integration ----
    auto* s_young = app.add_subcommand("young", "Young integral of g0 dg1 on [0, 1]");
    s_young->add_option("--g0", g[0])->required();
    s_young->add_option("--g1", g[1])->required();
    s_young->add_option("--levels", young_level);
    s_young->add_option("--report", report)->check(CLI::IsMember({"json", "csv"}));
    with_out(s_young);
    handlers.push_back({s_young, [&](Run& r) {
                            const auto c = young_1d(parse_function(g[0]), parse_function(g[1]), young_level);
                            const json m = {{"value", c.value}, {"ratio", c.ratio}, {"tail", detail::finite(c.tail)}, {"cauchy", c.cauchy}};
                            if (report == "csv")
                                r.emit_text(detail::cauchy_csv(c), m);
                            else
                                r.emit(detail::cauchy_json(c), m);
                        }});

    auto* s_zust = app.add_subcommand("zust", "Zust integral of g0 dg1 ... dgd on [0, 1]^d");
    s_zust->add_option("--d", d)->check(CLI::Range(1, 3));
    for (int i = 0; i < 4; ++i) s_zust->add_option("--g" + std::to_string(i), g[i]);
    s_zust->add_option("--levels", zust_level);
    s_zust->add_option("--report", report)->check(CLI::IsMember({"json", "csv"}));
    with_out(s_zust);
    handlers.push_back({s_zust, [&](Run& r) {
                            std::vector<HolderFunction> gs;
                            for (int i = 0; i <= d; ++i) {
                                if (g[i].empty()) fail(ErrorKind::config, "--g" + std::to_string(i) + " is required when d = " + std::to_string(d));
                                auto f = parse_function(g[i]);
                                // constants given without a dimension live on R^d
                                if (f.in_dim() == 1 && d > 1 && g[i].rfind("const:", 0) == 0) f = parse_function(g[i] + ",d=" + std::to_string(d));
                                gs.push_back(f);
                            }
                            for (int i = d + 1; i < 4; ++i)
                                if (!g[i].empty()) fail(ErrorKind::config, "--g" + std::to_string(i) + " given for d = " + std::to_string(d));
                            const auto c = zust_integral(gs, zust_level);
                            const json m = {{"value", c.value}, {"ratio", c.ratio}, {"tail", detail::finite(c.tail)}, {"cauchy", c.cauchy}};
                            if (report == "csv")
                                r.emit_text(detail::cauchy_csv(c), m);
                            else
                                r.emit(detail::cauchy_json(c), m);
                        }});

    auto* s_wedge = app.add_subcommand("wedge", "wedge product of Holder forms evaluated on a chain");
    s_wedge->add_option("--omega", omega)->required();
    s_wedge->add_option("--eta", eta)->required();
    s_wedge->add_option("--chain", chain)->required();
    s_wedge->add_option("--nmax", wedge_nmax);
    s_wedge->add_option("--tol", wedge_tol);
    with_out(s_wedge);
    handlers.push_back({s_wedge, [&](Run& r) {
                            r.input(omega);
                            r.input(eta);
                            r.input(chain);
                            const auto any = load_chain(chain);
                            if (!std::holds_alternative<CubicalChain>(any)) fail(ErrorKind::config, "wedge needs a cubical chain");
                            const auto s = wedge_eval(load_form(omega), load_form(eta), std::get<CubicalChain>(any), wedge_nmax, wedge_tol);
                            r.emit({{"omega", s.omega}, {"eta", s.eta}, {"alpha", s.alpha}, {"beta", s.beta}, {"terms", s.terms},
                                    {"partial", s.partial}, {"truncation", s.truncation}, {"envelope", s.envelope}, {"tail", s.tail},
                                    {"value", s.value}},
                                   {{"value", s.value}, {"tail", s.tail}, {"envelope", s.envelope}});
                        }});

    // ---- plumbing ----
    auto* s_self = app.add_subcommand("selftest", "run the built-in example suite");
    handlers.push_back({s_self, [&](Run& r) {
                            int failed = 0;
                            for (auto& c : detail::selftest_checks()) {
                                bool ok = false;
                                std::string why;
                                try {
                                    ok = c.ok();
                                } catch (const std::exception& e) {
                                    why = std::string(" (") + e.what() + ")";
                                }
                                *r.os << (ok ? "PASS " : "FAIL ") << c.name << why << "\n";
                                failed += !ok;
                            }
                            if (failed) fail(ErrorKind::numeric, std::to_string(failed) + " self-test checks failed");
                        }});

    auto* s_corpus = app.add_subcommand("corpus", "write the built-in test objects");
    s_corpus->add_option("--dir", dir)->required();
    handlers.push_back({s_corpus, [&](Run& r) {
                            const auto index = detail::write_corpus(dir, r);
                            *r.os << "wrote " << index.size() << " objects to " << dir << "\n";
                        }});

    auto* s_rerun = app.add_subcommand("rerun", "re-execute a run from its manifest and compare output hashes");
    s_rerun->add_option("--manifest", manifest)->required();
    handlers.push_back({s_rerun, [&](Run& r) {
                            const json m = read_json(manifest);
                            std::vector<std::string> args{"fraccur"};
                            for (auto& a : fraccur::detail::field<std::vector<std::string>>(m.at("config"), "args", manifest)) args.push_back(a);
                            if (args.size() > 1 && args[1] == "rerun") fail(ErrorKind::config, "manifest describes a rerun");
                            std::ostringstream sink;
                            const int code = run(args, sink, es);
                            if (code != 0) fail(ErrorKind::numeric, "re-executed run exited with " + std::to_string(code));
                            const auto outp = std::filesystem::path(manifest).parent_path() / m.at("output").at("path").get<std::string>();
                            const auto now = sha256_file(outp.string());
                            const auto then = m.at("output").at("sha256").get<std::string>();
                            *r.os << (now == then ? "reproduced " : "DIFFERS ") << outp.string() << " " << now << "\n";
                            if (now != then) fail(ErrorKind::numeric, "output hash differs from the manifest");
                        }});

    std::vector<const char*> cargv;
    for (auto& a : argv) cargv.push_back(a.c_str());
    try {
        app.parse(int(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, os, es);
        return code == 0 ? 0 : exit_code(ErrorKind::config);
    }

    Run r;
    r.seed = seed;
    r.out = out;
    r.os = &os;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        if (argv[i] == "--threads") {
            ++i;
            continue;
        }
        if (argv[i].rfind("--threads=", 0) == 0) continue;
        r.args.push_back(argv[i]);
    }
    ParallelContext::set_global_threads(threads);
    try {
        for (auto& [sub, h] : handlers)
            if (sub->parsed()) {
                r.sub = sub->get_name();
                h(r);
            }
    } catch (const Error& e) {
        es << "fraccur: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        es << "fraccur: internal error: " << e.what() << "\n";
        return exit_code(ErrorKind::internal);
    }
    return 0;
}

} // namespace fraccur::cli
