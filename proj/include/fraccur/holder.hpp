#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "grid.hpp"
#include "parallel.hpp"
#include "sobolev.hpp"

namespace fraccur {

// Portable uniform in [0, 1) from a 64-bit engine.
inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double gaussian(std::mt19937_64& rng) {
    const double u = 1.0 - uniform01(rng), v = uniform01(rng);
    return std::sqrt(-2 * std::log(u)) * std::cos(2 * std::numbers::pi * v);
}

inline double box_diameter(const Box& b, int d) { return dist(b.lo, b.hi, d); }

// A map R^n -> R^n' with a declared Hoelder exponent and constant on a domain box.
// Global maps are evaluated as given everywhere; the others are extended off the
// box by a componentwise inf-convolution.
class HolderFunction {
public:
    using Eval = std::function<Point(const Point&)>;

    HolderFunction() = default;
    HolderFunction(int in, int out, double gamma, double lip, const Box& domain, Eval f, std::string name,
                   bool global = true)
        : in_(in), out_(out), gamma_(gamma), lip_(lip), domain_(domain), f_(std::move(f)), name_(std::move(name)),
          global_(global) {
        require(in >= 1 && in <= kMaxDim && out >= 1 && out <= kMaxDim, "function dimensions out of range");
        if (!(gamma > 0 && gamma <= 1)) fail(ErrorKind::precondition, "Hoelder exponent must lie in (0, 1]");
        require(lip >= 0 && std::isfinite(lip), "Hoelder constant must be finite and nonnegative");
        for (int i = 0; i < in; ++i) require(domain.lo[i] <= domain.hi[i], "empty function domain");
    }

    int in_dim() const { return in_; }
    int out_dim() const { return out_; }
    double gamma() const { return gamma_; }
    double lip() const { return lip_; }
    const Box& domain() const { return domain_; }
    const std::string& name() const { return name_; }
    bool global() const { return global_; }
    bool valid() const { return bool(f_); }

    bool in_domain(const Point& x) const {
        for (int i = 0; i < in_; ++i)
            if (x[i] < domain_.lo[i] || x[i] > domain_.hi[i]) return false;
        return true;
    }

    Point operator()(const Point& x) const {
        if (global_ || in_domain(x)) return f_(x);
        return extend(x);
    }
    double operator()(double t) const { return (*this)(make_point({t}))[0]; }

    HolderFunction component(int i) const {
        require(i >= 0 && i < out_, "component out of range");
        auto f = f_;
        return HolderFunction(in_, 1, gamma_, lip_, domain_, [f, i](const Point& x) { return make_point({f(x)[i]}); },
                              name_ + "[" + std::to_string(i) + "]", global_);
    }

    HolderFunction with_domain(const Box& b) const {
        HolderFunction g = *this;
        g.domain_ = b;
        return g;
    }

private:
    // f^(x) = inf_y f(y) + L |x - y|^gamma per component, over box samples near the
    // projection of x.
    Point extend(const Point& x) const {
        Point p{};
        double dx = 0;
        for (int i = 0; i < in_; ++i) {
            p[i] = std::clamp(x[i], domain_.lo[i], domain_.hi[i]);
            dx += (x[i] - p[i]) * (x[i] - p[i]);
        }
        dx = std::sqrt(dx);
        const double hk = std::max(box_diameter(domain_, in_), 1e-300) / 256;
        const double r = 4 * dx + hk;
        Point best{};
        for (int c = 0; c < out_; ++c) best[c] = INFINITY;
        auto visit = [&](const Point& y) {
            const Point fy = f_(y);
            const double cone = lip_ * std::pow(dist(x, y, in_), gamma_);
            for (int c = 0; c < out_; ++c) best[c] = std::min(best[c], fy[c] + cone);
        };
        visit(p);
        Index lo{}, hi{};
        for (int i = 0; i < in_; ++i) {
            lo[i] = std::int64_t(std::ceil((std::max(p[i] - r, domain_.lo[i]) - domain_.lo[i]) / hk));
            hi[i] = std::int64_t(std::floor((std::min(p[i] + r, domain_.hi[i]) - domain_.lo[i]) / hk));
        }
        detail::for_each_index(in_, lo, hi, [&](const Index& c) {
            Point y{};
            for (int i = 0; i < in_; ++i) y[i] = domain_.lo[i] + double(c[i]) * hk;
            visit(y);
        });
        return best;
    }

    int in_ = 1, out_ = 1;
    double gamma_ = 1, lip_ = 0;
    Box domain_{};
    Eval f_;
    std::string name_;
    bool global_ = true;
};

inline Box unit_box(int d) {
    Box b;
    for (int i = 0; i < d; ++i) b.hi[i] = 1;
    return b;
}

// sup over delta of sum_n c_n min(2 A_n, w_n delta) / delta^gamma for a lacunary
// cosine series with amplitudes A_n and frequencies w_n. The sup is taken on a
// log grid and inflated by the grid step, which makes it an upper bound.
inline double lacunary_holder_constant(const std::vector<double>& amp, const std::vector<double>& freq, double gamma) {
    const int per_octave = 16;
    double best = 0;
    for (int j = -64 * per_octave; j <= 8 * per_octave; ++j) {
        const double delta = std::exp2(double(j) / per_octave);
        double s = 0;
        for (std::size_t n = 0; n < amp.size(); ++n) s += std::min(2 * std::abs(amp[n]), std::abs(amp[n]) * freq[n] * delta);
        best = std::max(best, s / std::pow(delta, gamma));
    }
    return best * std::exp2(gamma / per_octave);
}

// W(t) = sum_{n < terms} b^{-na} cos(b^n pi t + phase).
inline HolderFunction weierstrass(double a, int terms = 20, double b = 2, double phase = 0) {
    if (!(a > 0 && a < 1)) fail(ErrorKind::precondition, "weierstrass needs 0 < a < 1");
    require(terms >= 1 && terms <= 60, "weierstrass terms out of range");
    require(b >= 2, "weierstrass lacunarity must be at least 2");
    std::vector<double> amp, freq;
    for (int n = 0; n < terms; ++n) {
        amp.push_back(std::pow(b, -n * a));
        freq.push_back(std::pow(b, n) * std::numbers::pi);
    }
    const double L = lacunary_holder_constant(amp, freq, a);
    std::ostringstream name;
    name << "weierstrass:a=" << a << ",terms=" << terms;
    if (phase != 0) name << ",phase=" << phase;
    return HolderFunction(
        1, 1, a, L, unit_box(1),
        [amp, freq, phase](const Point& x) {
            double s = 0;
            for (std::size_t n = 0; n < amp.size(); ++n) s += amp[n] * std::cos(freq[n] * x[0] + phase);
            return make_point({s});
        },
        name.str());
}

// T(t) = sum_{n < terms} 2^-n dist(2^n t, Z); one term is the triangle wave.
inline HolderFunction takagi(int terms = 16) {
    require(terms >= 1 && terms <= 50, "takagi terms out of range");
    const double g = 0.99;
    // |dist(2^n s, Z) - dist(2^n t, Z)| <= min(1/2, 2^n |s - t|)
    double L = 0;
    for (int j = -64 * 16; j <= 0; ++j) {
        const double delta = std::exp2(j / 16.0);
        double s = 0;
        for (int n = 0; n < terms; ++n) s += std::exp2(-n) * std::min(0.5, std::exp2(n) * delta);
        L = std::max(L, s / std::pow(delta, g));
    }
    L *= std::exp2(g / 16);
    return HolderFunction(
        1, 1, g, L, unit_box(1),
        [terms](const Point& x) {
            double s = 0;
            for (int n = 0; n < terms; ++n) {
                const double y = std::ldexp(x[0], n);
                s += std::ldexp(std::abs(y - std::nearbyint(y)), -n);
            }
            return make_point({s});
        },
        "takagi:terms=" + std::to_string(terms));
}

namespace detail {

// Piecewise linear interpolation of samples at t0 + i h.
struct Samples1d {
    double t0 = 0, h = 1;
    std::vector<double> v;
    double operator()(double t) const {
        const double s = (t - t0) / h;
        if (s <= 0) return v.front();
        const auto i = std::size_t(s);
        if (i + 1 >= v.size()) return v.back();
        const double f = s - double(i);
        return v[i] + f * (v[i + 1] - v[i]);
    }
};

// Largest |v_i - v_j| / |t_i - t_j|^gamma over all pairs at dyadic separations.
inline double dyadic_quotient(const Samples1d& s, double gamma) {
    double q = 0;
    for (std::size_t step = 1; step < s.v.size(); step *= 2) {
        const double den = std::pow(double(step) * s.h, gamma);
        for (std::size_t i = 0; i + step < s.v.size(); ++i) q = std::max(q, std::abs(s.v[i + step] - s.v[i]) / den);
    }
    return q;
}

} // namespace detail

// Seeded midpoint displacement on [0, 1] with Hurst-like parameter h at 2^levels
// intervals, linearly interpolated.
inline HolderFunction fbm_like(double h, std::uint64_t seed, int levels = 14) {
    if (!(h > 0.01 && h < 1)) fail(ErrorKind::precondition, "fbm_like needs 0.01 < h < 1");
    require(levels >= 2 && levels <= 22, "fbm_like levels out of range");
    std::mt19937_64 rng(seed);
    const std::size_t n = (std::size_t(1) << levels) + 1;
    auto s = std::make_shared<detail::Samples1d>();
    s->h = std::ldexp(1.0, -levels);
    s->v.assign(n, 0.0);
    s->v[n - 1] = gaussian(rng);
    for (int j = 1; j <= levels; ++j) {
        const std::size_t half = std::size_t(1) << (levels - j);
        const double sigma = std::exp2(-j * h) * std::sqrt(1 - std::exp2(2 * h - 2));
        for (std::size_t i = half; i < n; i += 2 * half) s->v[i] = 0.5 * (s->v[i - half] + s->v[i + half]) + sigma * gaussian(rng);
    }
    const double gamma = h - 0.01;
    // dyadic separations only; the factor 2 covers the others
    const double L = 2 * detail::dyadic_quotient(*s, gamma);
    std::ostringstream name;
    name << "fbm:h=" << h << ",seed=" << seed;
    return HolderFunction(
        1, 1, gamma, L, unit_box(1), [s](const Point& x) { return make_point({(*s)(x[0])}); }, name.str(), false);
}

// Samples (t_i, v_i) on a uniform grid, linearly interpolated, with a declared exponent.
inline HolderFunction sampled_function(std::vector<double> t, std::vector<double> v, double gamma, std::string name = "sampled") {
    require(t.size() == v.size() && t.size() >= 2, "sampled function needs at least two samples");
    auto s = std::make_shared<detail::Samples1d>();
    s->t0 = t.front();
    s->h = (t.back() - t.front()) / double(t.size() - 1);
    require(s->h > 0, "sample abscissae must increase");
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(t[i] - (s->t0 + double(i) * s->h)) > 1e-9 * std::max(1.0, std::abs(t[i])))
            fail(ErrorKind::config, "sampled function needs uniformly spaced abscissae");
    for (double x : v) require(std::isfinite(x), "sampled function values must be finite");
    s->v = std::move(v);
    const double L = 2 * detail::dyadic_quotient(*s, gamma);
    Box b;
    b.lo[0] = t.front();
    b.hi[0] = t.back();
    return HolderFunction(1, 1, gamma, L, b, [s](const Point& x) { return make_point({(*s)(x[0])}); }, std::move(name), false);
}

inline HolderFunction load_csv_function(const std::string& path, double gamma) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::vector<double> t, v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a >> b)) {
            if (t.empty()) continue; // header
            fail(ErrorKind::config, "malformed line in " + path);
        }
        t.push_back(a);
        v.push_back(b);
    }
    return sampled_function(std::move(t), std::move(v), gamma, "csv:" + path);
}

// t^a on [0, 1].
inline HolderFunction power_function(double a) {
    require(a > 0, "power exponent must be positive");
    const double g = std::min(a, 1.0), L = std::max(a, 1.0);
    return HolderFunction(
        1, 1, g, L, unit_box(1), [a](const Point& x) { return make_point({std::pow(std::max(x[0], 0.0), a)}); },
        "power:a=" + std::to_string(a), false);
}

inline double operator_norm(const std::vector<std::vector<double>>& A) {
    if (A.empty()) return 0;
    Eigen::MatrixXd M(A.size(), A[0].size());
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < A[i].size(); ++j) M(Eigen::Index(i), Eigen::Index(j)) = A[i][j];
    return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

// x -> A x + b with A given by rows.
inline HolderFunction affine(const std::vector<std::vector<double>>& A, const Point& b, const Box& domain) {
    require(!A.empty(), "affine map needs a matrix");
    const int out = int(A.size()), in = int(A[0].size());
    for (auto& r : A) require(int(r.size()) == in, "affine matrix rows must have equal length");
    return HolderFunction(
        in, out, 1.0, operator_norm(A), domain,
        [A, b, in, out](const Point& x) {
            Point y{};
            for (int i = 0; i < out; ++i) {
                y[i] = b[i];
                for (int j = 0; j < in; ++j) y[i] += A[std::size_t(i)][std::size_t(j)] * x[j];
            }
            return y;
        },
        "affine");
}

inline HolderFunction identity_map(int d) {
    return HolderFunction(d, d, 1.0, 1.0, unit_box(d), [d](const Point& x) {
        Point y{};
        for (int i = 0; i < d; ++i) y[i] = x[i];
        return y;
    }, "identity");
}

inline HolderFunction constant_map(double c, int in = 1) {
    return HolderFunction(in, 1, 1.0, 0.0, unit_box(in), [c](const Point&) { return make_point({c}); },
                          "const:" + std::to_string(c));
}

// x -> x_i on R^d.
inline HolderFunction coordinate(int i, int d) {
    require(i >= 0 && i < d, "coordinate index out of range");
    return HolderFunction(d, 1, 1.0, 1.0, unit_box(d), [i](const Point& x) { return make_point({x[i]}); },
                          "coord:" + std::to_string(i));
}

// g(x_axis) on R^d for a scalar function g of one variable.
inline HolderFunction lift(const HolderFunction& g, int axis, int d) {
    require(g.in_dim() == 1 && g.out_dim() == 1, "lift needs a scalar function of one variable");
    require(axis >= 0 && axis < d, "lift axis out of range");
    Box b = unit_box(d);
    b.lo[axis] = g.domain().lo[0];
    b.hi[axis] = g.domain().hi[0];
    return HolderFunction(d, 1, g.gamma(), g.lip(), b, [g, axis](const Point& x) { return make_point({g(x[axis])}); },
                          g.name() + "@x" + std::to_string(axis));
}

// sum_i c_i f_i for maps sharing dimensions; exponent min gamma_i, constant
// sum |c_i| L_i diam^(gamma_i - gamma).
inline HolderFunction linear_combination(const std::vector<std::pair<double, HolderFunction>>& terms) {
    require(!terms.empty(), "empty linear combination");
    const int in = terms[0].second.in_dim(), out = terms[0].second.out_dim();
    double g = 1;
    bool global = true;
    Box dom = terms[0].second.domain();
    for (auto& [c, f] : terms) {
        require(f.in_dim() == in && f.out_dim() == out, "linear combination of maps with different dimensions");
        g = std::min(g, f.gamma());
        global = global && f.global();
        for (int i = 0; i < in; ++i) {
            dom.lo[i] = std::max(dom.lo[i], f.domain().lo[i]);
            dom.hi[i] = std::min(dom.hi[i], f.domain().hi[i]);
        }
    }
    const double diam = std::max(box_diameter(dom, in), 1.0);
    double L = 0;
    std::string name;
    for (auto& [c, f] : terms) {
        L += std::abs(c) * f.lip() * std::pow(diam, f.gamma() - g);
        name += (name.empty() ? "" : "+") + std::to_string(c) + "*" + f.name();
    }
    return HolderFunction(
        in, out, g, L, dom,
        [terms, out](const Point& x) {
            Point y{};
            for (auto& [c, f] : terms) {
                const Point fx = f(x);
                for (int i = 0; i < out; ++i) y[i] += c * fx[i];
            }
            return y;
        },
        name, global);
}

// Stack scalar maps of the same variables into one vector map.
inline HolderFunction stack(const std::vector<HolderFunction>& comps) {
    require(!comps.empty() && int(comps.size()) <= kMaxDim, "stack needs 1..4 components");
    const int in = comps[0].in_dim();
    double g = 1, L2 = 0;
    bool global = true;
    Box dom = comps[0].domain();
    for (auto& f : comps) {
        require(f.in_dim() == in && f.out_dim() == 1, "stack needs scalar maps of the same variables");
        g = std::min(g, f.gamma());
        global = global && f.global();
    }
    const double diam = std::max(box_diameter(dom, in), 1.0);
    std::string name = "stack(";
    for (auto& f : comps) {
        L2 += std::pow(f.lip() * std::pow(diam, f.gamma() - g), 2);
        name += f.name() + ";";
    }
    name.back() = ')';
    return HolderFunction(
        in, int(comps.size()), g, std::sqrt(L2), dom,
        [comps](const Point& x) {
            Point y{};
            for (std::size_t i = 0; i < comps.size(); ++i) y[i] = comps[i](x)[0];
            return y;
        },
        name, global);
}

// t -> (t, g(t)).
inline HolderFunction graph_curve(const HolderFunction& g) {
    return stack({coordinate(0, 1), g}).with_domain(g.domain());
}

// x -> x + amp (W(x_1), W(x_2)) on the unit square.
inline HolderFunction perturbed_identity(const HolderFunction& w, double amp) {
    return stack({linear_combination({{1.0, coordinate(0, 2)}, {amp, lift(w, 0, 2)}}),
                  linear_combination({{1.0, coordinate(1, 2)}, {amp, lift(w, 1, 2)}})});
}

// z -> z^2 on R^2 = C, Lipschitz on [-1, 1]^2.
inline HolderFunction zsquare() {
    Box b;
    b.lo = make_point({-1, -1});
    b.hi = make_point({1, 1});
    return HolderFunction(2, 2, 1.0, 2 * std::sqrt(2.0), b,
                          [](const Point& x) { return make_point({x[0] * x[0] - x[1] * x[1], 2 * x[0] * x[1]}); }, "zsquare");
}

namespace detail {

inline std::map<std::string, std::string> parse_params(const std::string& s) {
    std::map<std::string, std::string> out;
    std::istringstream in(s);
    std::string kv;
    while (std::getline(in, kv, ',')) {
        if (kv.empty()) continue;
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorKind::config, "expected key=value in '" + kv + "'");
        out[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return out;
}

inline double num(const std::map<std::string, std::string>& p, const std::string& k, double def) {
    auto it = p.find(k);
    if (it == p.end()) return def;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(k);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::config, "bad number for " + k + ": " + it->second);
    }
}

} // namespace detail

// Function spec mini-language, e.g. "weierstrass:a=0.6,terms=20", "takagi:terms=16",
// "fbm:h=0.7,seed=42", "csv:path,gamma=0.5", "const:1", "power:a=2", "graph:a=0.8",
// "weierstrass2d:a=0.8,amp=0.1", "shear:a=0.8,amp=0.2", "zsquare", "identity:d=2",
// "coord:i=0,d=2", "lift:a=0.8,axis=1,d=2" (a Weierstrass function of one coordinate).
inline HolderFunction parse_function(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "csv") {
        const auto comma = rest.find(',');
        const auto p = detail::parse_params(comma == std::string::npos ? "" : rest.substr(comma + 1));
        return load_csv_function(rest.substr(0, comma), detail::num(p, "gamma", 1.0));
    }
    if (kind == "const") {
        // "const:1", "const:1,d=2" or "const:c=1,d=2"
        std::string params = rest;
        const auto comma = rest.find(',');
        if (rest.substr(0, comma).find('=') == std::string::npos)
            params = "c=" + rest;
        const auto p = detail::parse_params(params);
        return constant_map(detail::num(p, "c", 0), int(detail::num(p, "d", 1)));
    }
    const auto p = detail::parse_params(rest);
    auto W = [&] {
        return weierstrass(detail::num(p, "a", 0.5), int(detail::num(p, "terms", 20)), detail::num(p, "b", 2),
                           detail::num(p, "phase", 0));
    };
    if (kind == "weierstrass") return W();
    if (kind == "takagi") return takagi(int(detail::num(p, "terms", 16)));
    if (kind == "fbm") return fbm_like(detail::num(p, "h", 0.5), std::uint64_t(detail::num(p, "seed", 0)), int(detail::num(p, "levels", 14)));
    if (kind == "power") return power_function(detail::num(p, "a", 1));
    if (kind == "graph") return graph_curve(W());
    if (kind == "weierstrass2d") return perturbed_identity(W(), detail::num(p, "amp", 0.1));
    if (kind == "shear") return linear_combination({{1.0, coordinate(0, 2)}, {detail::num(p, "amp", 0.2), lift(W(), 1, 2)}});
    if (kind == "zsquare") return zsquare();
    if (kind == "identity") return identity_map(int(detail::num(p, "d", 2)));
    if (kind == "lift") return lift(W(), int(detail::num(p, "axis", 0)), int(detail::num(p, "d", 2)));
    if (kind == "coord") return coordinate(int(detail::num(p, "i", 0)), int(detail::num(p, "d", 2)));
    fail(ErrorKind::config, "unknown function kind: " + kind);
}

// The even bump c exp(-1/(1 - |x|^2)) on the unit ball of R^d, normalized.
class Mollifier {
public:
    explicit Mollifier(int d) : d_(d) {
        require(d >= 1 && d <= 3, "mollifier dimension out of range");
        boost::math::quadrature::tanh_sinh<double> ts;
        auto prof = [&](double r) { return r < 1 ? std::pow(r, d - 1) * std::exp(-1 / (1 - r * r)) : 0.0; };
        const double radial = ts.integrate(prof, 0.0, 1.0, 1e-15);
        const double sphere = d == 1 ? 2.0 : d == 2 ? 2 * std::numbers::pi : 4 * std::numbers::pi;
        c_ = 1 / (sphere * radial);
    }
    int dim() const { return d_; }
    double scale() const { return c_; }
    double operator()(const Point& z) const {
        double r2 = 0;
        for (int i = 0; i < d_; ++i) r2 += z[i] * z[i];
        return r2 < 1 ? c_ * std::exp(-1 / (1 - r2)) : 0.0;
    }
    Point gradient(const Point& z) const {
        double r2 = 0;
        for (int i = 0; i < d_; ++i) r2 += z[i] * z[i];
        Point g{};
        if (r2 >= 1) return g;
        const double s = 1 - r2, v = c_ * std::exp(-1 / s) * (-2 / (s * s));
        for (int i = 0; i < d_; ++i) g[i] = v * z[i];
        return g;
    }

private:
    int d_;
    double c_ = 1;
};

// f * Phi_eps, discretized on the fixed lattice h Z^d with h = eps / q. The lattice
// sum is taken as a kernel-weighted local linear fit at x rather than a plain
// weighted mean, so constants and affine maps come back exactly (to rounding) and
// the result is still a smooth function of x.
class Mollified {
public:
    static int default_q(int d) { return d == 1 ? 16 : d == 2 ? 8 : 6; }

    Mollified(HolderFunction f, double eps, int q = 0) : f_(std::move(f)), phi_(f_.in_dim()), eps_(eps), q_(q) {
        if (!(eps > 0 && eps <= 1)) fail(ErrorKind::precondition, "mollification scale must lie in (0, 1]");
        if (q_ == 0) q_ = default_q(f_.in_dim());
        require(q_ >= 4, "mollifier lattice too coarse");
        h_ = eps / q_;
    }

    // Tabulate f on the lattice points the box needs, when that is at most
    // `max_points` points.
    bool prepare(const Box& b, std::size_t max_points = std::size_t(1) << 22) {
        const int d = f_.in_dim();
        std::size_t total = 1;
        for (int i = 0; i < d; ++i) {
            clo_[i] = std::int64_t(std::floor((b.lo[i] - eps_) / h_));
            cn_[i] = std::int64_t(std::ceil((b.hi[i] + eps_) / h_)) - clo_[i] + 1;
            total *= std::size_t(cn_[i]);
            if (total > max_points) return false;
        }
        auto cache = std::make_shared<std::vector<Point>>(total);
        parallel_for(total, [&](std::size_t o) {
            Point y{};
            std::size_t rest = o;
            for (int i = 0; i < d; ++i) {
                y[i] = double(clo_[i] + std::int64_t(rest % std::size_t(cn_[i]))) * h_;
                rest /= std::size_t(cn_[i]);
            }
            (*cache)[o] = f_(y);
        });
        cache_ = std::move(cache);
        return true;
    }

    const HolderFunction& base() const { return f_; }
    double eps() const { return eps_; }

    // Value and Jacobian (jac[i][j] = d f_i / d x_j) at x.
    //
    // With u = (y - x) / eps and v = (1, u), the fit solves G theta_k = r_k for
    // G = sum w v v^T, r_k = sum w f_k(y) v and returns theta_k[0]. Differentiating
    // that system gives the Jacobian.
    void eval(const Point& x, Point& val, std::array<Point, kMaxDim>* jac = nullptr) const {
        constexpr int N = kMaxDim + 1;
        using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, N, N>;
        using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, N, 1>;
        const int d = f_.in_dim(), m = f_.out_dim(), n = d + 1;
        Index lo{}, hi{};
        for (int i = 0; i < d; ++i) {
            lo[i] = std::int64_t(std::floor((x[i] - eps_) / h_)) + 1;
            hi[i] = std::int64_t(std::ceil((x[i] + eps_) / h_)) - 1;
        }
        // lower triangles of G and H[l]; r[k] and R[k][l] as rows
        double G[N][N] = {}, r[kMaxDim][N] = {}, H[kMaxDim][N][N] = {}, R[kMaxDim][kMaxDim][N] = {};
        double v[N];
        v[0] = 1;
        const double c0 = phi_.scale();
        Index c = lo;
        for (;;) {
            Point y{};
            double r2 = 0;
            for (int i = 0; i < d; ++i) {
                y[i] = double(c[i]) * h_;
                const double z = (x[i] - y[i]) / eps_;
                v[i + 1] = -z;
                r2 += z * z;
            }
            if (r2 < 1) {
                const double sden = 1 - r2, w = c0 * std::exp(-1 / sden);
                const Point fy = lookup(c, y);
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b <= a; ++b) G[a][b] += w * v[a] * v[b];
                for (int k = 0; k < m; ++k)
                    for (int a = 0; a < n; ++a) r[k][a] += w * fy[k] * v[a];
                if (jac) {
                    // grad of Phi at z is -2 Phi z / (1 - |z|^2)^2, and z = -v
                    const double gs = 2 * w / (sden * sden) / eps_;
                    for (int l = 0; l < d; ++l) {
                        const double dw = gs * v[l + 1];
                        for (int a = 0; a < n; ++a)
                            for (int b = 0; b <= a; ++b) H[l][a][b] += dw * v[a] * v[b];
                        for (int k = 0; k < m; ++k)
                            for (int a = 0; a < n; ++a) R[k][l][a] += dw * fy[k] * v[a];
                    }
                }
            }
            int i = 0;
            for (; i < d; ++i) {
                if (c[i] < hi[i]) {
                    ++c[i];
                    break;
                }
                c[i] = lo[i];
            }
            if (i == d) break;
        }
        if (!(G[0][0] > 0)) fail(ErrorKind::internal, "empty mollifier stencil");
        Mat Gm(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b <= a; ++b) Gm(a, b) = Gm(b, a) = G[a][b];
        const Eigen::LDLT<Mat> ldlt(Gm);
        if (ldlt.info() != Eigen::Success) fail(ErrorKind::internal, "singular mollifier moments");
        std::array<Vec, kMaxDim> theta;
        for (int k = 0; k < m; ++k) {
            theta[k] = ldlt.solve(Eigen::Map<const Vec>(r[k], n));
            val[k] = theta[k][0];
        }
        for (int k = m; k < kMaxDim; ++k) val[k] = 0;
        if (!jac) return;
        // d v / d x_l = -e_{l+1} / eps, so dG picks up -(e s^T + s e^T) / eps with s = G e_0
        const Vec s = Gm.col(0);
        for (int l = 0; l < d; ++l) {
            Mat dG(n, n);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b <= a; ++b) dG(a, b) = dG(b, a) = H[l][a][b];
            dG.col(l + 1) -= s / eps_;
            dG.row(l + 1) -= s.transpose() / eps_;
            for (int k = 0; k < m; ++k) {
                Vec dr = Eigen::Map<const Vec>(R[k][l], n);
                dr[l + 1] -= r[k][0] / eps_;
                (*jac)[k][l] = ldlt.solve(dr - dG * theta[k])[0];
            }
        }
    }

    Point operator()(const Point& x) const {
        Point v{};
        eval(x, v);
        return v;
    }

    std::array<Point, kMaxDim> jacobian(const Point& x) const {
        Point v{};
        std::array<Point, kMaxDim> J{};
        eval(x, v, &J);
        return J;
    }

    // The smooth map as a Lipschitz HolderFunction with the given constant.
    HolderFunction as_function(double lip) const {
        auto self = std::make_shared<Mollified>(*this);
        std::ostringstream name;
        name << f_.name() << "*phi(" << eps_ << ")";
        return HolderFunction(f_.in_dim(), f_.out_dim(), 1.0, lip, f_.domain(), [self](const Point& x) { return (*self)(x); },
                              name.str());
    }

private:
    Point lookup(const Index& c, const Point& y) const {
        if (cache_) {
            std::size_t o = 0, stride = 1;
            bool in = true;
            for (int i = 0; i < f_.in_dim() && in; ++i) {
                const std::int64_t k = c[i] - clo_[i];
                in = k >= 0 && k < cn_[i];
                o += std::size_t(k) * stride;
                stride *= std::size_t(cn_[i]);
            }
            if (in) return (*cache_)[o];
        }
        return f_(y);
    }

    HolderFunction f_;
    Mollifier phi_;
    double eps_;
    int q_;
    double h_ = 0;
    Index clo_{}, cn_{};
    std::shared_ptr<const std::vector<Point>> cache_;
};

inline double jacobian_norm(const std::array<Point, kMaxDim>& J, int out, int in) {
    std::vector<std::vector<double>> A(static_cast<std::size_t>(out), std::vector<double>(static_cast<std::size_t>(in)));
    for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) A[std::size_t(i)][std::size_t(j)] = J[i][j];
    return operator_norm(A);
}

struct MollifiedSamples {
    GridFunction value;
    std::vector<GridFunction> gradient; // one per input axis
};

// Samples of component `comp` of f * Phi_eps and its gradient at the cell centres of
// the level-L grid over the domain box.
inline MollifiedSamples mollify(const HolderFunction& f, double eps, int level, int comp = 0) {
    require(comp >= 0 && comp < f.out_dim(), "component out of range");
    const int d = f.in_dim();
    require(d <= 3, "mollify is implemented for d <= 3");
    Mollified m(f, eps);
    m.prepare(f.domain());
    Index lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        lo[i] = std::int64_t(std::floor(std::ldexp(f.domain().lo[i], level)));
        hi[i] = std::int64_t(std::ceil(std::ldexp(f.domain().hi[i], level)));
        if (hi[i] == lo[i]) ++hi[i];
    }
    MollifiedSamples out{GridFunction(d, level, lo, hi), {}};
    for (int j = 0; j < d; ++j) out.gradient.push_back(GridFunction(d, level, lo, hi));
    const double hc = dyadic(level);
    parallel_for(out.value.size(), [&](std::size_t o) {
        const Index c = out.value.cell_at(o);
        Point x{}, v{};
        for (int i = 0; i < d; ++i) x[i] = (double(c[i]) + 0.5) * hc;
        std::array<Point, kMaxDim> J{};
        m.eval(x, v, &J);
        out.value[o] = v[comp];
        for (int j = 0; j < d; ++j) out.gradient[std::size_t(j)][o] = J[comp][j];
    });
    return out;
}

// Convolution of a piecewise constant grid function with Phi_eps, sampled at the
// cell centres, with its gradient. The quadrature uses the cell centres.
inline MollifiedSamples mollify(const GridFunction& u, double eps) {
    if (!(eps > 0 && eps <= 1)) fail(ErrorKind::precondition, "mollification scale must lie in (0, 1]");
    const int d = u.dim();
    const double h = u.cell();
    require(eps >= 2 * h, "mollification scale must cover at least two cells");
    const Mollifier phi(d);
    const auto r = std::int64_t(std::ceil(eps / h));
    MollifiedSamples out{GridFunction(d, u.level(), u.lo(), u.hi()), {}};
    for (int j = 0; j < d; ++j) out.gradient.push_back(GridFunction(d, u.level(), u.lo(), u.hi()));
    parallel_for(u.size(), [&](std::size_t o) {
        const Index c = u.cell_at(o);
        Index lo{}, hi{};
        for (int i = 0; i < d; ++i) {
            lo[i] = c[i] - r;
            hi[i] = c[i] + r;
        }
        double D = 0, N = 0;
        Point dD{}, dN{};
        detail::for_each_index(d, lo, hi, [&](const Index& y) {
            Point z{};
            for (int i = 0; i < d; ++i) z[i] = double(c[i] - y[i]) * h / eps;
            const double w = phi(z);
            if (w == 0) return;
            const double v = u.value(y);
            D += w;
            N += w * v;
            const Point g = phi.gradient(z);
            for (int j = 0; j < d; ++j) {
                dD[j] += g[j] / eps;
                dN[j] += g[j] / eps * v;
            }
        });
        out.value[o] = N / D;
        for (int j = 0; j < d; ++j) out.gradient[std::size_t(j)][o] = (dN[j] * D - N * dD[j]) / (D * D);
    });
    return out;
}

struct HolderQuotient {
    double max_quotient = 0;
    double exponent = 0; // log-log slope of mean increments against the separation
    std::uint64_t seed = 0;
};

// Seeded two-point quotients |f(x) - f(y)| / |x - y|^gamma on `samples` pairs in
// the domain, and the increment exponent from separations 2^-3 .. 2^-14.
inline HolderQuotient holder_quotient(const HolderFunction& f, std::size_t samples = 10000, std::uint64_t seed = 1) {
    require(samples >= 12, "holder_quotient needs at least 12 samples");
    const int d = f.in_dim(), m = f.out_dim();
    std::mt19937_64 rng(seed);
    auto point = [&] {
        Point x{};
        for (int i = 0; i < d; ++i) x[i] = f.domain().lo[i] + uniform01(rng) * (f.domain().hi[i] - f.domain().lo[i]);
        return x;
    };
    auto partner = [&](const Point& x, double delta) {
        Point dir{};
        double n = 0;
        for (int i = 0; i < d; ++i) n += (dir[i] = gaussian(rng)) * dir[i];
        n = std::sqrt(n);
        Point y{};
        for (int i = 0; i < d; ++i) y[i] = x[i] + delta * dir[i] / n;
        if (!f.in_domain(y))
            for (int i = 0; i < d; ++i) y[i] = x[i] - delta * dir[i] / n;
        return y;
    };
    auto diff = [&](const Point& a, const Point& b) { return dist(f(a), f(b), m); };
    HolderQuotient q;
    q.seed = seed;
    const double diam = box_diameter(f.domain(), d);
    for (std::size_t s = 0; s < samples; ++s) {
        const Point x = point();
        const double delta = std::exp2(-2 - 18 * uniform01(rng)) * std::max(diam, 1e-12);
        const Point y = partner(x, delta);
        const double r = dist(x, y, d);
        if (r > 0) q.max_quotient = std::max(q.max_quotient, diff(x, y) / std::pow(r, f.gamma()));
    }
    const int j0 = 3, j1 = 14;
    const std::size_t per = std::max<std::size_t>(samples / std::size_t(j1 - j0 + 1), 1);
    std::vector<double> lx, ly;
    for (int j = j0; j <= j1; ++j) {
        const double delta = std::ldexp(1.0, -j) * std::max(diam, 1e-12);
        double s = 0;
        for (std::size_t t = 0; t < per; ++t) {
            const Point x = point();
            s += diff(x, partner(x, delta));
        }
        if (s > 0) {
            lx.push_back(std::log2(delta));
            ly.push_back(std::log2(s / double(per)));
        }
    }
    q.exponent = lx.size() >= 2 ? ls_slope(lx, ly) : 0.0;
    return q;
}

// One step of the approximating sequence f_n = f^ * Phi_{2^-n} with the measured
// triple and its bounds C 2^{-n gamma} L, C 2^{-n gamma} L, C 2^{n(1-gamma)} L.
struct ApproxStep {
    int n = 0;
    HolderFunction fn;
    double sup_error = 0, step = 0, lip = 0;
    double bound_sup = 0, bound_step = 0, bound_lip = 0;
    double C = 0;
    bool ok() const { return sup_error <= bound_sup && step <= bound_step && lip <= bound_lip; }
};

inline double approx_constant(int out_dim) { return 4 * std::sqrt(double(out_dim)); }

inline ApproxStep approx_sequence(const HolderFunction& f, int n, int sample_level = -1) {
    require(n >= 0 && n <= 20, "approximation index out of range");
    const int d = f.in_dim(), m = f.out_dim();
    Mollified fn(f, std::ldexp(1.0, -n)), fn1(f, std::ldexp(1.0, -n - 1));
    fn.prepare(f.domain());
    fn1.prepare(f.domain());
    ApproxStep s;
    s.n = n;
    s.C = approx_constant(m);
    const double L = f.lip(), g = f.gamma();
    s.bound_sup = s.C * std::exp2(-n * g) * L;
    s.bound_step = s.C * std::exp2(-n * g) * L;
    s.bound_lip = s.C * std::exp2(n * (1 - g)) * L;
    if (sample_level < 0) sample_level = d == 1 ? n + 4 : std::min(n + 3, 6);
    // samples: the level grid points of the domain box, inclusive
    Index cnt{};
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) {
        cnt[i] = (std::int64_t(1) << sample_level) + 1;
        total *= std::size_t(cnt[i]);
    }
    std::vector<double> sup(total), step(total), lip(total);
    parallel_for(total, [&](std::size_t o) {
        Point x{};
        std::size_t rest = o;
        for (int i = 0; i < d; ++i) {
            const double t = double(rest % std::size_t(cnt[i])) / double(cnt[i] - 1);
            rest /= std::size_t(cnt[i]);
            x[i] = f.domain().lo[i] + t * (f.domain().hi[i] - f.domain().lo[i]);
        }
        Point v{}, v1{};
        std::array<Point, kMaxDim> J{};
        fn.eval(x, v, &J);
        fn1.eval(x, v1);
        const Point fx = f(x);
        sup[o] = dist(v, fx, m);
        step[o] = dist(v, v1, m);
        lip[o] = jacobian_norm(J, m, d);
    });
    s.sup_error = *std::max_element(sup.begin(), sup.end());
    s.step = *std::max_element(step.begin(), step.end());
    s.lip = *std::max_element(lip.begin(), lip.end());
    s.fn = fn.as_function(s.bound_lip);
    return s;
}

} // namespace fraccur
