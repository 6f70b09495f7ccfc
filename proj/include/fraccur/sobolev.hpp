#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"
#include "parallel.hpp"

namespace fraccur {

// Piecewise constant function on the cells [lo, hi) of the level-L dyadic grid,
// zero outside. Values are stored with axis 0 fastest.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(int d, int level, const Index& lo, const Index& hi, std::vector<double> values = {})
        : d_(d), level_(level), lo_(lo), hi_(hi) {
        require(d >= 1 && d <= kMaxDim, "grid function dimension out of range");
        std::size_t n = 1;
        for (int i = 0; i < d; ++i) {
            require(hi[i] >= lo[i], "grid function box has negative extent");
            n *= std::size_t(hi[i] - lo[i]);
        }
        for (int i = d; i < kMaxDim; ++i) lo_[i] = hi_[i] = 0;
        if (values.empty()) values.assign(n, 0.0);
        require(values.size() == n, "grid function values do not match the box shape");
        for (double v : values)
            if (!std::isfinite(v)) fail(ErrorKind::precondition, "grid function value is not finite");
        v_ = std::move(values);
    }

    // Midpoint samples of f.
    static GridFunction sample(int d, int level, const Index& lo, const Index& hi,
                               const std::function<double(const Point&)>& f) {
        GridFunction u(d, level, lo, hi);
        const double h = u.cell();
        for (std::size_t i = 0; i < u.size(); ++i) {
            const Index c = u.cell_at(i);
            Point x{};
            for (int j = 0; j < d; ++j) x[j] = (double(c[j]) + 0.5) * h;
            const double v = f(x);
            if (!std::isfinite(v)) fail(ErrorKind::precondition, "sampled function is not finite");
            u.v_[i] = v;
        }
        return u;
    }

    int dim() const { return d_; }
    int level() const { return level_; }
    double cell() const { return dyadic(level_); }
    const Index& lo() const { return lo_; }
    const Index& hi() const { return hi_; }
    std::int64_t extent(int i) const { return hi_[i] - lo_[i]; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    bool contains(const Index& c) const {
        for (int i = 0; i < d_; ++i)
            if (c[i] < lo_[i] || c[i] >= hi_[i]) return false;
        return true;
    }
    std::size_t offset(const Index& c) const {
        std::size_t o = 0, stride = 1;
        for (int i = 0; i < d_; ++i) {
            o += std::size_t(c[i] - lo_[i]) * stride;
            stride *= std::size_t(extent(i));
        }
        return o;
    }
    Index cell_at(std::size_t o) const {
        Index c{};
        for (int i = 0; i < d_; ++i) {
            const auto e = std::size_t(extent(i));
            c[i] = lo_[i] + std::int64_t(o % e);
            o /= e;
        }
        return c;
    }
    double value(const Index& c) const { return contains(c) ? v_[offset(c)] : 0.0; }

    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }
    const std::vector<double>& values() const { return v_; }

    bool is_binary() const {
        return std::all_of(v_.begin(), v_.end(), [](double v) { return v == 0.0 || v == 1.0; });
    }
    bool is_zero() const {
        return std::all_of(v_.begin(), v_.end(), [](double v) { return v == 0.0; });
    }

    GridFunction& operator*=(double s) {
        for (double& v : v_) v *= s;
        return *this;
    }

private:
    int d_ = 1, level_ = 0;
    Index lo_{}, hi_{};
    std::vector<double> v_;
};

inline GridFunction operator*(double s, GridFunction u) { return u *= s; }

inline double l1_norm(const GridFunction& u) {
    std::vector<double> a(u.values());
    for (double& x : a) x = std::abs(x);
    return tree_sum(a) * std::pow(u.cell(), u.dim());
}

// Total variation of the piecewise constant function: |jump| times facet area,
// summed over every facet including those on the box boundary.
inline double bv_norm(const GridFunction& u) {
    const int d = u.dim();
    std::vector<double> per(u.size(), 0.0);
    for (std::size_t o = 0; o < u.size(); ++o) {
        const Index c = u.cell_at(o);
        double s = 0;
        for (int i = 0; i < d; ++i) {
            Index q = c;
            ++q[i];
            s += std::abs(u[o] - u.value(q));
            if (c[i] == u.lo()[i]) s += std::abs(u[o]);
        }
        per[o] = s;
    }
    return tree_sum(per) * std::pow(u.cell(), d - 1);
}

// u as a top-degree cubical chain with the cell values as coefficients.
inline CubicalChain to_chain(const GridFunction& u) {
    CubicalChain t(u.dim(), u.dim(), u.level());
    for (std::size_t o = 0; o < u.size(); ++o) {
        if (u[o] == 0.0) continue;
        Face f;
        f.base = u.cell_at(o);
        f.axes = full_mask(u.dim());
        t.add(f, u[o]);
    }
    return t;
}

// Same values on cells 2^levels times finer.
inline GridFunction refine(const GridFunction& u, int levels) {
    require(levels >= 0, "refine by a negative number of levels");
    if (levels == 0) return u;
    const int d = u.dim();
    Index lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        lo[i] = u.lo()[i] << levels;
        hi[i] = u.hi()[i] << levels;
    }
    GridFunction r(d, u.level() + levels, lo, hi);
    for (std::size_t o = 0; o < r.size(); ++o) {
        Index c = r.cell_at(o);
        for (int i = 0; i < d; ++i) c[i] >>= levels;
        r[o] = u.value(c);
    }
    return r;
}

// u composed with x -> x / 2^shift: same cell values on a grid 2^shift times coarser.
inline GridFunction rescale_dyadic(const GridFunction& u, int shift) {
    return GridFunction(u.dim(), u.level() - shift, u.lo(), u.hi(), u.values());
}

namespace detail {

struct Rule01 {
    std::vector<double> x, w;
};

// Gauss-Legendre rule mapped to [0, 1].
template <unsigned N>
const Rule01& gauss01() {
    static const Rule01 r = [] {
        using G = boost::math::quadrature::gauss<double, N>;
        Rule01 out;
        const auto& a = G::abscissa();
        const auto& w = G::weights();
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0) {
                out.x.push_back(0.5);
                out.w.push_back(0.5 * w[i]);
                continue;
            }
            out.x.push_back(0.5 * (1 - a[i]));
            out.w.push_back(0.5 * w[i]);
            out.x.push_back(0.5 * (1 + a[i]));
            out.w.push_back(0.5 * w[i]);
        }
        return out;
    }();
    return r;
}

// Unit-cell kernel in one dimension: the integral of |x - y + n|^-p over two unit
// cells, n >= 1, 1 < p < 2.
inline double kernel1(std::int64_t n, double p) {
    if (n <= 16) {
        // second difference of G with G'' = z^-p
        auto G = [&](double z) { return z == 0 ? 0.0 : -std::pow(z, 2 - p) / ((2 - p) * (p - 1)); };
        const double x = double(n);
        return G(x + 1) - 2 * G(x) + G(x - 1);
    }
    // even moments of the difference of two uniforms: 1/6, 1/15, 1/28
    const double x = double(n), ix2 = 1 / (x * x);
    const double c2 = p * (p + 1) / 2 / 6;
    const double c4 = p * (p + 1) * (p + 2) * (p + 3) / 24 / 15;
    const double c6 = p * (p + 1) * (p + 2) * (p + 3) * (p + 4) * (p + 5) / 720 / 28;
    return std::pow(x, -p) * (1 + ix2 * (c2 + ix2 * (c4 + ix2 * c6)));
}

// Two dimensions: integral of tent(z1) tent(z2) |z + n|^-p over [-1, 1]^2, split
// into quadrants. A quadrant with the singular point -n at a corner is done in
// polar coordinates around it, where the radial integral is exact.
inline double kernel2(std::int64_t n1, std::int64_t n2, double p, const Rule01& r, int sub, const Rule01& ang) {
    const double pi = std::numbers::pi;
    double total = 0;
    for (int a1 = -1; a1 <= 0; ++a1)
        for (int a2 = -1; a2 <= 0; ++a2) {
            const std::int64_t c1 = -n1, c2 = -n2;
            const bool sing = (c1 == a1 || c1 == a1 + 1) && (c2 == a2 || c2 == a2 + 1);
            if (sing) {
                const double s1 = c1 == a1 ? 1 : -1, s2 = c2 == a2 ? 1 : -1;
                const double g1 = a1 == -1 ? 1 : -1, g2 = a2 == -1 ? 1 : -1;
                const double A1 = 1 - std::abs(double(c1)), A2 = 1 - std::abs(double(c2));
                const double B1 = g1 * s1, B2 = g2 * s2;
                if (A1 * A2 != 0) fail(ErrorKind::internal, "non-integrable kernel corner");
                double q = 0;
                for (int half = 0; half < 2; ++half)
                    for (std::size_t i = 0; i < ang.x.size(); ++i) {
                        const double phi = (half + ang.x[i]) * pi / 4;
                        const double cs = std::cos(phi), sn = std::sin(phi);
                        const double R = 1 / (half == 0 ? cs : sn);
                        const double L = A1 * B2 * sn + B1 * A2 * cs, Q = B1 * B2 * cs * sn;
                        q += ang.w[i] * (L * std::pow(R, 3 - p) / (3 - p) + Q * std::pow(R, 4 - p) / (4 - p));
                    }
                total += q * pi / 4;
                continue;
            }
            double q = 0;
            const double hs = 1.0 / sub;
            for (int i1 = 0; i1 < sub; ++i1)
                for (int i2 = 0; i2 < sub; ++i2)
                    for (std::size_t j1 = 0; j1 < r.x.size(); ++j1) {
                        const double z1 = a1 + (i1 + r.x[j1]) * hs;
                        const double t1 = 1 - std::abs(z1), y1 = z1 + double(n1);
                        for (std::size_t j2 = 0; j2 < r.x.size(); ++j2) {
                            const double z2 = a2 + (i2 + r.x[j2]) * hs;
                            const double t2 = 1 - std::abs(z2), y2 = z2 + double(n2);
                            q += r.w[j1] * r.w[j2] * t1 * t2 * std::pow(y1 * y1 + y2 * y2, -p / 2);
                        }
                    }
            total += q * hs * hs;
        }
    return total;
}

// Integral over x in the unit square of the integral over y outside [lo, hi]^2 of
// |x - y|^-p; the square must lie well inside the box.
inline double box_exterior2(double p, double lo, double hi) {
    const auto& rx = gauss01<8>();
    const auto& ra = gauss01<20>();
    double total = 0;
    for (std::size_t i = 0; i < rx.x.size(); ++i)
        for (std::size_t j = 0; j < rx.x.size(); ++j) {
            const double x1 = rx.x[i], x2 = rx.x[j];
            // each side: perpendicular distance and the along-side span
            const double side[4][3] = {{hi - x1, lo - x2, hi - x2},
                                       {x1 - lo, lo - x2, hi - x2},
                                       {hi - x2, lo - x1, hi - x1},
                                       {x2 - lo, lo - x1, hi - x1}};
            double psi = 0;
            for (auto& s : side) {
                const double t0 = std::atan(s[1] / s[0]), t1 = std::atan(s[2] / s[0]);
                double q = 0;
                for (std::size_t k = 0; k < ra.x.size(); ++k) {
                    const double th = t0 + (t1 - t0) * ra.x[k];
                    q += ra.w[k] * std::pow(s[0] / std::cos(th), 2 - p);
                }
                psi += q * (t1 - t0);
            }
            total += rx.w[i] * rx.w[j] * psi / (p - 2);
        }
    return total;
}

} // namespace detail

// Table of unit-cell kernel integrals k(n) = int_{Q0} int_{Q0 + n} |x - y|^-p for
// offsets |n_i| < ext_i, the constant S = int_{Q0} int_{R^d \ Q0} |x - y|^-p, and
// prefix sums for box sums of k.
class GagliardoKernel {
public:
    static constexpr std::int64_t kNear = 32;

    GagliardoKernel(int d, double alpha, const Index& ext) : d_(d), p_(d + 1 - alpha) {
        require(alpha > 0 && alpha < 1, "alpha must lie in (0, 1)");
        require(d == 1 || d == 2, "the Gagliardo kernel is implemented for d <= 2");
        for (int i = 0; i < d; ++i) {
            require(ext[i] >= 1, "kernel table extent must be positive");
            ext_[i] = ext[i];
        }
        if (d == 1) build1();
        else build2();
        build_prefix();
    }

    int dim() const { return d_; }
    double exponent() const { return p_; }
    double self_exterior() const { return S_; }
    double rel_error() const { return rel_err_; }
    std::int64_t extent(int i) const { return ext_[i]; }

    // k at offset |n|; 0 at n = 0.
    double at_abs(std::int64_t n1, std::int64_t n2 = 0) const { return sym_[std::size_t(n1 + ext_[0] * n2)]; }
    double operator()(const Index& n) const { return at_abs(std::abs(n[0]), d_ == 2 ? std::abs(n[1]) : 0); }

    // Sum of k over offsets a <= n <= b (inclusive, clipped to the table).
    double box_sum(Index a, Index b) const {
        for (int i = 0; i < d_; ++i) {
            a[i] = std::max(a[i], -(ext_[i] - 1));
            b[i] = std::min(b[i], ext_[i] - 1);
            if (a[i] > b[i]) return 0.0;
        }
        auto P = [&](std::int64_t i, std::int64_t j) { // prefix over offsets < (i, j), shifted
            return pre_[std::size_t(i + (2 * ext_[0]) * j)];
        };
        const std::int64_t i0 = a[0] + ext_[0] - 1, i1 = b[0] + ext_[0];
        if (d_ == 1) return P(i1, 1) - P(i0, 1);
        const std::int64_t j0 = a[1] + ext_[1] - 1, j1 = b[1] + ext_[1];
        return P(i1, j1) - P(i0, j1) - P(i1, j0) + P(i0, j0);
    }

    // Full offset table on a circular grid of the given shape, for FFT convolution.
    std::vector<double> circular(const std::vector<int>& shape) const {
        std::size_t n = 1;
        for (int s : shape) n *= std::size_t(s);
        std::vector<double> out(n, 0.0);
        const std::int64_t e1 = d_ == 2 ? ext_[1] : 1;
        for (std::int64_t o2 = -(e1 - 1); o2 <= e1 - 1; ++o2)
            for (std::int64_t o1 = -(ext_[0] - 1); o1 <= ext_[0] - 1; ++o1) {
                const std::int64_t i1 = (o1 + shape[0]) % shape[0];
                const std::int64_t i2 = d_ == 2 ? (o2 + shape[1]) % shape[1] : 0;
                out[std::size_t(i1 + std::int64_t(shape[0]) * i2)] = at_abs(std::abs(o1), std::abs(o2));
            }
        return out;
    }

private:
    void build1() {
        sym_.assign(std::size_t(ext_[0]), 0.0);
        for (std::int64_t n = 1; n < ext_[0]; ++n) sym_[std::size_t(n)] = detail::kernel1(n, p_);
        S_ = 2 / ((p_ - 1) * (2 - p_));
        rel_err_ = 1e-10; // prefix-sum rounding over long boxes
    }

    void build2() {
        const auto& fine = detail::gauss01<20>();
        const auto& coarse = detail::gauss01<10>();
        const auto& far = detail::gauss01<7>();
        auto sub_of = [](std::int64_t m) { return m <= 2 ? 4 : (m <= 6 ? 2 : 1); };
        // near block, computed once for n1 >= n2 >= 0
        const std::int64_t M = kNear;
        std::vector<double> near(std::size_t((M + 1) * (M + 1)), 0.0);
        double err = 0;
        for (std::int64_t n1 = 0; n1 <= M; ++n1)
            for (std::int64_t n2 = 0; n2 <= n1; ++n2) {
                if (n1 == 0) continue;
                const int sub = sub_of(n1);
                const double v = detail::kernel2(n1, n2, p_, fine, sub, fine);
                const double w = detail::kernel2(n1, n2, p_, coarse, sub, coarse);
                err = std::max(err, std::abs(v - w) / v);
                near[std::size_t(n1 + (M + 1) * n2)] = near[std::size_t(n2 + (M + 1) * n1)] = v;
            }
        double s = 0;
        for (std::int64_t n2 = -M; n2 <= M; ++n2)
            for (std::int64_t n1 = -M; n1 <= M; ++n1)
                s += near[std::size_t(std::abs(n1) + (M + 1) * std::abs(n2))];
        S_ = s + detail::box_exterior2(p_, -double(M), double(M + 1));
        rel_err_ = std::max(err, 1e-8); // floor: far-field tail quadrature

        sym_.assign(std::size_t(ext_[0] * ext_[1]), 0.0);
        for (std::int64_t n2 = 0; n2 < ext_[1]; ++n2)
            for (std::int64_t n1 = 0; n1 < ext_[0]; ++n1) {
                double v;
                if (n1 <= M && n2 <= M) v = near[std::size_t(n1 + (M + 1) * n2)];
                else if (n2 < ext_[0] && n1 < ext_[1] && n1 < n2) v = sym_[std::size_t(n2 + ext_[0] * n1)];
                else v = detail::kernel2(n1, n2, p_, far, 1, far);
                sym_[std::size_t(n1 + ext_[0] * n2)] = v;
            }
    }

    void build_prefix() {
        const std::int64_t w = 2 * ext_[0];
        const std::int64_t hgt = d_ == 2 ? 2 * ext_[1] : 2;
        pre_.assign(std::size_t(w * hgt), 0.0);
        for (std::int64_t j = 1; j < hgt; ++j)
            for (std::int64_t i = 1; i < w; ++i) {
                const std::int64_t o1 = i - ext_[0], o2 = d_ == 2 ? j - ext_[1] : 0;
                const double v = at_abs(std::abs(o1), std::abs(o2));
                pre_[std::size_t(i + w * j)] =
                    v + pre_[std::size_t(i - 1 + w * j)] + pre_[std::size_t(i + w * (j - 1))] - pre_[std::size_t(i - 1 + w * (j - 1))];
            }
    }

    int d_;
    double p_;
    Index ext_{1, 1, 1, 1};
    double S_ = 0, rel_err_ = 0;
    std::vector<double> sym_, pre_;
};

struct GagliardoOptions {
    std::size_t direct_below = 4096;    // cells; always direct under this size
    std::size_t max_layers = 64;        // distinct values allowed on the FFT path
    std::size_t max_direct = 1u << 17; // cells; larger inputs need the FFT path
};

struct GagliardoResult {
    double value = 0;
    double error = 0;    // kernel quadrature error estimate
    double interior = 0; // pairs of cells inside the box
    double exterior = 0; // pairs with one cell outside the box
    bool fft = false;
};

namespace detail {

inline std::vector<int> fft_shape(const GridFunction& u) {
    std::vector<int> s;
    for (int i = 0; i < u.dim(); ++i) s.push_back(int(2 * u.extent(i)));
    return s;
}

inline std::vector<double> embed(const GridFunction& u, const std::vector<double>& v, const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int s : shape) n *= std::size_t(s);
    std::vector<double> out(n, 0.0);
    for (std::size_t o = 0; o < u.size(); ++o) {
        const Index c = u.cell_at(o);
        std::size_t idx = std::size_t(c[0] - u.lo()[0]);
        if (u.dim() == 2) idx += std::size_t(shape[0]) * std::size_t(c[1] - u.lo()[1]);
        out[idx] = v[o];
    }
    return out;
}

inline std::vector<double> extract(const GridFunction& u, const std::vector<double>& a, const std::vector<int>& shape) {
    std::vector<double> out(u.size());
    for (std::size_t o = 0; o < u.size(); ++o) {
        const Index c = u.cell_at(o);
        std::size_t idx = std::size_t(c[0] - u.lo()[0]);
        if (u.dim() == 2) idx += std::size_t(shape[0]) * std::size_t(c[1] - u.lo()[1]);
        out[o] = a[idx];
    }
    return out;
}

// sum over Q in the box, Q != P, of k(Q - P)
inline std::vector<double> in_box_sums(const GridFunction& u, const GagliardoKernel& k) {
    std::vector<double> out(u.size());
    for (std::size_t o = 0; o < u.size(); ++o) {
        const Index c = u.cell_at(o);
        Index a{}, b{};
        for (int i = 0; i < u.dim(); ++i) {
            a[i] = u.lo()[i] - c[i];
            b[i] = u.hi()[i] - 1 - c[i];
        }
        out[o] = k.box_sum(a, b);
    }
    return out;
}

inline Index extents(const GridFunction& u) {
    Index e{1, 1, 1, 1};
    for (int i = 0; i < u.dim(); ++i) e[i] = std::max<std::int64_t>(1, u.extent(i));
    return e;
}

} // namespace detail

// Gagliardo seminorm of u in W^{1-alpha,1}: the double integral of |u(x) - u(y)| /
// |x - y|^{d+1-alpha}. Each pair of cells contributes |u_P - u_Q| times an exact
// cell-pair integral; pairs with one cell outside the box use S minus the box sums.
inline GagliardoResult gagliardo(const GridFunction& u, double alpha, const GagliardoOptions& opt = {}) {
    if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::precondition, "gagliardo needs 0 < alpha < 1");
    const int d = u.dim();
    require(d <= 2, "gagliardo is implemented for d <= 2");
    GagliardoResult res;
    if (u.is_zero()) return res;
    const GagliardoKernel k(d, alpha, detail::extents(u));
    const std::size_t N = u.size();
    const std::vector<double> K1 = detail::in_box_sums(u, k);

    std::vector<double> ext(N);
    for (std::size_t o = 0; o < N; ++o) ext[o] = 2 * std::abs(u[o]) * (k.self_exterior() - K1[o]);
    const double X = tree_sum(ext);

    std::vector<double> vals(u.values());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());

    double I = 0;
    if (N > opt.direct_below && vals.size() <= opt.max_layers + 1) {
        // layer cake: |a - b| = sum_j (v_{j+1} - v_j) |[a > v_j] - [b > v_j]|
        res.fft = true;
        const auto shape = detail::fft_shape(u);
        CircularConvolver conv(shape, k.circular(shape));
        std::vector<double> layers;
        for (std::size_t j = 0; j + 1 < vals.size(); ++j) {
            std::vector<double> chi(N);
            for (std::size_t o = 0; o < N; ++o) chi[o] = u[o] > vals[j] ? 1.0 : 0.0;
            const auto kc = detail::extract(u, conv.apply(detail::embed(u, chi, shape)), shape);
            std::vector<double> t(N);
            for (std::size_t o = 0; o < N; ++o) t[o] = chi[o] * (K1[o] - kc[o]);
            layers.push_back(2 * (vals[j + 1] - vals[j]) * tree_sum(t));
        }
        I = tree_sum(layers);
    } else {
        if (N > opt.max_direct)
            fail(ErrorKind::precondition, "grid function too large for the direct Gagliardo sum");
        // unordered pairs P < Q, doubled
        std::vector<double> row(N, 0.0);
        std::vector<Index> cells(N);
        for (std::size_t o = 0; o < N; ++o) cells[o] = u.cell_at(o);
        parallel_for(N, [&](std::size_t a) {
            double s = 0;
            const double ua = u[a];
            const Index& ca = cells[a];
            for (std::size_t b = a + 1; b < N; ++b) {
                const double du = std::abs(ua - u[b]);
                if (du == 0) continue;
                const Index& cb = cells[b];
                s += du * (d == 1 ? k.at_abs(std::abs(cb[0] - ca[0])) : k.at_abs(std::abs(cb[0] - ca[0]), std::abs(cb[1] - ca[1])));
            }
            row[a] = 2 * s;
        });
        I = tree_sum(row);
    }
    const double scale = std::pow(u.cell(), d - 1 + alpha);
    res.interior = I * scale;
    res.exterior = X * scale;
    res.value = res.interior + res.exterior;
    res.error = k.rel_error() * res.value + 1e-14 * double(N) * res.value;
    return res;
}

// (1 - alpha)-fractional perimeter of the set where A = 1.
inline double frac_perimeter(const GridFunction& A, double alpha) {
    if (!A.is_binary()) fail(ErrorKind::precondition, "fractional perimeter needs a {0,1}-valued function");
    return gagliardo(A, alpha).value;
}

// The same quantity written as 2 int_A int_{A^c} |x - y|^{-(d+1-alpha)}.
inline double frac_perimeter_pairs(const GridFunction& A, double alpha) {
    if (!A.is_binary()) fail(ErrorKind::precondition, "fractional perimeter needs a {0,1}-valued function");
    if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::precondition, "fractional perimeter needs 0 < alpha < 1");
    require(A.dim() <= 2, "fractional perimeter is implemented for d <= 2");
    if (A.is_zero()) return 0.0;
    const GagliardoKernel k(A.dim(), alpha, detail::extents(A));
    const std::size_t N = A.size();
    std::vector<double> kc(N, 0.0);
    if (N > 4096) {
        const auto shape = detail::fft_shape(A);
        CircularConvolver conv(shape, k.circular(shape));
        kc = detail::extract(A, conv.apply(detail::embed(A, A.values(), shape)), shape);
    } else {
        for (std::size_t a = 0; a < N; ++a) {
            if (A[a] == 0) continue;
            const Index ca = A.cell_at(a);
            for (std::size_t b = 0; b < N; ++b) {
                if (b == a || A[b] == 0) continue;
                const Index cb = A.cell_at(b);
                kc[a] += k.at_abs(std::abs(cb[0] - ca[0]), A.dim() == 2 ? std::abs(cb[1] - ca[1]) : 0);
            }
        }
    }
    std::vector<double> t(N);
    for (std::size_t o = 0; o < N; ++o) t[o] = A[o] * (k.self_exterior() - kc[o]);
    return 2 * tree_sum(t) * std::pow(A.cell(), A.dim() - 1 + alpha);
}

// gagliardo(u) / (|Du|^{1-alpha} |u|_1^alpha); 1-homogeneous pieces cancel.
inline double interpolation_ratio(const GridFunction& u, double alpha) {
    const double bv = bv_norm(u), l1 = l1_norm(u);
    if (!(bv > 0) || !(l1 > 0)) fail(ErrorKind::precondition, "interpolation ratio needs nonzero BV and L1 norms");
    return gagliardo(u, alpha).value / (std::pow(bv, 1 - alpha) * std::pow(l1, alpha));
}

inline bool in_unit_cube(const Index& c, int d, int level) {
    for (int i = 0; i < d; ++i)
        if (c[i] < 0 || c[i] >= (std::int64_t(1) << level)) return false;
    return true;
}

// Averages of u over the dyadic k-cubes of the unit cube, as a level-k function.
inline GridFunction cube_averages(const GridFunction& u, int k) {
    const int d = u.dim(), L = u.level();
    require(k >= 0 && k <= L, "averaging level out of range");
    Index lo{}, hi{};
    for (int i = 0; i < d; ++i) hi[i] = std::int64_t(1) << k;
    GridFunction v(d, k, lo, hi);
    const int shift = L - k;
    const double w = std::ldexp(1.0, -shift * d);
    // accumulate cell by cell; each coarse cell gets its children in offset order
    std::vector<std::vector<double>> acc(v.size());
    for (std::size_t o = 0; o < u.size(); ++o) {
        Index c = u.cell_at(o);
        if (!in_unit_cube(c, d, L)) continue;
        for (int i = 0; i < d; ++i) c[i] >>= shift;
        acc[v.offset(c)].push_back(u[o]);
    }
    for (std::size_t o = 0; o < v.size(); ++o) v[o] = tree_sum(acc[o]) * w;
    return v;
}

struct DyadicDecomposition {
    std::vector<GridFunction> parts; // u_0 .. u_depth, u_k at level k on [0, 1]^d
    std::vector<GridFunction> averages; // v_0 .. v_depth
    GridFunction residual;              // u - v_depth at the level of u
};

// The grid box may stick out of the unit cube as long as the values there vanish.
inline void check_unit_support(const GridFunction& u) {
    for (std::size_t o = 0; o < u.size(); ++o)
        if (u[o] != 0 && !in_unit_cube(u.cell_at(o), u.dim(), u.level()))
            fail(ErrorKind::precondition, "dyadic decomposition needs support in the unit cube");
}

// u_0 = v_0 and u_k = v_k - v_{k-1}, v_k the dyadic cube averages.
inline DyadicDecomposition dyadic_decompose(const GridFunction& u, int depth) {
    require(depth >= 0, "negative decomposition depth");
    if (depth > u.level()) fail(ErrorKind::precondition, "decomposition depth exceeds the grid level");
    check_unit_support(u);
    DyadicDecomposition out;
    for (int k = 0; k <= depth; ++k) out.averages.push_back(cube_averages(u, k));
    for (int k = 0; k <= depth; ++k) {
        if (k == 0) {
            out.parts.push_back(out.averages[0]);
            continue;
        }
        const GridFunction prev = refine(out.averages[std::size_t(k - 1)], 1);
        GridFunction uk = out.averages[std::size_t(k)];
        for (std::size_t o = 0; o < uk.size(); ++o) uk[o] -= prev[o];
        out.parts.push_back(uk);
    }
    const GridFunction vd = refine(out.averages.back(), u.level() - depth);
    GridFunction r = vd;
    for (std::size_t o = 0; o < r.size(); ++o) r[o] = u.value(r.cell_at(o)) - vd[o];
    out.residual = r;
    return out;
}

struct EquivalenceCertificate {
    double gagliardo = 0;
    double cost = 0;     // sum_k |Du_k|^{1-alpha} |u_k|_1^alpha
    double ratio = 0;    // gagliardo / cost
    double inverse = 0;  // cost / gagliardo
    bool defined = true; // false when both sides vanish
    std::vector<double> terms;
};

// Both sides of the equivalence between the Gagliardo seminorm and the dyadic
// averaging decomposition cost.
inline EquivalenceCertificate equivalence_certificate(const GridFunction& u, double alpha, int depth) {
    if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::precondition, "certificate needs 0 < alpha < 1");
    EquivalenceCertificate c;
    const auto dec = dyadic_decompose(u, depth);
    for (auto& uk : dec.parts) c.terms.push_back(std::pow(bv_norm(uk), 1 - alpha) * std::pow(l1_norm(uk), alpha));
    c.cost = tree_sum(c.terms);
    c.gagliardo = gagliardo(u, alpha).value;
    if (c.cost == 0 || c.gagliardo == 0) {
        c.defined = false;
        return c;
    }
    c.ratio = c.gagliardo / c.cost;
    c.inverse = c.cost / c.gagliardo;
    return c;
}

} // namespace fraccur
