#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flatnorm.hpp"
#include "grid.hpp"
#include "holder.hpp"
#include "parallel.hpp"

namespace fraccur {

// One coefficient function of a form, with its gradient when known.
struct FormComponent {
    std::function<double(const Point&)> value;
    std::function<Point(const Point&)> gradient; // empty: central differences
};

// m-form on R^d: one component per increasing multi-index, stored by axis mask
// in increasing lexicographic order of the index tuple. A form may instead (or
// also) carry its own smooth stages, used by the wedge series.
class SampledForm;
using StageMap = std::function<SampledForm(int)>;

inline std::vector<std::uint32_t> form_masks(int d, int m) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t s = 0; s < (1u << d); ++s)
        if (popcount(s) == m) out.push_back(s);
    // lexicographic on the sorted index tuple
    std::sort(out.begin(), out.end(), [d](std::uint32_t a, std::uint32_t b) {
        for (int i = 0; i < d; ++i) {
            const bool x = (a >> i) & 1u, y = (b >> i) & 1u;
            if (x != y) return x;
        }
        return false;
    });
    return out;
}

class SampledForm {
public:
    SampledForm() = default;
    SampledForm(int d, int m, double alpha, std::vector<FormComponent> comps, std::string name = "form")
        : d_(d), m_(m), alpha_(alpha), masks_(form_masks(d, m)), comps_(std::move(comps)), name_(std::move(name)) {
        require(d >= 1 && d <= kMaxDim && m >= 0 && m <= d, "form degree out of range");
        require(comps_.size() == masks_.size(), "component count must be C(d, m)");
    }

    int dim() const { return d_; }
    int degree() const { return m_; }
    double alpha() const { return alpha_; }
    const std::string& name() const { return name_; }
    const std::vector<std::uint32_t>& masks() const { return masks_; }
    const std::vector<FormComponent>& components() const { return comps_; }
    bool has_values() const { return !comps_.empty() && bool(comps_[0].value); }

    std::size_t slot(std::uint32_t mask) const {
        const auto it = std::find(masks_.begin(), masks_.end(), mask);
        require(it != masks_.end(), "no such form component");
        return std::size_t(it - masks_.begin());
    }
    double component(std::uint32_t mask, const Point& x) const { return comps_[slot(mask)].value(x); }

    SampledForm& with_stages(StageMap s) {
        stages_ = std::move(s);
        return *this;
    }
    bool has_stages() const { return bool(stages_); }

    // omega * Phi_{2^-n}: the attached stage map, or componentwise mollification.
    SampledForm stage(int n) const;

    void set_holders(std::vector<HolderFunction> h) { holders_ = std::move(h); }
    const std::vector<HolderFunction>& holders() const { return holders_; }

private:
    int d_ = 1, m_ = 0;
    double alpha_ = 1;
    std::vector<std::uint32_t> masks_;
    std::vector<FormComponent> comps_;
    std::string name_;
    StageMap stages_;
    std::vector<HolderFunction> holders_;
};

namespace detail {

inline FormComponent mollified_component(const HolderFunction& f, int n) {
    auto m = std::make_shared<Mollified>(f, dyadic(n));
    m->prepare(f.domain());
    return {[m](const Point& x) { return (*m)(x)[0]; }, [m](const Point& x) { return m->jacobian(x)[0]; }};
}

inline FormComponent scalar_component(const HolderFunction& f) {
    return {[f](const Point& x) { return f(x)[0]; }, {}};
}

} // namespace detail

inline SampledForm SampledForm::stage(int n) const {
    if (stages_) return stages_(n);
    require(!holders_.empty() || alpha_ >= 1, "form has neither stages nor Holder components");
    if (holders_.empty()) return *this; // smooth already
    std::vector<FormComponent> c;
    for (auto& h : holders_) c.push_back(detail::mollified_component(h, n));
    return SampledForm(d_, m_, 1.0, std::move(c), name_ + "_" + std::to_string(n));
}

// Form with Holder coefficient functions (scalar, on R^d) and exponent min gamma.
inline SampledForm holder_form(int d, int m, std::vector<HolderFunction> comps, std::string name = "form") {
    double a = 1;
    std::vector<FormComponent> c;
    for (auto& f : comps) {
        require(f.in_dim() == d && f.out_dim() == 1, "form components must be scalar functions on R^d");
        a = std::min(a, f.gamma());
        c.push_back(detail::scalar_component(f));
    }
    SampledForm w(d, m, a, std::move(c), std::move(name));
    w.set_holders(std::move(comps));
    return w;
}

// Smooth form from callables; gradients optional.
inline SampledForm smooth_form(int d, int m, std::vector<FormComponent> comps, std::string name = "smooth") {
    return SampledForm(d, m, 1.0, std::move(comps), std::move(name));
}

inline SampledForm constant_form(int d, int m, const std::vector<double>& coeffs) {
    std::vector<FormComponent> c;
    for (double a : coeffs) c.push_back({[a](const Point&) { return a; }, [](const Point&) { return Point{}; }});
    return SampledForm(d, m, 1.0, std::move(c), "constant");
}

namespace detail {

// e_I ^ e_J = sign e_{I u J}, 0 when they overlap.
inline int wedge_sign(std::uint32_t I, std::uint32_t J) {
    if (I & J) return 0;
    int inv = 0;
    for (int i = 0; i < 32; ++i)
        if ((I >> i) & 1u) inv += popcount(J & ((1u << i) - 1u));
    return inv % 2 ? -1 : 1;
}

inline Point gradient_of(const FormComponent& c, const Point& x, int d, double h) {
    if (c.gradient) return c.gradient(x);
    Point g{};
    for (int i = 0; i < d; ++i) {
        Point a = x, b = x;
        a[i] -= h;
        b[i] += h;
        g[i] = (c.value(b) - c.value(a)) / (2 * h);
    }
    return g;
}

} // namespace detail

// Pointwise wedge of two forms with values.
inline SampledForm wedge(const SampledForm& w, const SampledForm& e) {
    require(w.dim() == e.dim(), "forms live in different dimensions");
    const int d = w.dim(), k = w.degree() + e.degree();
    require(k <= d, "wedge degree exceeds the dimension");
    std::vector<FormComponent> out;
    for (std::uint32_t K : form_masks(d, k)) {
        std::vector<std::tuple<int, std::size_t, std::size_t>> terms;
        for (std::size_t a = 0; a < w.masks().size(); ++a)
            for (std::size_t b = 0; b < e.masks().size(); ++b)
                if ((w.masks()[a] | e.masks()[b]) == K) {
                    const int s = detail::wedge_sign(w.masks()[a], e.masks()[b]);
                    if (s != 0) terms.emplace_back(s, a, b);
                }
        const auto& wc = w.components();
        const auto& ec = e.components();
        const bool grads = std::all_of(wc.begin(), wc.end(), [](auto& c) { return bool(c.gradient); }) &&
                           std::all_of(ec.begin(), ec.end(), [](auto& c) { return bool(c.gradient); });
        FormComponent c;
        c.value = [terms, wc, ec](const Point& x) {
            double s = 0;
            for (auto& [sg, a, b] : terms) s += sg * wc[a].value(x) * ec[b].value(x);
            return s;
        };
        if (grads)
            c.gradient = [terms, wc, ec](const Point& x) {
                Point g{};
                for (auto& [sg, a, b] : terms) {
                    const double u = wc[a].value(x), v = ec[b].value(x);
                    const Point gu = wc[a].gradient(x), gv = ec[b].gradient(x);
                    for (int i = 0; i < kMaxDim; ++i) g[i] += sg * (gu[i] * v + u * gv[i]);
                }
                return g;
            };
        out.push_back(std::move(c));
    }
    return SampledForm(d, k, std::min(w.alpha(), e.alpha()), std::move(out), w.name() + "^" + e.name());
}

// a w + b e, componentwise.
inline SampledForm combine(double a, const SampledForm& w, double b, const SampledForm& e) {
    require(w.dim() == e.dim() && w.degree() == e.degree(), "forms must share dimension and degree");
    std::vector<FormComponent> out;
    for (std::size_t i = 0; i < w.components().size(); ++i) {
        const auto x = w.components()[i], y = e.components()[i];
        FormComponent c;
        c.value = [a, b, x, y](const Point& p) { return a * x.value(p) + b * y.value(p); };
        if (x.gradient && y.gradient)
            c.gradient = [a, b, x, y](const Point& p) {
                Point g{}, gx = x.gradient(p), gy = y.gradient(p);
                for (int k = 0; k < kMaxDim; ++k) g[k] = a * gx[k] + b * gy[k];
                return g;
            };
        out.push_back(std::move(c));
    }
    return SampledForm(w.dim(), w.degree(), std::min(w.alpha(), e.alpha()), std::move(out), "comb");
}

// d omega from component gradients, or central differences at step h where a
// gradient is missing.
inline SampledForm exterior_derivative(const SampledForm& w, double h = 1e-6) {
    const int d = w.dim(), m = w.degree();
    require(m < d, "d of a top-degree form vanishes identically");
    std::vector<FormComponent> out;
    for (std::uint32_t K : form_masks(d, m + 1)) {
        std::vector<std::tuple<int, int, FormComponent>> terms;
        for (int i = 0; i < d; ++i) {
            if (!((K >> i) & 1u)) continue;
            const int pos = popcount(K & ((1u << i) - 1u));
            terms.emplace_back(pos % 2 ? -1 : 1, i, w.components()[w.slot(K & ~(1u << i))]);
        }
        out.push_back({[terms, d, h](const Point& x) {
                           double s = 0;
                           for (auto& [sg, i, c] : terms) s += sg * detail::gradient_of(c, x, d, h)[i];
                           return s;
                       },
                       {}});
    }
    return SampledForm(d, m + 1, 1.0, std::move(out), "d" + w.name());
}

namespace detail {

inline constexpr double kGauss[2] = {0.5 - 0.5 / 1.7320508075688772, 0.5 + 0.5 / 1.7320508075688772};

inline double eval_face(const SampledForm& w, std::size_t slot, const Point& corner, const std::vector<int>& axes, double h) {
    const int m = int(axes.size());
    double s = 0;
    for (std::uint32_t g = 0; g < (1u << m); ++g) {
        Point x = corner;
        for (int j = 0; j < m; ++j) x[axes[std::size_t(j)]] += h * kGauss[(g >> j) & 1u];
        s += w.components()[slot].value(x);
    }
    return s / double(1u << m);
}

} // namespace detail

// <omega, T> over a cubical chain: coefficient x face volume x the matching
// component averaged on the 2-point Gauss grid of the face.
inline double form_eval(const SampledForm& w, const CubicalChain& t) {
    require(w.degree() == t.degree(), "form and chain degrees differ");
    require(w.dim() == t.dim(), "form and chain dimensions differ");
    require(w.has_values(), "form has no pointwise values; evaluate one of its stages");
    const int d = t.dim(), m = t.degree();
    const double h = t.cell(), vol = std::pow(h, m);
    std::vector<std::pair<Face, double>> faces(t.terms().begin(), t.terms().end());
    std::vector<double> v(faces.size());
    parallel_for(faces.size(), [&](std::size_t k) {
        const auto& [f, c] = faces[k];
        v[k] = c * vol * detail::eval_face(w, w.slot(f.axes), face_corner(f, t.level(), d), f.axis_list(d), h);
    });
    return tree_sum(v);
}

// <omega, T> over a simplicial chain of degree at most 2.
inline double form_eval(const SampledForm& w, const SimplicialChain& t) {
    require(w.degree() == t.degree(), "form and chain degrees differ");
    require(w.dim() == t.dim(), "form and chain dimensions differ");
    require(w.has_values(), "form has no pointwise values; evaluate one of its stages");
    const int d = t.dim(), m = t.degree();
    require(m <= 2, "simplicial evaluation supports degree at most 2");
    const auto& sx = t.simplices();
    std::vector<double> v(sx.size());
    parallel_for(sx.size(), [&](std::size_t k) {
        const auto& s = sx[k];
        // quadrature nodes (barycentric offsets) with weights summing to 1
        std::vector<std::pair<Point, double>> nodes;
        if (m == 0) {
            nodes.push_back({s.v[0], 1.0});
        } else if (m == 1) {
            for (double g : detail::kGauss) {
                Point x{};
                for (int i = 0; i < d; ++i) x[i] = s.v[0][i] + g * (s.v[1][i] - s.v[0][i]);
                nodes.push_back({x, 0.5});
            }
        } else {
            // collapsed square: (u, w) -> (u, w (1 - u)), Jacobian 1 - u, renormalised to mean
            for (double u : detail::kGauss)
                for (double ww : detail::kGauss) {
                    Point x{};
                    for (int i = 0; i < d; ++i)
                        x[i] = s.v[0][i] + u * (s.v[1][i] - s.v[0][i]) + ww * (1 - u) * (s.v[2][i] - s.v[0][i]);
                    nodes.push_back({x, 0.5 * (1 - u)});
                }
        }
        double total = 0;
        for (std::size_t c = 0; c < w.masks().size(); ++c) {
            const auto ax = Face{Index{}, w.masks()[c]}.axis_list(d);
            // I-minor of the edge matrix, divided by m!
            double minor = 1;
            if (m == 1) minor = s.v[1][ax[0]] - s.v[0][ax[0]];
            if (m == 2) {
                const double a = s.v[1][ax[0]] - s.v[0][ax[0]], b = s.v[2][ax[0]] - s.v[0][ax[0]];
                const double e = s.v[1][ax[1]] - s.v[0][ax[1]], f = s.v[2][ax[1]] - s.v[0][ax[1]];
                minor = 0.5 * (a * f - b * e);
            }
            if (minor == 0) continue;
            double q = 0;
            for (auto& [x, wt] : nodes) q += wt * w.components()[c].value(x);
            total += minor * q;
        }
        v[k] = s.c * total;
    });
    return tree_sum(v);
}

struct StokesCheck {
    double lhs = 0, rhs = 0, gap = 0;
};

// <d omega, T> against <omega, dT>.
inline StokesCheck stokes_check(const SampledForm& w, const CubicalChain& t, double h = 1e-6) {
    StokesCheck s;
    s.lhs = form_eval(exterior_derivative(w, h), t);
    s.rhs = form_eval(w, boundary(t));
    s.gap = std::abs(s.lhs - s.rhs);
    return s;
}

// Both sides summed over the parts of a decomposition.
inline StokesCheck stokes_check(const SampledForm& w, const std::vector<CubicalChain>& parts, double h = 1e-6) {
    StokesCheck s;
    const auto dw = exterior_derivative(w, h);
    for (auto& p : parts) {
        if (p.empty()) continue;
        s.lhs += form_eval(dw, p);
        s.rhs += form_eval(w, boundary(p));
    }
    s.gap = std::abs(s.lhs - s.rhs);
    return s;
}

// Riemann sums at levels 1..L with their Cauchy increments.
struct CauchySeries {
    std::vector<double> sums;       // S_1 .. S_L
    std::vector<double> increments; // |S_{l+1} - S_l|
    double value = 0;
    double ratio = 0;               // fitted geometric ratio of the increments
    double theory = 0;              // predicted ratio
    double tail = 0;                // extrapolated |S_inf - S_L|, infinite when not converging
    bool cauchy = false;
};

namespace detail {

// Allowance for summation rounding in a reported error bar.
inline double rounding_floor(double value) { return 1e-12 * std::max(1.0, std::abs(value)); }

// Ratio fitted on the second half of the increments.
inline void finish_cauchy(CauchySeries& c, double theory) {
    for (std::size_t i = 1; i < c.sums.size(); ++i) c.increments.push_back(std::abs(c.sums[i] - c.sums[i - 1]));
    c.value = c.sums.back();
    c.theory = theory;
    const std::size_t n = c.increments.size();
    const std::size_t from = n >= 6 ? n / 2 : 0;
    c.ratio = n >= 2 ? fit_ratio(std::vector<double>(c.increments.begin() + long(from), c.increments.end())) : 0.0;
    const double last = n ? c.increments.back() : 0.0;
    if (n && std::all_of(c.increments.begin() + long(from), c.increments.end(), [](double x) { return x <= 1e-13; })) {
        c.ratio = 0;
        c.tail = last + rounding_floor(c.value);
        c.cauchy = true;
        return;
    }
    c.cauchy = n >= 3 && c.ratio < 1;
    c.tail = c.cauchy ? last * c.ratio / (1 - c.ratio) + rounding_floor(c.value) : INFINITY;
}

} // namespace detail

// Left-point sums sum g0(t_i) (g1(t_{i+1}) - g1(t_i)) on the dyadic grids of [0, 1].
inline CauchySeries young_1d(const HolderFunction& g0, const HolderFunction& g1, int level) {
    require(g0.in_dim() == 1 && g1.in_dim() == 1, "young integration needs functions of one variable");
    require(level >= 1 && level <= 26, "level must lie in 1..26");
    const std::size_t n = (std::size_t(1) << level) + 1;
    std::vector<double> a(n), b(n);
    parallel_for(n, [&](std::size_t i) {
        const double t = std::ldexp(double(i), -level);
        a[i] = g0(t);
        b[i] = g1(t);
    });
    CauchySeries c;
    for (int l = 1; l <= level; ++l) {
        const std::size_t stride = std::size_t(1) << (level - l), cells = std::size_t(1) << l;
        std::vector<double> v(cells);
        for (std::size_t i = 0; i < cells; ++i) v[i] = a[i * stride] * (b[(i + 1) * stride] - b[i * stride]);
        c.sums.push_back(tree_sum(v));
    }
    detail::finish_cauchy(c, std::exp2(-(g0.gamma() + g1.gamma() - 1)));
    return c;
}

namespace detail {

// det M computed on the rows sorted lexicographically, so that swapping two rows
// flips the sign exactly.
inline double alternating_det(std::vector<std::vector<double>> rows) {
    const std::size_t n = rows.size();
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    std::sort(p.begin(), p.end(), [&](std::size_t x, std::size_t y) { return rows[x] < rows[y]; });
    int inv = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (p[i] > p[j]) ++inv;
    double det;
    if (n == 1) {
        det = rows[p[0]][0];
    } else if (n == 2) {
        det = rows[p[0]][0] * rows[p[1]][1] - rows[p[0]][1] * rows[p[1]][0];
    } else {
        Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) M(long(i), long(j)) = rows[p[i]][j];
        det = M.partialPivLu().determinant();
    }
    return inv % 2 ? -det : det;
}

} // namespace detail

// sum over dyadic L-cubes Q of g0(x_Q) det M(Q), M_ij = g^i(x_Q + 2^-L e_j) - g^i(x_Q).
inline CauchySeries zust_integral(const std::vector<HolderFunction>& g, int level) {
    require(g.size() >= 2, "zust integral needs g^0 and at least one more function");
    const int d = int(g.size()) - 1;
    for (auto& f : g) require(f.in_dim() == d && f.out_dim() == 1, "zust integral needs d+1 scalar functions on [0,1]^d");
    require(level >= 1 && d * level <= 24, "zust level too fine");
    const std::size_t side = (std::size_t(1) << level) + 1;
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= side;
    std::vector<std::vector<double>> val(std::size_t(d + 1), std::vector<double>(total));
    auto point = [&](std::size_t o) {
        Point x{};
        for (int i = 0; i < d; ++i) {
            x[i] = std::ldexp(double(o % side), -level);
            o /= side;
        }
        return x;
    };
    parallel_for(total, [&](std::size_t o) {
        const Point x = point(o);
        for (int k = 0; k <= d; ++k) val[std::size_t(k)][o] = g[std::size_t(k)](x)[0];
    });
    std::vector<std::size_t> stride_axis(static_cast<std::size_t>(d));
    for (int i = 0, s = 1; i < d; ++i, s *= int(side)) stride_axis[std::size_t(i)] = std::size_t(s);
    CauchySeries c;
    for (int l = 1; l <= level; ++l) {
        const std::size_t step = std::size_t(1) << (level - l), cells_side = std::size_t(1) << l;
        std::size_t cells = 1;
        for (int i = 0; i < d; ++i) cells *= cells_side;
        std::vector<double> v(cells);
        parallel_for(cells, [&](std::size_t q) {
            std::size_t o = 0, rest = q;
            for (int i = 0; i < d; ++i) {
                o += (rest % cells_side) * step * stride_axis[std::size_t(i)];
                rest /= cells_side;
            }
            std::vector<std::vector<double>> M(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d)));
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    M[std::size_t(i)][std::size_t(j)] =
                        val[std::size_t(i + 1)][o + step * stride_axis[std::size_t(j)]] - val[std::size_t(i + 1)][o];
            v[q] = val[0][o] * detail::alternating_det(std::move(M));
        });
        c.sums.push_back(tree_sum(v));
    }
    double asum = 0;
    for (auto& f : g) asum += f.gamma();
    detail::finish_cauchy(c, std::exp2(-(asum - d)));
    return c;
}

// d g^1 ^ ... ^ d g^d as a top form known through its stages det(grad g^i_n).
inline SampledForm differential_product(const std::vector<HolderFunction>& g) {
    const int d = int(g.size());
    require(d >= 1, "need at least one function");
    double a = 0;
    for (auto& f : g) {
        require(f.in_dim() == d && f.out_dim() == 1, "differentials need scalar functions on R^d");
        a += f.gamma();
    }
    SampledForm w(d, d, a - (d - 1), {FormComponent{}}, "dg");
    w.with_stages([g, d](int n) {
        std::vector<std::shared_ptr<Mollified>> ms;
        for (auto& f : g) {
            ms.push_back(std::make_shared<Mollified>(f, dyadic(n)));
            ms.back()->prepare(f.domain());
        }
        FormComponent c;
        c.value = [ms, d](const Point& x) {
            std::vector<std::vector<double>> M;
            for (auto& m : ms) {
                const auto J = m->jacobian(x);
                M.emplace_back(J[0].begin(), J[0].begin() + d);
            }
            return detail::alternating_det(std::move(M));
        };
        return SampledForm(d, d, 1.0, {c}, "dg_" + std::to_string(n));
    });
    return w;
}

struct WedgeSeries {
    std::string omega, eta;
    double alpha = 0, beta = 0;
    std::vector<double> terms;    // <w_{n+1} ^ (e_{n+1} - e_n) + (w_{n+1} - w_n) ^ e_n, T>
    std::vector<double> partial;  // S_0 = <w_0 ^ e_0, T>, S_{n+1} = S_n + terms[n]
    int truncation = 0;           // index of the last partial sum
    double envelope = 0;          // K with |term_n| <= K 2^{n(1-alpha-beta)}
    double tail = 0;              // bound on |S_inf - value|
    double value = 0;
};

namespace detail {

inline CubicalChain at_least_level(const CubicalChain& t, int level) {
    return t.level() >= level ? t : at_level(t, level);
}

} // namespace detail

// The paraproduct series for omega ^ eta evaluated on T; stage n is integrated on
// the level n+2 grid (or T's own level when finer).
inline WedgeSeries wedge_eval(const SampledForm& w, const SampledForm& e, const CubicalChain& t, int n_max, double tol = 0,
                              int min_terms = 4) {
    if (!(w.alpha() + e.alpha() > 1)) fail(ErrorKind::precondition, "wedge needs alpha + beta > 1");
    require(w.degree() + e.degree() == t.degree(), "form degrees must add up to the chain degree");
    require(n_max >= 1 && n_max <= 12, "n_max must lie in 1..12");
    WedgeSeries s;
    s.omega = w.name();
    s.eta = e.name();
    s.alpha = w.alpha();
    s.beta = e.alpha();
    const double r = std::exp2(1 - s.alpha - s.beta);
    SampledForm w0 = w.stage(0), e0 = e.stage(0);
    s.partial.push_back(form_eval(wedge(w0, e0), detail::at_least_level(t, 2)));
    for (int n = 0; n < n_max; ++n) {
        SampledForm w1 = w.stage(n + 1), e1 = e.stage(n + 1);
        const CubicalChain tn = detail::at_least_level(t, n + 2);
        const SampledForm term = combine(1.0, wedge(w1, combine(1.0, e1, -1.0, e0)), 1.0, wedge(combine(1.0, w1, -1.0, w0), e0));
        s.terms.push_back(form_eval(term, tn));
        s.partial.push_back(s.partial.back() + s.terms.back());
        w0 = std::move(w1);
        e0 = std::move(e1);
        s.envelope = 0;
        for (std::size_t k = 0; k < s.terms.size(); ++k) s.envelope = std::max(s.envelope, std::abs(s.terms[k]) / std::pow(r, double(k)));
        const double nn = double(s.terms.size());
        s.tail = std::max(s.envelope * std::pow(r, nn) / (1 - r), std::abs(s.terms.back())) +
                 detail::rounding_floor(s.partial.back());
        if (int(s.terms.size()) >= min_terms && s.tail < tol) break;
    }
    s.truncation = int(s.partial.size()) - 1;
    s.value = s.partial.back();
    return s;
}

// <w ^ e, dT> - <dw ^ e, T> - (-1)^m <w ^ de, T> on smooth stage n of both forms
// (n < 0: the forms as given, which must be smooth).
inline double leibniz_check(const SampledForm& w, const SampledForm& e, const CubicalChain& t, int n = -1) {
    require(w.degree() + e.degree() + 1 == t.degree(), "degrees must add up to deg T - 1");
    const SampledForm a = n < 0 ? w : w.stage(n), b = n < 0 ? e : e.stage(n);
    const double lhs = form_eval(wedge(a, b), boundary(t));
    double rhs = 0;
    if (a.degree() < a.dim()) rhs += form_eval(wedge(exterior_derivative(a), b), t);
    if (b.degree() < b.dim()) rhs += (a.degree() % 2 ? -1.0 : 1.0) * form_eval(wedge(a, exterior_derivative(b)), t);
    return std::abs(lhs - rhs);
}

} // namespace fraccur
