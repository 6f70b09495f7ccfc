#pragma once
// Independent reference computations used only by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fraccur/grid.hpp"

namespace oracle {

using namespace fraccur;

// Faces of the complex of all cells in the box [lo, hi), listed by brute force.
inline std::vector<Face> box_faces(int d, int m, const Index& lo, const Index& hi) {
    std::vector<Face> out;
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
        if (popcount(mask) != m) continue;
        Index cur = lo;
        for (;;) {
            Face f;
            f.axes = mask;
            f.base = cur;
            out.push_back(f);
            int i = 0;
            for (; i < d; ++i) {
                const std::int64_t top = ((mask >> i) & 1u) ? hi[i] - 1 : hi[i];
                if (cur[i] < top) {
                    ++cur[i];
                    break;
                }
                cur[i] = lo[i];
            }
            if (i == d) break;
        }
    }
    return out;
}

// Solves a k x k system by Gaussian elimination; false when singular.
inline bool solve(std::vector<double> a, std::vector<double> b, int k, std::vector<double>& x) {
    for (int c = 0; c < k; ++c) {
        int p = c;
        for (int r = c + 1; r < k; ++r)
            if (std::abs(a[r * k + c]) > std::abs(a[p * k + c])) p = r;
        if (std::abs(a[p * k + c]) < 1e-12) return false;
        for (int j = 0; j < k; ++j) std::swap(a[c * k + j], a[p * k + j]);
        std::swap(b[c], b[p]);
        for (int r = 0; r < k; ++r) {
            if (r == c) continue;
            const double f = a[r * k + c] / a[c * k + c];
            for (int j = 0; j < k; ++j) a[r * k + j] -= f * a[c * k + j];
            b[r] -= f * b[c];
        }
    }
    x.resize(std::size_t(k));
    for (int i = 0; i < k; ++i) x[i] = b[i] / a[i * k + i];
    return true;
}

// Flat norm on a box complex by enumerating every vertex of the hyperplane
// arrangement {s_j = 0} u {(dS)_i = t_i}. The objective is convex piecewise linear
// and coercive, so its minimum sits on one of those vertices.
inline double flat_norm_enum(const CubicalChain& t, const Index& lo, const Index& hi) {
    const int d = t.dim(), m = t.degree();
    const double h = t.cell();
    auto rf = box_faces(d, m, lo, hi), sf = box_faces(d, m + 1, lo, hi);
    const int P = int(sf.size()), Q = int(rf.size());
    std::map<Face, int> rid;
    for (int i = 0; i < Q; ++i) rid[rf[i]] = i;
    std::vector<double> B(std::size_t(Q * P), 0.0), tv(std::size_t(Q), 0.0);
    for (int j = 0; j < P; ++j) {
        CubicalChain one(d, m + 1, t.level());
        one.add(sf[j], 1.0);
        const CubicalChain bd = boundary(one);
        for (auto& [g, c] : bd.terms()) B[rid.at(g) * P + j] = c;
    }
    for (auto& [f, c] : t.terms()) tv[rid.at(f)] = c;
    const double ws = std::pow(h, m + 1), wr = std::pow(h, m);
    auto objective = [&](const std::vector<double>& s) {
        double v = 0;
        for (int j = 0; j < P; ++j) v += ws * std::abs(s[j]);
        for (int i = 0; i < Q; ++i) {
            double bs = 0;
            for (int j = 0; j < P; ++j) bs += B[i * P + j] * s[j];
            v += wr * std::abs(tv[i] - bs);
        }
        return v;
    };
    const int H = P + Q;
    double best = objective(std::vector<double>(std::size_t(P), 0.0));
    std::vector<int> pick(static_cast<std::size_t>(P));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == P) {
            std::vector<double> a(std::size_t(P * P), 0.0), b(std::size_t(P), 0.0), x;
            for (int r = 0; r < P; ++r) {
                const int hidx = pick[r];
                if (hidx < P)
                    a[r * P + hidx] = 1.0;
                else {
                    for (int j = 0; j < P; ++j) a[r * P + j] = B[(hidx - P) * P + j];
                    b[r] = tv[hidx - P];
                }
            }
            if (solve(a, b, P, x)) best = std::min(best, objective(x));
            return;
        }
        for (int k = start; k <= H - (P - depth); ++k) {
            pick[depth] = k;
            rec(k + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

// Cell-pair integral of |x - y|^-p on the line for cells [a, a+1) h and [b, b+1) h,
// b > a: inner integral by hand, outer by tanh-sinh (handles the touching case).
inline double pair_1d(std::int64_t a, std::int64_t b, double h, double p) {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double x0 = double(a) * h, x1 = x0 + h, y0 = double(b) * h, y1 = y0 + h;
    // xc is the signed distance to the nearer endpoint, which keeps y0 - x accurate
    auto inner = [&](double x, double xc) {
        const double g = xc > 0 ? (y0 - x1) + xc : (y0 - x0) + xc;
        return (std::pow(g, 1 - p) - std::pow(y1 - x, 1 - p)) / (p - 1);
    };
    return ts.integrate(inner, x0, x1);
}

// Integral over cell [a, a+1) h of the integral over y outside [lo, hi) h.
inline double outside_1d(std::int64_t a, std::int64_t lo, std::int64_t hi, double h, double p) {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double L = double(lo) * h, R = double(hi) * h, x0 = double(a) * h, x1 = x0 + h;
    auto inner = [&](double, double xc) {
        const double r = xc > 0 ? (R - x1) + xc : (R - x0) + xc;
        const double l = xc > 0 ? (x1 - L) - xc : (x0 - L) - xc;
        return (std::pow(r, 1 - p) + std::pow(l, 1 - p)) / (p - 1);
    };
    return ts.integrate(inner, x0, x1);
}

// Gagliardo double integral of a piecewise constant function on the line, summed
// over ordered pairs of cells.
inline double gagliardo_1d(const std::vector<double>& u, std::int64_t lo, int level, double alpha) {
    const double h = std::ldexp(1.0, -level), p = 2 - alpha;
    const auto n = std::int64_t(u.size());
    double s = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const std::int64_t a = std::min(i, j), b = std::max(i, j);
            s += std::abs(u[std::size_t(i)] - u[std::size_t(j)]) * pair_1d(lo + a, lo + b, h, p);
        }
        s += 2 * std::abs(u[std::size_t(i)]) * outside_1d(lo + i, lo, lo + n, h, p);
    }
    return s;
}

// Fractional perimeter 2 int_R int_{R^c} |x - y|^-p of the rectangle [0,W] x [0,H]
// in the plane. For x inside, the inner integral is (1/(p-2)) times the integral over
// directions of R(theta)^(2-p); per side that is delta^(2-p) int cos^(p-2), which is an
// incomplete beta function.
inline double rect_perimeter(double W, double H, double p) {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double q = p - 2, b = 0.5 * (q + 1);
    const double B = std::beta(0.5, b);
    auto F = [&](double phi) { // int_0^phi cos^q
        const double s = std::sin(phi);
        return (phi < 0 ? -0.5 : 0.5) * B * boost::math::ibeta(0.5, b, s * s);
    };
    auto psi = [&](double x1, double x2) {
        const double side[4][3] = {{W - x1, -x2, H - x2}, {x1, -x2, H - x2}, {H - x2, -x1, W - x1}, {x2, -x1, W - x1}};
        double s = 0;
        for (auto& sd : side) s += std::pow(sd[0], 2 - p) * (F(std::atan(sd[2] / sd[0])) - F(std::atan(sd[1] / sd[0])));
        return s / (p - 2);
    };
    // quarter rectangle by symmetry; x = c u^m flattens the edge singularity delta^(2-p)
    const double m = 1 / (3 - p);
    auto outer = [&](double u) {
        const double x1 = 0.5 * W * std::pow(u, m), j1 = 0.5 * W * m * std::pow(u, m - 1);
        return j1 * ts.integrate(
                        [&](double v) {
                            const double x2 = 0.5 * H * std::pow(v, m), j2 = 0.5 * H * m * std::pow(v, m - 1);
                            return x1 > 0 && x2 > 0 ? j2 * psi(x1, x2) : 0.0; // underflow: negligible measure
                        },
                        0.0, 1.0, 1e-9);
    };
    return 8 * ts.integrate(outer, 0.0, 1.0, 1e-8);
}

// Closed segment vs closed axis-aligned square, by separating axes (the two
// coordinate axes and the segment normal).
inline bool segment_hits_square(const Point& a, const Point& b, double x0, double y0, double h) {
    if (std::max(a[0], b[0]) < x0 || std::min(a[0], b[0]) > x0 + h) return false;
    if (std::max(a[1], b[1]) < y0 || std::min(a[1], b[1]) > y0 + h) return false;
    const double nx = -(b[1] - a[1]), ny = b[0] - a[0];
    const double c = nx * a[0] + ny * a[1];
    double lo = INFINITY, hi = -INFINITY;
    for (double dx : {0.0, h})
        for (double dy : {0.0, h}) {
            const double v = nx * (x0 + dx) + ny * (y0 + dy);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    return lo <= c && c <= hi;
}

// Closed planar k-cubes meeting any of the segments, by scanning every cube of a window.
inline std::int64_t segment_box_count(const std::vector<std::pair<Point, Point>>& segs, int k, double wlo, double whi) {
    const double h = std::ldexp(1.0, -k);
    const auto i0 = std::int64_t(std::floor(wlo / h)) - 1, i1 = std::int64_t(std::ceil(whi / h)) + 1;
    std::int64_t n = 0;
    for (auto i = i0; i <= i1; ++i)
        for (auto j = i0; j <= i1; ++j)
            for (auto& [a, b] : segs)
                if (segment_hits_square(a, b, double(i) * h, double(j) * h, h)) {
                    ++n;
                    break;
                }
    return n;
}

// Closed planar k-cubes meeting any closed rectangle {lo, hi}.
inline std::int64_t rect_box_count(const std::vector<std::pair<Point, Point>>& rects, int k, double wlo, double whi) {
    const double h = std::ldexp(1.0, -k);
    const auto i0 = std::int64_t(std::floor(wlo / h)) - 1, i1 = std::int64_t(std::ceil(whi / h)) + 1;
    std::int64_t n = 0;
    for (auto i = i0; i <= i1; ++i)
        for (auto j = i0; j <= i1; ++j)
            for (auto& [lo, hi] : rects) {
                const double x = double(i) * h, y = double(j) * h;
                if (x <= hi[0] && x + h >= lo[0] && y <= hi[1] && y + h >= lo[1]) {
                    ++n;
                    break;
                }
            }
    return n;
}

// Whitney cubes by exhaustive scan: a k-cube l is taken when every sample point
// j 2^-s strictly inside its open 3^d block is in U and no coarser cube taken
// contains it. Cubes are scanned over [-1, 2^k] per axis of the window [0, 1].
inline std::map<int, std::set<std::vector<std::int64_t>>> whitney_scan(int d, const std::function<bool(const Point&)>& in,
                                                                      int kmax, int s) {
    std::map<int, std::set<std::vector<std::int64_t>>> out;
    auto covered = [&](std::vector<std::int64_t> l, int k) {
        for (int j = k - 1; j >= 0; --j) {
            for (auto& v : l) v = v >= 0 ? v / 2 : -((-v + 1) / 2);
            if (out[j].count(l)) return true;
        }
        return false;
    };
    for (int k = 0; k <= kmax; ++k) {
        const std::int64_t n = std::int64_t(1) << k, w = std::int64_t(1) << (s - k);
        std::vector<std::int64_t> l(static_cast<std::size_t>(d), -1);
        for (;;) {
            if (!covered(l, k)) {
                bool ok = true;
                std::vector<std::int64_t> j(static_cast<std::size_t>(d));
                for (int i = 0; i < d; ++i) j[std::size_t(i)] = (l[std::size_t(i)] - 1) * w + 1;
                while (ok) {
                    Point x{};
                    for (int i = 0; i < d; ++i) x[i] = std::ldexp(double(j[std::size_t(i)]), -s);
                    if (!in(x)) ok = false;
                    int i = 0;
                    for (; i < d; ++i) {
                        if (j[std::size_t(i)] < (l[std::size_t(i)] + 2) * w - 1) {
                            ++j[std::size_t(i)];
                            break;
                        }
                        j[std::size_t(i)] = (l[std::size_t(i)] - 1) * w + 1;
                    }
                    if (i == d) break;
                }
                if (ok) out[k].insert(l);
            }
            int i = 0;
            for (; i < d; ++i) {
                if (l[std::size_t(i)] < n) {
                    ++l[std::size_t(i)];
                    break;
                }
                l[std::size_t(i)] = -1;
            }
            if (i == d) break;
        }
    }
    return out;
}

} // namespace oracle
