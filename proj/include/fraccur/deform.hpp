#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "domain.hpp"
#include "flatnorm.hpp"
#include "grid.hpp"

namespace fraccur {

// T = P + dR + S with P a cubical chain on the grid of side eps = 2^-k.
struct DeformResult {
    CubicalChain P;
    SimplicialChain R; // degree m+1
    SimplicialChain S; // degree m
    double eps = 0;
    double ratio_R = 0;   // M(R) / (eps M(T))
    double ratio_S = 0;   // M(S) / (eps M(dT)), 0 when dT = 0
    double ratio_P = 0;   // M(P) / M(T)
    double support_C = 0; // max distance of supp P from the box of supp T, in units of eps
};

namespace detail {

// Sequential radial projections: every piece lying in the relative interior of a
// j-face is pushed onto the face boundary from a slightly jittered centre, for
// j = d down to m+1; the straight-line homotopies give R and S.
class Deformer {
public:
    Deformer(int d, int k) : d_(d), k_(k), eps_(dyadic(k)) {
        static const double dir[kMaxDim] = {0.7310, 0.4127, 0.5939, 0.2683};
        for (int i = 0; i < kMaxDim; ++i) jit_[i] = dyadic(k + 8) * dir[i];
    }

    struct Seg {
        Point a, b;
        double c;
    };
    struct Pt {
        Point x;
        double c;
    };

    bool on_grid(double x) const {
        const double y = std::ldexp(x, k_);
        return y == std::floor(y);
    }

    std::uint32_t free_axes(const Point& x) const {
        std::uint32_t m = 0;
        for (int i = 0; i < d_; ++i)
            if (!on_grid(x[i])) m |= 1u << i;
        return m;
    }
    std::uint32_t free_axes(const Seg& s) const {
        std::uint32_t m = 0;
        for (int i = 0; i < d_; ++i)
            if (!(s.a[i] == s.b[i] && on_grid(s.a[i]))) m |= 1u << i;
        return m;
    }

    // Splits a segment at every grid hyperplane it crosses.
    void split(const Seg& s, std::vector<Seg>& out) const {
        struct Cut {
            double t;
            int axis;
            double val;
        };
        std::vector<Cut> cuts;
        for (int i = 0; i < d_; ++i) {
            if (s.a[i] == s.b[i]) continue;
            const double lo = std::min(s.a[i], s.b[i]), hi = std::max(s.a[i], s.b[i]);
            for (double n = std::floor(std::ldexp(lo, k_)) + 1; std::ldexp(n, -k_) < hi; n += 1) {
                const double v = std::ldexp(n, -k_);
                if (v <= lo) continue;
                cuts.push_back({(v - s.a[i]) / (s.b[i] - s.a[i]), i, v});
            }
        }
        std::sort(cuts.begin(), cuts.end(), [](const Cut& x, const Cut& y) { return x.t < y.t; });
        Point prev = s.a;
        std::size_t j = 0;
        while (j < cuts.size()) {
            const double t = cuts[j].t;
            Point q{};
            for (int i = 0; i < d_; ++i) q[i] = s.a[i] + t * (s.b[i] - s.a[i]);
            std::size_t e = j;
            while (e < cuts.size() && cuts[e].t - t < 1e-13) {
                q[cuts[e].axis] = cuts[e].val;
                ++e;
            }
            out.push_back({prev, q, s.c});
            prev = q;
            j = e;
        }
        out.push_back({prev, s.b, s.c});
    }

    struct FaceFrame {
        std::uint32_t free;
        Point lo, hi, c;
    };

    FaceFrame frame(std::uint32_t free, const Point& mid) const {
        FaceFrame f{free, {}, {}, {}};
        for (int i = 0; i < d_; ++i) {
            if ((free >> i) & 1u) {
                const double n = std::floor(std::ldexp(mid[i], k_));
                f.lo[i] = std::ldexp(n, -k_);
                f.hi[i] = std::ldexp(n + 1, -k_);
                f.c[i] = 0.5 * (f.lo[i] + f.hi[i]) + jit_[i];
            } else {
                f.lo[i] = f.hi[i] = f.c[i] = mid[i];
            }
        }
        return f;
    }

    double rho(const FaceFrame& f, const Point& x, int* arg = nullptr, int* side = nullptr) const {
        double r = -1;
        for (int i = 0; i < d_; ++i) {
            if (!((f.free >> i) & 1u)) continue;
            const double up = (x[i] - f.c[i]) / (f.hi[i] - f.c[i]);
            const double dn = (f.c[i] - x[i]) / (f.c[i] - f.lo[i]);
            if (up > r) {
                r = up;
                if (arg) *arg = i, *side = 1;
            }
            if (dn > r) {
                r = dn;
                if (arg) *arg = i, *side = -1;
            }
        }
        return r;
    }

    Point project(const FaceFrame& f, const Point& x) const {
        int arg = -1, side = 0;
        const double r = rho(f, x, &arg, &side);
        if (r >= 1.0) return x; // already on the face boundary
        if (r < 1e-9) fail(ErrorKind::numeric, "radial projection through the face centre");
        Point y = x;
        for (int i = 0; i < d_; ++i)
            if ((f.free >> i) & 1u) {
                y[i] = f.c[i] + (x[i] - f.c[i]) / r;
                const double tol = 1e-12 * eps_;
                if (std::abs(y[i] - f.hi[i]) <= tol) y[i] = f.hi[i];
                if (std::abs(y[i] - f.lo[i]) <= tol) y[i] = f.lo[i];
                y[i] = std::clamp(y[i], f.lo[i], f.hi[i]);
            }
        y[arg] = side > 0 ? f.hi[arg] : f.lo[arg];
        return y;
    }

    // Projects one segment lying in a j-face; appends image pieces and homotopy triangles.
    void project_seg(const Seg& s, std::vector<Seg>& img, SimplicialChain& hom) const {
        Point mid{};
        for (int i = 0; i < d_; ++i) mid[i] = 0.5 * (s.a[i] + s.b[i]);
        const FaceFrame f = frame(free_axes(s), mid);
        // breakpoints of rho along the segment: pairwise crossings of the linear pieces
        std::vector<std::pair<double, double>> lin; // value at 0, slope
        for (int i = 0; i < d_; ++i) {
            if (!((f.free >> i) & 1u)) continue;
            const double du = s.b[i] - s.a[i];
            lin.push_back({(s.a[i] - f.c[i]) / (f.hi[i] - f.c[i]), du / (f.hi[i] - f.c[i])});
            lin.push_back({(f.c[i] - s.a[i]) / (f.c[i] - f.lo[i]), -du / (f.c[i] - f.lo[i])});
        }
        std::vector<double> ts{0.0, 1.0};
        for (std::size_t p = 0; p < lin.size(); ++p)
            for (std::size_t q = p + 1; q < lin.size(); ++q) {
                const double ds = lin[p].second - lin[q].second;
                if (ds == 0) continue;
                const double t = (lin[q].first - lin[p].first) / ds;
                if (t > 1e-12 && t < 1 - 1e-12) ts.push_back(t);
            }
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end(), [](double x, double y) { return y - x < 1e-13; }), ts.end());
        ts.back() = 1.0;
        std::vector<Point> xs, ys;
        for (double t : ts) {
            Point x = s.a;
            if (t == 1.0)
                x = s.b;
            else if (t > 0.0)
                for (int i = 0; i < d_; ++i) x[i] = s.a[i] + t * (s.b[i] - s.a[i]);
            xs.push_back(x);
            ys.push_back(project(f, x));
        }
        for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
            // the whole sub-interval lands on the facet chosen at its midpoint
            Point xm{};
            for (int i = 0; i < d_; ++i) xm[i] = 0.5 * (xs[j][i] + xs[j + 1][i]);
            int arg = -1, side = 0;
            rho(f, xm, &arg, &side);
            Point y0 = ys[j], y1 = ys[j + 1];
            y0[arg] = y1[arg] = side > 0 ? f.hi[arg] : f.lo[arg];
            img.push_back({y0, y1, s.c});
            hom.add({xs[j], y0, y1}, s.c);
            hom.add({xs[j], y1, xs[j + 1]}, s.c);
        }
    }

    int d_, k_;
    double eps_;
    Point jit_{};
};

} // namespace detail

inline DeformResult deform(const SimplicialChain& t_in, int k) {
    const int d = t_in.dim(), m = t_in.degree();
    require(m <= 1, "deformation supports chains of degree 0 and 1");
    require(m < d || t_in.empty(), "deformation of top-degree simplicial chains is not supported");
    SimplicialChain t = t_in;
    t.canonicalize();
    detail::Deformer df(d, k);
    DeformResult res;
    res.eps = df.eps_;
    res.P = CubicalChain(d, m, k);
    SimplicialChain hom_t(d, m + 1);          // sum of homotopies of T_j
    SimplicialChain hom_b(d, 1);              // homotopies of boundary points (m = 1 only)

    using Seg = detail::Deformer::Seg;
    using Pt = detail::Deformer::Pt;

    auto project_points = [&](std::vector<Pt>& pts, int j, SimplicialChain& hom) {
        for (auto& p : pts) {
            const std::uint32_t fr = df.free_axes(p.x);
            if (popcount(fr) != j) continue;
            const auto f = df.frame(fr, p.x);
            const Point y = df.project(f, p.x);
            hom.add({p.x, y}, p.c);
            p.x = y;
        }
    };

    if (m == 0) {
        std::vector<Pt> pts;
        for (auto& s : t.simplices()) pts.push_back({s.v[0], s.c});
        for (int j = d; j >= 1; --j) project_points(pts, j, hom_t);
        for (auto& p : pts) {
            Face f;
            for (int i = 0; i < d; ++i) f.base[i] = std::int64_t(std::llround(std::ldexp(p.x[i], k)));
            res.P.add(f, p.c);
        }
        hom_t.canonicalize();
        res.R = hom_t;
        res.R *= -1.0;
        res.S = SimplicialChain(d, 0);
    } else {
        std::vector<Seg> segs;
        for (auto& s : t.simplices()) df.split({s.v[0], s.v[1], s.c}, segs);
        SimplicialChain bd = boundary(t);
        std::vector<Pt> bpts;
        for (auto& s : bd.simplices()) bpts.push_back({s.v[0], s.c});
        for (int j = d; j >= 2; --j) {
            std::vector<Seg> next;
            next.reserve(segs.size());
            for (auto& s : segs) {
                if (popcount(df.free_axes(s)) == j)
                    df.project_seg(s, next, hom_t);
                else
                    next.push_back(s);
            }
            segs.swap(next);
            project_points(bpts, j, hom_b);
        }
        // T' now lies in the 1-skeleton; sweeping its boundary into the vertices
        // along edges makes T' + H(dT') constant on every edge.
        SimplicialChain h1(d, 1);
        project_points(bpts, 1, h1);
        for (auto& s : h1.simplices()) segs.push_back({s.v[0], s.v[1], s.c});
        std::map<Face, double> acc;
        for (auto& s : segs) {
            const std::uint32_t fr = df.free_axes(s);
            if (fr == 0) continue;
            if (popcount(fr) != 1) fail(ErrorKind::internal, "deformation left a piece off the 1-skeleton");
            const int ax = __builtin_ctz(fr);
            Face f;
            f.axes = fr;
            for (int i = 0; i < d; ++i) {
                const double mid = 0.5 * (s.a[i] + s.b[i]);
                f.base[i] = i == ax ? std::int64_t(std::floor(std::ldexp(mid, k))) : std::int64_t(std::llround(std::ldexp(s.a[i], k)));
            }
            acc[f] += s.c * (s.b[ax] - s.a[ax]) / df.eps_;
        }
        for (auto& [f, c] : acc) res.P.add(f, c);
        res.P.prune(1e-9);
        // snap coefficients that are integers up to rounding
        CubicalChain snapped(d, m, k);
        for (auto& [f, c] : res.P.terms()) {
            const double r = std::round(c);
            snapped.add(f, std::abs(c - r) < 1e-9 * std::max(1.0, std::abs(c)) ? r : c);
        }
        res.P = snapped;
        hom_t.canonicalize();
        hom_b.append(h1);
        hom_b.canonicalize();
        res.R = hom_t;
        res.R *= -1.0;
        res.S = hom_b;
        res.S *= -1.0;
    }

    const double mt = mass(t);
    res.ratio_R = mt > 0 ? mass(res.R) / (res.eps * mt) : 0.0;
    const double mb = m > 0 ? mass(boundary(t)) : 0.0;
    res.ratio_S = mb > 0 ? mass(res.S) / (res.eps * mb) : 0.0;
    res.ratio_P = mt > 0 ? mass(res.P) / mt : 0.0;
    if (!t.empty() && !res.P.empty()) {
        const Box tb = support_box(t);
        const Box pb = support_box(res.P);
        double worst = 0;
        for (int i = 0; i < d; ++i) worst = std::max({worst, tb.lo[i] - pb.lo[i], pb.hi[i] - tb.hi[i]});
        res.support_C = worst / res.eps;
    }
    return res;
}

inline DeformResult deform(const CubicalChain& t, int k) {
    if (t.level() <= k) {
        DeformResult r;
        r.eps = dyadic(k);
        r.P = at_level(t, k);
        r.R = SimplicialChain(t.dim(), std::min(t.degree() + 1, t.dim()));
        r.S = SimplicialChain(t.dim(), t.degree());
        r.ratio_P = 1.0;
        return r;
    }
    return deform(triangulate(t), k);
}

struct FlatDistance {
    double value = 0;       // flat norm of the grid difference
    double error_bound = 0; // M(R1) + M(S1) + M(R2) + M(S2)
    FlatNormResult detail;
};

// Flat distance between two simplicial chains, both deformed onto the grid of
// level k. The true distance lies within error_bound of value. `band` limits the
// LP to cells within that many cells of the difference (0: padded bounding box).
inline FlatDistance flat_distance(const SimplicialChain& a, const SimplicialChain& b, int k, int band = 0,
                                  const FlatNormOptions& opt = {}) {
    require(a.dim() == b.dim() && a.degree() == b.degree(), "chains must share dimension and degree");
    auto da = deform(a, k), db = deform(b, k);
    FlatDistance out;
    out.error_bound = mass(da.R) + mass(da.S) + mass(db.R) + mass(db.S);
    CubicalChain diff = da.P - db.P;
    diff.prune(1e-12);
    if (diff.empty()) return out;
    ComplexDomain dom = band > 0 ? ComplexDomain::band(diff, band) : ComplexDomain::around(diff, 2);
    out.detail = flat_norm(diff, dom, opt);
    out.value = out.detail.value;
    return out;
}

} // namespace fraccur
