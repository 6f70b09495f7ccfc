#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "deform.hpp"
#include "fractal.hpp"
#include "grid.hpp"
#include "holder.hpp"
#include "parallel.hpp"
#include "sobolev.hpp"

namespace fraccur {

// Vertex pushforward. Cubical chains are Kuhn-triangulated first.
inline SimplicialChain lipschitz_pushforward(const HolderFunction& f, const SimplicialChain& t) {
    require(f.in_dim() == t.dim(), "map and chain live in different dimensions");
    for (auto& s : t.simplices())
        for (auto& p : s.v)
            if (!f.in_domain(p)) fail(ErrorKind::precondition, "chain vertex outside the domain of " + f.name());
    return map_vertices(t, f.out_dim(), [&](const Point& x) { return f(x); });
}

inline SimplicialChain lipschitz_pushforward(const HolderFunction& f, const CubicalChain& t) {
    return lipschitz_pushforward(f, triangulate(t));
}

struct PushforwardRun {
    SimplicialChain T;
    std::string map;
    int m = 0;
    double alpha = 0, beta = 0, gamma = 1;
    std::vector<SimplicialChain> stages;  // f_n# T for n = 0, 1, ...
    std::vector<double> distances;        // F(f_{n+1}# T - f_n# T)
    std::vector<double> distance_error;   // deformation error of each distance
    std::vector<double> sup_step;         // sup |f_{n+1} - f_n| over the vertices
    double ratio = 0, tail = 0;
    bool converged = false;
    std::string verdict;

    const SimplicialChain& result() const { return stages.back(); }
};

namespace detail {

inline double pushforward_beta(int m, double alpha, double gamma) {
    require(gamma > 0 && gamma <= 1, "Holder exponent must lie in (0, 1]");
    require(alpha >= 0 && alpha < 1, "alpha must lie in [0, 1)");
    return (m + alpha) / gamma - m;
}

// Rate fitted on the distances from index 2 on when there are enough of them;
// infinite when fewer than three of them are positive. Coarse stages can snap to
// the same grid chain and read 0.
inline double stage_ratio(const std::vector<double>& dist) {
    const std::size_t from = dist.size() >= 5 ? 2 : 0;
    const std::vector<double> tail(dist.begin() + long(from), dist.end());
    if (std::count_if(tail.begin(), tail.end(), [](double x) { return x > 0; }) < 3) return INFINITY;
    return fit_ratio(tail);
}

} // namespace detail

// f_n# T for the mollified maps f_n = f * Phi_{2^-n}, with T refined to mesh 2^-n
// before mapping, and the flat distances between consecutive stages measured on
// the level n+2 grid.
inline PushforwardRun holder_pushforward(const HolderFunction& f, double gamma, const SimplicialChain& T, double alpha,
                                         int n_max, double tol, int min_stages = 4) {
    require(f.in_dim() == T.dim(), "map and chain live in different dimensions");
    require(n_max >= 1 && n_max <= 14, "n_max must lie in 1..14");
    require(T.degree() <= 1, "stage distances need chains of degree 0 or 1");
    PushforwardRun run;
    run.T = T;
    run.map = f.name();
    run.m = T.degree();
    run.alpha = alpha;
    run.gamma = gamma;
    run.beta = detail::pushforward_beta(run.m, alpha, gamma);
    if (!(run.beta < 1)) {
        std::ostringstream msg;
        msg << "exponent condition (m+alpha)/gamma < m+1 fails: beta = " << run.beta;
        fail(ErrorKind::precondition, msg.str());
    }
    for (auto& s : T.simplices())
        for (auto& p : s.v)
            if (!f.in_domain(p)) fail(ErrorKind::precondition, "chain vertex outside the domain of " + f.name());

    std::unique_ptr<Mollified> prev;
    SimplicialChain prevT;
    for (int n = 0; n <= n_max; ++n) {
        auto fn = std::make_unique<Mollified>(f, dyadic(n));
        const Box sb = support_box(T);
        fn->prepare(sb);
        SimplicialChain Tn = subdivide(T, dyadic(n));
        std::vector<Point> verts;
        for (auto& s : Tn.simplices())
            for (auto& p : s.v) verts.push_back(p);
        std::vector<Point> img(verts.size());
        parallel_for(verts.size(), [&](std::size_t i) { img[i] = (*fn)(verts[i]); });
        SimplicialChain out(f.out_dim(), run.m);
        std::size_t k = 0;
        for (auto& s : Tn.simplices()) {
            std::vector<Point> v(img.begin() + long(k), img.begin() + long(k + s.v.size()));
            k += s.v.size();
            out.add(std::move(v), s.c);
        }
        out.canonicalize();
        if (prev) {
            std::vector<double> step(verts.size());
            parallel_for(verts.size(), [&](std::size_t i) { step[i] = dist((*prev)(verts[i]), img[i], f.out_dim()); });
            const double sup = verts.empty() ? 0.0 : *std::max_element(step.begin(), step.end());
            const int level = n + 1;
            const int band = 2 + int(std::ceil(std::ldexp(sup, level)));
            const auto fd = flat_distance(out, run.stages.back(), level, band);
            run.distances.push_back(fd.value);
            run.distance_error.push_back(fd.error_bound);
            run.sup_step.push_back(sup);
        }
        run.stages.push_back(std::move(out));
        prev = std::move(fn);

        if (int(run.distances.size()) >= min_stages - 1 && run.distances.size() >= 3) {
            run.ratio = detail::stage_ratio(run.distances);
            const double last = run.distances.back();
            if (last <= 1e-12 * std::max(1.0, mass(run.stages.back())) && run.sup_step.back() <= 1e-12) {
                // collapsed: the maps already agree to rounding
                run.ratio = 0;
                run.tail = last;
                run.converged = true;
                break;
            }
            run.tail = run.ratio < 1 ? last * run.ratio / (1 - run.ratio) : INFINITY;
            if (run.ratio < 1 && run.tail < tol) {
                run.converged = true;
                break;
            }
        }
    }
    if (!run.converged && run.distances.size() >= 3) {
        run.ratio = detail::stage_ratio(run.distances);
        const double last = run.distances.back();
        run.tail = run.ratio < 1 ? last * run.ratio / (1 - run.ratio) : INFINITY;
        run.converged = run.ratio < 1;
    }
    std::ostringstream v;
    if (run.converged)
        v << "converged(rate " << run.ratio << ")";
    else
        v << "rate-not-establishable";
    run.verdict = v.str();
    return run;
}

inline PushforwardRun holder_pushforward(const HolderFunction& f, double gamma, const CubicalChain& T, double alpha,
                                         int n_max, double tol, int min_stages = 4) {
    return holder_pushforward(f, gamma, triangulate(T), alpha, n_max, tol, min_stages);
}

struct TopPushforward {
    PushforwardRun boundary_run; // the Holder pushforward of dT
    Point apex{};
    SimplicialChain chain;       // apex cone over the image of dT
    double boundary_gap = 0;     // M(d chain - image of dT)
};

// The top-degree image a x f_#(dT), a the barycentre of the image bounding box.
inline TopPushforward top_pushforward(const HolderFunction& f, double gamma, const CubicalChain& T, double alpha, int n_max,
                                      double tol) {
    const int dp = f.out_dim();
    require(T.degree() == dp, "top pushforward needs a chain of the codomain dimension");
    require(dp == 2, "top pushforward is implemented for planar codomains");
    const double b = detail::pushforward_beta(dp - 1, alpha, gamma);
    if (!(b < 1)) fail(ErrorKind::precondition, "exponent condition (d'-1+alpha)/gamma < d' fails");
    TopPushforward out;
    out.boundary_run = holder_pushforward(f, gamma, triangulate(boundary(T)), alpha, n_max, tol);
    const SimplicialChain& S = out.boundary_run.result();
    const Box bb = support_box(S);
    for (int i = 0; i < dp; ++i) out.apex[i] = 0.5 * (bb.lo[i] + bb.hi[i]);
    out.chain = cone(out.apex, S);
    SimplicialChain gap = boundary(out.chain) - S;
    gap.canonicalize();
    out.boundary_gap = mass(gap);
    return out;
}

namespace detail {

// Signed area of a triangle clipped to [x0,x1] x [y0,y1].
inline double clipped_area(const Point& a, const Point& b, const Point& c, double x0, double x1, double y0, double y1) {
    std::vector<std::array<double, 2>> poly{{a[0], a[1]}, {b[0], b[1]}, {c[0], c[1]}}, next;
    auto clip = [&](int axis, double v, bool keep_above) {
        next.clear();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const auto& p = poly[i];
            const auto& q = poly[(i + 1) % poly.size()];
            const bool pin = keep_above ? p[axis] >= v : p[axis] <= v;
            const bool qin = keep_above ? q[axis] >= v : q[axis] <= v;
            if (pin) next.push_back(p);
            if (pin != qin) {
                const double t = (v - p[axis]) / (q[axis] - p[axis]);
                next.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
            }
        }
        poly.swap(next);
    };
    clip(0, x0, true);
    if (poly.empty()) return 0;
    clip(0, x1, false);
    if (poly.empty()) return 0;
    clip(1, y0, true);
    if (poly.empty()) return 0;
    clip(1, y1, false);
    double area = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        area += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * area;
}

} // namespace detail

// Cell averages of the density of a planar 2-chain on the grid of `like`.
inline GridFunction chain_density(const SimplicialChain& t, const GridFunction& like) {
    require(t.dim() == 2 && t.degree() == 2, "density needs a planar 2-chain");
    const double h = like.cell();
    const Index lo = like.lo(), hi = like.hi();
    const std::int64_t nx = hi[0] - lo[0];
    // per row of cells, so rows can run in parallel without sharing writes
    std::vector<std::vector<std::size_t>> rows(std::size_t(hi[1] - lo[1]));
    const auto& sx = t.simplices();
    for (std::size_t s = 0; s < sx.size(); ++s) {
        double ylo = INFINITY, yhi = -INFINITY;
        for (auto& p : sx[s].v) {
            ylo = std::min(ylo, p[1]);
            yhi = std::max(yhi, p[1]);
        }
        const std::int64_t r0 = std::max(lo[1], std::int64_t(std::floor(ylo / h))),
                           r1 = std::min(hi[1] - 1, std::int64_t(std::floor(yhi / h)));
        for (std::int64_t r = r0; r <= r1; ++r) rows[std::size_t(r - lo[1])].push_back(s);
    }
    std::vector<double> v(like.size(), 0.0);
    parallel_for(rows.size(), [&](std::size_t r) {
        const double y0 = double(lo[1] + std::int64_t(r)) * h, y1 = y0 + h;
        for (std::size_t s : rows[r]) {
            const auto& x = sx[s];
            double xlo = INFINITY, xhi = -INFINITY;
            for (auto& p : x.v) {
                xlo = std::min(xlo, p[0]);
                xhi = std::max(xhi, p[0]);
            }
            const std::int64_t c0 = std::max(lo[0], std::int64_t(std::floor(xlo / h))),
                               c1 = std::min(hi[0] - 1, std::int64_t(std::floor(xhi / h)));
            for (std::int64_t c = c0; c <= c1; ++c) {
                const double x0 = double(c) * h;
                v[r * std::size_t(nx) + std::size_t(c - lo[0])] +=
                    x.c * detail::clipped_area(x.v[0], x.v[1], x.v[2], x0, x0 + h, y0, y1) / (h * h);
            }
        }
    });
    return GridFunction(2, like.level(), lo, hi, std::move(v));
}

struct DegreeField {
    GridFunction degree;
    GridFunction flagged;   // 1 on boundary-indeterminate cells
    double tolerance = 0;   // distance to f(dU) below which a cell is flagged
    std::size_t curve_points = 0;
    std::size_t flagged_count() const {
        std::size_t n = 0;
        for (std::size_t o = 0; o < flagged.size(); ++o) n += flagged[o] != 0;
        return n;
    }
};

// Closed polygon approximating f(dU): the boundary of the level `u_level` raster of
// U, mapped by f with bisection until consecutive image points are within `step`.
inline std::vector<std::array<Point, 2>> image_curve(const HolderFunction& f, const OccupancySet& U, int u_level,
                                                     double step) {
    require(U.dim() == 2 && f.in_dim() == 2 && f.out_dim() == 2, "degree needs a planar set and a planar map");
    const CubicalChain bd = boundary(to_chain(rasterize(U, u_level)));
    const double h = dyadic(u_level);
    std::vector<std::array<Point, 2>> edges;
    for (auto& [fc, c] : bd.terms()) {
        const int ax = fc.has_axis(0) ? 0 : 1;
        Point a = face_corner(fc, u_level, 2), b = a;
        b[ax] += h;
        if (c < 0) std::swap(a, b);
        for (int rep = 0; rep < int(std::lround(std::abs(c))); ++rep) edges.push_back({a, b});
    }
    std::vector<std::vector<std::array<Point, 2>>> parts(edges.size());
    parallel_for(edges.size(), [&](std::size_t e) {
        struct Piece {
            Point a, b, fa, fb;
            int depth;
        };
        std::vector<Piece> work{{edges[e][0], edges[e][1], f(edges[e][0]), f(edges[e][1]), 0}};
        // depth-first, right half pushed first, so pieces come out in curve order
        while (!work.empty()) {
            Piece p = work.back();
            work.pop_back();
            if (dist(p.fa, p.fb, 2) <= step || p.depth >= 24) {
                parts[e].push_back({p.fa, p.fb});
                continue;
            }
            Point mid{};
            for (int i = 0; i < 2; ++i) mid[i] = 0.5 * (p.a[i] + p.b[i]);
            const Point fm = f(mid);
            work.push_back({mid, p.b, fm, p.fb, p.depth + 1});
            work.push_back({p.a, mid, p.fa, fm, p.depth + 1});
        }
    });
    std::vector<std::array<Point, 2>> out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

// deg(f, U, y) at the centres of the given grid cells, as the winding number of
// f(dU) around y. Winding is counted by signed crossings of the rightward ray from
// y, which equals the angle sum over a closed polygon. Cells whose centre lies
// within two cell diagonals of f(dU) are flagged.
inline DegreeField degree_field(const HolderFunction& f, const OccupancySet& U, int level, const Index& lo, const Index& hi,
                                int u_level = -1) {
    const double h = dyadic(level);
    if (u_level < 0) u_level = level + 2;
    DegreeField out;
    out.tolerance = 2 * std::sqrt(2.0) * h;
    const auto curve = image_curve(f, U, u_level, h / 4);
    out.curve_points = curve.size();
    const std::int64_t nx = hi[0] - lo[0], ny = hi[1] - lo[1];
    require(nx > 0 && ny > 0, "empty degree grid");
    std::vector<double> deg(std::size_t(nx * ny), 0.0), flag(std::size_t(nx * ny), 0.0);
    // crossings per row
    std::vector<std::vector<std::pair<double, int>>> cross(static_cast<std::size_t>(ny));
    for (auto& e : curve) {
        const Point& a = e[0];
        const Point& b = e[1];
        if (a[1] == b[1]) continue;
        const bool up = b[1] > a[1];
        const double ylo = std::min(a[1], b[1]), yhi = std::max(a[1], b[1]);
        // rows whose centre y satisfies ylo <= y < yhi
        std::int64_t r0 = std::int64_t(std::ceil(ylo / h - 0.5)), r1 = std::int64_t(std::ceil(yhi / h - 0.5)) - 1;
        r0 = std::max(r0, lo[1]);
        r1 = std::min(r1, hi[1] - 1);
        for (std::int64_t r = r0; r <= r1; ++r) {
            const double y = (double(r) + 0.5) * h;
            const double x = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            cross[std::size_t(r - lo[1])].push_back({x, up ? 1 : -1});
        }
    }
    parallel_for(std::size_t(ny), [&](std::size_t r) {
        auto& cr = cross[r];
        std::sort(cr.begin(), cr.end());
        // winding at x = sum of signs of crossings to the right of x
        int right = 0;
        for (auto& c : cr) right += c.second;
        std::size_t k = 0;
        for (std::int64_t c = 0; c < nx; ++c) {
            const double x = (double(lo[0] + c) + 0.5) * h;
            while (k < cr.size() && cr[k].first <= x) right -= cr[k++].second;
            deg[r * std::size_t(nx) + std::size_t(c)] = right;
        }
    });
    // flags: cells within tolerance of some curve segment
    const std::int64_t pad = std::int64_t(std::ceil(out.tolerance / h)) + 1;
    for (auto& e : curve) {
        const std::int64_t c0 = std::max(lo[0], std::int64_t(std::floor(std::min(e[0][0], e[1][0]) / h)) - pad),
                           c1 = std::min(hi[0] - 1, std::int64_t(std::floor(std::max(e[0][0], e[1][0]) / h)) + pad),
                           r0 = std::max(lo[1], std::int64_t(std::floor(std::min(e[0][1], e[1][1]) / h)) - pad),
                           r1 = std::min(hi[1] - 1, std::int64_t(std::floor(std::max(e[0][1], e[1][1]) / h)) + pad);
        const double dx = e[1][0] - e[0][0], dy = e[1][1] - e[0][1], len2 = dx * dx + dy * dy;
        for (std::int64_t r = r0; r <= r1; ++r)
            for (std::int64_t c = c0; c <= c1; ++c) {
                const double px = (double(c) + 0.5) * h - e[0][0], py = (double(r) + 0.5) * h - e[0][1];
                const double t = len2 > 0 ? std::clamp((px * dx + py * dy) / len2, 0.0, 1.0) : 0.0;
                if (std::hypot(px - t * dx, py - t * dy) < out.tolerance)
                    flag[std::size_t(r - lo[1]) * std::size_t(nx) + std::size_t(c - lo[0])] = 1;
            }
    }
    out.degree = GridFunction(2, level, lo, hi, std::move(deg));
    out.flagged = GridFunction(2, level, lo, hi, std::move(flag));
    return out;
}

// Grid box at `level` covering the image f(dU), padded by `pad` cells.
inline std::pair<Index, Index> image_grid(const HolderFunction& f, const OccupancySet& U, int level, int pad = 4) {
    const auto curve = image_curve(f, U, std::max(level - 1, 2), dyadic(level));
    double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
    for (auto& e : curve)
        for (auto& p : e)
            for (int i = 0; i < 2; ++i) {
                lo[i] = std::min(lo[i], p[i]);
                hi[i] = std::max(hi[i], p[i]);
            }
    Index a{}, b{};
    for (int i = 0; i < 2; ++i) {
        a[i] = std::int64_t(std::floor(std::ldexp(lo[i], level))) - pad;
        b[i] = std::int64_t(std::ceil(std::ldexp(hi[i], level))) + pad;
    }
    return {a, b};
}

// The W^{1-beta,1} seminorm of a degree field.
inline double degree_regularity(const GridFunction& deg, double beta) { return gagliardo(deg, beta).value; }

struct DegreeAgreement {
    std::size_t compared = 0, agree = 0;
    double fraction() const { return compared ? double(agree) / double(compared) : 1.0; }
};

// Unflagged cells where the degree and a density agree to 1e-6.
inline DegreeAgreement compare_degree(const DegreeField& deg, const GridFunction& density) {
    require(deg.degree.size() == density.size(), "grids differ");
    DegreeAgreement a;
    for (std::size_t o = 0; o < density.size(); ++o) {
        if (deg.flagged[o] != 0) continue;
        ++a.compared;
        a.agree += std::abs(deg.degree[o] - density[o]) < 1e-6;
    }
    return a;
}

} // namespace fraccur
