#pragma once

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "domain.hpp"
#include "grid.hpp"
#include "lp.hpp"
#include "netflow.hpp"

namespace fraccur {

enum class FlatBackend { automatic, dense, network };

struct FlatNormOptions {
    FlatBackend backend = FlatBackend::automatic;
    double tol = 1e-9;
    long max_iter = 2000000;
    std::size_t dense_limit = 30'000'000; // rows * cols of the dense tableau
};

struct FlatNormResult {
    double value = 0;      // M(S) + M(T - dS) evaluated on the witness
    double lp_value = 0;   // optimum reported by the solver
    double gap = 0;        // |value - lp_value|, plus the duality gap for the dense solver
    CubicalChain witness;  // S, degree m+1 (empty for top-degree chains)
    CubicalChain residual; // T - dS
    long iterations = 0;
    std::string backend;
    std::size_t cells = 0;
};

namespace detail {

inline void check_support(const CubicalChain& t, const ComplexDomain& dom) {
    for (auto& [f, c] : t.terms())
        if (!dom.contains_face(f)) fail(ErrorKind::precondition, "chain support escapes the flat-norm domain");
}

inline FlatNormResult finish(const CubicalChain& t, CubicalChain s, double lp_value, long iters, const char* name,
                             std::size_t cells) {
    FlatNormResult r;
    s.prune(1e-13);
    r.residual = t - boundary(s);
    r.residual.prune(1e-13);
    r.value = mass(s) + mass(r.residual);
    r.witness = std::move(s);
    r.lp_value = lp_value;
    r.gap = std::abs(r.value - lp_value);
    r.iterations = iters;
    r.backend = name;
    r.cells = cells;
    return r;
}

// Enumerates all faces of the given degree in the complex.
inline std::vector<Face> complex_faces(const ComplexDomain& dom, int m) {
    const int d = dom.dim();
    std::map<Face, int> seen;
    for (std::size_t id = 0; id < dom.cell_count(); ++id) {
        const Index q = dom.cell_at(id);
        for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
            if (popcount(mask) != m) continue;
            const int free = d - m;
            for (std::uint32_t s = 0; s < (1u << free); ++s) {
                Face f;
                f.axes = mask;
                f.base = q;
                int j = 0;
                for (int i = 0; i < d; ++i)
                    if (!((mask >> i) & 1u)) {
                        if ((s >> j) & 1u) f.base[i] += 1;
                        ++j;
                    }
                seen.emplace(f, 0);
            }
        }
    }
    std::vector<Face> out;
    out.reserve(seen.size());
    for (auto& [f, z] : seen) out.push_back(f);
    return out;
}

inline FlatNormResult flat_dense(const CubicalChain& t, const ComplexDomain& dom, const FlatNormOptions& opt) {
    const int d = t.dim(), m = t.degree();
    const double h = t.cell();
    auto rfaces = complex_faces(dom, m);
    auto sfaces = complex_faces(dom, m + 1);
    std::map<Face, int> rid;
    for (std::size_t i = 0; i < rfaces.size(); ++i) rid.emplace(rfaces[i], int(i));
    const int Q = int(rfaces.size()), P = int(sfaces.size());
    if (std::size_t(Q) * std::size_t(2 * P + 2 * Q) > opt.dense_limit)
        fail(ErrorKind::precondition, "flat-norm complex too large for the dense solver");
    DenseLp lp;
    lp.rows = Q;
    lp.cols = 2 * P + 2 * Q;
    lp.a.assign(std::size_t(lp.rows) * std::size_t(lp.cols), 0.0);
    lp.b.assign(std::size_t(Q), 0.0);
    lp.c.assign(std::size_t(lp.cols), 0.0);
    // units of h^m: weight h for S faces, 1 for residual faces
    for (int j = 0; j < P; ++j) {
        lp.c[2 * j] = lp.c[2 * j + 1] = h;
        CubicalChain one(d, m + 1, t.level());
        one.add(sfaces[j], 1.0);
        const CubicalChain bd = boundary(one);
        for (auto& [g, c] : bd.terms()) {
            const int r = rid.at(g);
            lp.at(r, 2 * j) += c;
            lp.at(r, 2 * j + 1) -= c;
        }
    }
    for (int i = 0; i < Q; ++i) {
        lp.c[2 * P + 2 * i] = lp.c[2 * P + 2 * i + 1] = 1.0;
        lp.at(i, 2 * P + 2 * i) = 1.0;
        lp.at(i, 2 * P + 2 * i + 1) = -1.0;
    }
    for (auto& [f, c] : t.terms()) lp.b[rid.at(f)] = c;
    LpResult res = solve_lp(lp, opt.tol, opt.max_iter);
    if (res.status != LpStatus::optimal) fail(ErrorKind::numeric, "dense flat-norm LP did not reach optimality");
    CubicalChain s(d, m + 1, t.level());
    for (int j = 0; j < P; ++j) s.add(sfaces[j], res.x[2 * j] - res.x[2 * j + 1]);
    const double scale = std::pow(h, m);
    FlatNormResult out = finish(t, std::move(s), res.objective * scale, res.iterations, "dense-simplex", dom.cell_count());
    out.gap += std::abs(res.objective - res.dual_objective) * scale;
    return out;
}

// Codimension one: S = sum p_Q [[Q]] over cells. The dual is a max-weight
// circulation on the cell adjacency graph plus an exterior node, solved as
// min-cost flow; the optimal potentials are the coefficients p_Q.
inline FlatNormResult flat_codim1(const CubicalChain& t, const ComplexDomain& dom, const FlatNormOptions&) {
    const int d = t.dim();
    const double h = t.cell();
    const long C = long(dom.cell_count());
    const int X = int(C);
    NetworkSimplex ns(int(C) + 1);
    double shift = 0; // sum theta * w
    auto arc = [&](int u, int v, double w, double theta) {
        ns.add_arc(u, v, 2 * w, -theta);
        ns.add_supply(u, w);
        ns.add_supply(v, -w);
        shift += theta * w;
    };
    const std::uint32_t all = full_mask(d);
    for (long id = 0; id < C; ++id) {
        const Index q = dom.cell_at(std::size_t(id));
        for (int i = 0; i < d; ++i) {
            const double sg = (i % 2 == 0) ? 1.0 : -1.0;
            Face back;
            back.base = q;
            back.axes = all & ~(1u << i);
            Index below = q;
            below[i] -= 1;
            const long lid = dom.cell_id(below);
            arc(lid >= 0 ? int(lid) : X, int(id), 1.0, sg * t.coeff(back));
            Index above = q;
            above[i] += 1;
            if (dom.cell_id(above) < 0) {
                Face front = back;
                front.base[i] += 1;
                arc(int(id), X, 1.0, sg * t.coeff(front));
            }
        }
        arc(int(id), X, h, 0.0);
    }
    auto st = ns.run();
    if (st != NetworkSimplex::Status::optimal) fail(ErrorKind::numeric, "flat-norm flow problem did not solve");
    const double value_units = -ns.total_cost() - shift;
    CubicalChain s(d, d, t.level());
    const double px = ns.potential(X);
    for (long id = 0; id < C; ++id) {
        Face f;
        f.base = dom.cell_at(std::size_t(id));
        f.axes = all;
        s.add(f, ns.potential(int(id)) - px);
    }
    return finish(t, std::move(s), value_units * std::pow(h, d - 1), ns.pivots(), "network-codim1", std::size_t(C));
}

// Degree zero: transshipment between vertices along complex edges (cost h per unit
// length) with a discard node reachable from every vertex at cost 1.
inline FlatNormResult flat_points(const CubicalChain& t, const ComplexDomain& dom, const FlatNormOptions&) {
    const int d = t.dim();
    const double h = t.cell();
    std::unordered_map<Index, int, IndexHash> vid;
    std::vector<Index> verts;
    for (std::size_t id = 0; id < dom.cell_count(); ++id) {
        const Index q = dom.cell_at(id);
        for (std::uint32_t s = 0; s < (1u << d); ++s) {
            Index v = q;
            for (int i = 0; i < d; ++i)
                if ((s >> i) & 1u) v[i] += 1;
            if (vid.emplace(v, int(verts.size())).second) verts.push_back(v);
        }
    }
    const int V = int(verts.size()), Z = V;
    NetworkSimplex ns(V + 1);
    struct Edge {
        int a, b, fwd, bwd;
        Face f;
    };
    std::vector<Edge> edges;
    for (int a = 0; a < V; ++a)
        for (int i = 0; i < d; ++i) {
            Face f;
            f.base = verts[a];
            f.axes = 1u << i;
            if (!dom.contains_face(f)) continue;
            Index w = verts[a];
            w[i] += 1;
            const int b = vid.at(w);
            Edge e{a, b, ns.add_arc(a, b, NetworkSimplex::kInf, h), ns.add_arc(b, a, NetworkSimplex::kInf, h), f};
            edges.push_back(e);
        }
    for (int v = 0; v < V; ++v) {
        ns.add_arc(v, Z, NetworkSimplex::kInf, 1.0);
        ns.add_arc(Z, v, NetworkSimplex::kInf, 1.0);
    }
    double total = 0;
    for (auto& [f, c] : t.terms()) {
        ns.add_supply(vid.at(f.base), -c);
        total += c;
    }
    ns.add_supply(Z, total);
    if (ns.run() != NetworkSimplex::Status::optimal) fail(ErrorKind::numeric, "flat-norm flow problem did not solve");
    CubicalChain s(d, 1, t.level());
    for (auto& e : edges) s.add(e.f, ns.flow(e.fwd) - ns.flow(e.bwd));
    return finish(t, std::move(s), ns.total_cost(), ns.pivots(), "network-points", dom.cell_count());
}

} // namespace detail

inline FlatNormResult flat_norm(const CubicalChain& t_in, const ComplexDomain& dom, const FlatNormOptions& opt = {}) {
    require(t_in.dim() == dom.dim(), "domain dimension does not match the chain");
    require(dom.level() >= t_in.level(), "chain is finer than the flat-norm domain");
    CubicalChain t = at_level(t_in, dom.level());
    detail::check_support(t, dom);
    const int d = t.dim(), m = t.degree();
    if (m == d) {
        // no (d+1)-faces in R^d: the flat norm is the mass
        FlatNormResult r;
        r.value = r.lp_value = mass(t);
        r.witness = CubicalChain(d, d, t.level());
        r.residual = t;
        r.backend = "top-degree";
        r.cells = dom.cell_count();
        return r;
    }
    if (t.empty()) {
        FlatNormResult r;
        r.witness = CubicalChain(d, m + 1, t.level());
        r.residual = t;
        r.backend = "empty";
        return r;
    }
    const bool net_ok = (m == d - 1) || (m == 0);
    FlatBackend b = opt.backend;
    if (b == FlatBackend::automatic) b = net_ok ? FlatBackend::network : FlatBackend::dense;
    if (b == FlatBackend::network) {
        require(net_ok, "network backend needs degree 0 or codimension 1");
        return m == d - 1 ? detail::flat_codim1(t, dom, opt) : detail::flat_points(t, dom, opt);
    }
    return detail::flat_dense(t, dom, opt);
}

inline FlatNormResult flat_norm(const CubicalChain& t, int pad = 2, const FlatNormOptions& opt = {}) {
    if (t.empty()) {
        FlatNormResult r;
        r.residual = t;
        r.backend = "empty";
        return r;
    }
    return flat_norm(t, ComplexDomain::around(t, pad), opt);
}

// Constant in ||T||_beta <= C(alpha, beta) M(T)^{...}: head sum plus tail sum.
inline double lp_constant(double alpha, double beta) {
    require(alpha > 0 && alpha < beta && beta <= 1, "lp_constant needs 0 < alpha < beta <= 1");
    const double q = std::exp2(beta - alpha);
    return q / (q - 1.0) + 1.0 / (1.0 - std::exp2(-alpha));
}

struct PartStats {
    double mass = 0, bmass = 0, flat = 0, normal = 0;
};

// A finite family of normal parts with the quantities the cost functionals need.
// `exact` is false when the numbers are upper bounds rather than computed values.
struct Decomposition {
    int d = 1, m = 0;
    std::vector<PartStats> parts;
    std::vector<CubicalChain> chains;
    bool exact = true;
};

inline PartStats part_stats(const CubicalChain& t, const FlatNormOptions& opt = {}) {
    PartStats s;
    s.mass = mass(t);
    s.bmass = t.degree() > 0 ? mass(boundary(t)) : 0.0;
    s.normal = s.mass + s.bmass;
    s.flat = t.empty() ? 0.0 : flat_norm(t, 2, opt).value;
    return s;
}

inline Decomposition decompose_exact(const std::vector<CubicalChain>& parts, const FlatNormOptions& opt = {}) {
    require(!parts.empty(), "decomposition needs at least one part");
    Decomposition dec;
    dec.d = parts.front().dim();
    dec.m = parts.front().degree();
    for (auto& p : parts) {
        require(p.dim() == dec.d && p.degree() == dec.m, "parts must share dimension and degree");
        dec.parts.push_back(part_stats(p, opt));
        dec.chains.push_back(p);
    }
    return dec;
}

inline CubicalChain decomposition_sum(const Decomposition& dec) {
    require(!dec.chains.empty(), "decomposition carries no chains");
    CubicalChain s = dec.chains.front();
    for (std::size_t i = 1; i < dec.chains.size(); ++i) s = s + dec.chains[i];
    return s;
}

inline void check_alpha(double alpha) { require(alpha > 0 && alpha < 1, "alpha must lie in (0, 1)"); }

// sum N(T_i)^{1-alpha} F(T_i)^alpha
inline double frac_cost(const Decomposition& dec, double alpha) {
    check_alpha(alpha);
    double s = 0;
    for (auto& p : dec.parts) s += std::pow(p.normal, 1 - alpha) * std::pow(p.flat, alpha);
    return s;
}

// sum M(dT_i)^{1-alpha} M(T_i)^alpha
inline double frac_cost_tilde(const Decomposition& dec, double alpha) {
    check_alpha(alpha);
    double s = 0;
    for (auto& p : dec.parts) s += std::pow(p.bmass, 1 - alpha) * std::pow(p.mass, alpha);
    return s;
}

inline CubicalChain restrict_half(const CubicalChain& t, int axis, std::int64_t cut, bool lower) {
    CubicalChain out(t.dim(), t.degree(), t.level());
    for (auto& [f, c] : t.terms())
        if ((f.base[axis] < cut) == lower) out.add(f, c);
    return out;
}

struct ImproveResult {
    Decomposition best;
    std::vector<double> history; // cost after each accepted move
};

// Local search on a decomposition: merge neighbouring parts or split a part across
// the median of its widest axis whenever the fractional cost drops.
inline ImproveResult improve_decomposition(const std::vector<CubicalChain>& parts, double alpha, int max_rounds = 20,
                                           const FlatNormOptions& opt = {}) {
    check_alpha(alpha);
    std::vector<CubicalChain> cur = parts;
    std::vector<PartStats> st;
    for (auto& p : cur) st.push_back(part_stats(p, opt));
    auto term = [&](const PartStats& s) { return std::pow(s.normal, 1 - alpha) * std::pow(s.flat, alpha); };
    auto total = [&] {
        double s = 0;
        for (auto& x : st) s += term(x);
        return s;
    };
    ImproveResult out;
    out.history.push_back(total());
    for (int round = 0; round < max_rounds; ++round) {
        bool moved = false;
        for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
            CubicalChain merged = cur[i] + cur[i + 1];
            PartStats ms = part_stats(merged, opt);
            if (term(ms) < term(st[i]) + term(st[i + 1]) - 1e-12) {
                cur[i] = merged;
                st[i] = ms;
                cur.erase(cur.begin() + long(i) + 1);
                st.erase(st.begin() + long(i) + 1);
                moved = true;
                out.history.push_back(total());
            }
        }
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (cur[i].size() < 2) continue;
            const int d = cur[i].dim();
            int axis = 0;
            std::int64_t best_w = -1;
            std::vector<std::int64_t> coords;
            for (int a = 0; a < d; ++a) {
                std::int64_t lo = INT64_MAX, hi = INT64_MIN;
                for (auto& [f, c] : cur[i].terms()) {
                    lo = std::min(lo, f.base[a]);
                    hi = std::max(hi, f.base[a]);
                }
                if (hi - lo > best_w) {
                    best_w = hi - lo;
                    axis = a;
                }
            }
            if (best_w <= 0) continue;
            for (auto& [f, c] : cur[i].terms()) coords.push_back(f.base[axis]);
            std::nth_element(coords.begin(), coords.begin() + long(coords.size() / 2), coords.end());
            const std::int64_t cut = coords[coords.size() / 2];
            CubicalChain lo = restrict_half(cur[i], axis, cut, true), hi = restrict_half(cur[i], axis, cut, false);
            if (lo.empty() || hi.empty()) continue;
            PartStats sl = part_stats(lo, opt), sh = part_stats(hi, opt);
            if (term(sl) + term(sh) < term(st[i]) - 1e-12) {
                cur[i] = lo;
                st[i] = sl;
                cur.insert(cur.begin() + long(i) + 1, hi);
                st.insert(st.begin() + long(i) + 1, sh);
                moved = true;
                out.history.push_back(total());
            }
        }
        if (!moved) break;
    }
    out.best.d = cur.front().dim();
    out.best.m = cur.front().degree();
    out.best.parts = st;
    out.best.chains = cur;
    return out;
}

} // namespace fraccur
