#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "core.hpp"

namespace fraccur {

// Oriented dyadic m-face: the product over axes in `axes` of [b_i h, b_i h + h],
// with the remaining coordinates fixed at b_i h. Bit i of `axes` is axis i (0-based).
struct Face {
    Index base{};
    std::uint32_t axes = 0;

    int degree() const { return popcount(axes); }
    bool has_axis(int i) const { return (axes >> i) & 1u; }
    std::vector<int> axis_list(int d) const {
        std::vector<int> out;
        for (int i = 0; i < d; ++i)
            if (has_axis(i)) out.push_back(i);
        return out;
    }
    friend bool operator<(const Face& a, const Face& b) {
        if (a.axes != b.axes) return a.axes < b.axes;
        return a.base < b.base;
    }
    friend bool operator==(const Face& a, const Face& b) { return a.axes == b.axes && a.base == b.base; }
};

inline std::uint32_t full_mask(int d) { return (1u << d) - 1u; }

class CubicalChain {
public:
    CubicalChain() = default;
    CubicalChain(int d, int m, int level) : d_(d), m_(m), level_(level) {
        require(d >= 1 && d <= kMaxDim, "ambient dimension must be in 1..4");
        require(m >= 0 && m <= d, "chain degree must be in 0..d");
    }

    int dim() const { return d_; }
    int degree() const { return m_; }
    int level() const { return level_; }
    double cell() const { return dyadic(level_); }
    const std::map<Face, double>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    void add(const Face& f, double c) {
        if (f.degree() != m_) fail(ErrorKind::precondition, "face degree does not match chain degree");
        if (c == 0) return;
        auto it = terms_.find(f);
        if (it == terms_.end())
            terms_.emplace(f, c);
        else if ((it->second += c) == 0)
            terms_.erase(it);
    }

    double coeff(const Face& f) const {
        auto it = terms_.find(f);
        return it == terms_.end() ? 0.0 : it->second;
    }

    // Drops coefficients below rel_tol times the largest magnitude.
    void prune(double rel_tol = 1e-12) {
        double mx = 0;
        for (auto& [f, c] : terms_) mx = std::max(mx, std::abs(c));
        for (auto it = terms_.begin(); it != terms_.end();)
            if (std::abs(it->second) <= rel_tol * mx)
                it = terms_.erase(it);
            else
                ++it;
    }

    CubicalChain& operator*=(double s) {
        if (s == 0) terms_.clear();
        for (auto& [f, c] : terms_) c *= s;
        return *this;
    }

private:
    int d_ = 1, m_ = 0, level_ = 0;
    std::map<Face, double> terms_;
};

// Faces of T split into 2^m children one level finer, same coefficients.
inline CubicalChain refine_once(const CubicalChain& t) {
    CubicalChain out(t.dim(), t.degree(), t.level() + 1);
    const int d = t.dim();
    for (auto& [f, c] : t.terms()) {
        auto ax = f.axis_list(d);
        const int m = int(ax.size());
        for (std::uint32_t s = 0; s < (1u << m); ++s) {
            Face g;
            g.axes = f.axes;
            for (int i = 0; i < d; ++i) g.base[i] = 2 * f.base[i];
            for (int j = 0; j < m; ++j)
                if ((s >> j) & 1u) g.base[ax[j]] += 1;
            out.add(g, c);
        }
    }
    return out;
}

inline CubicalChain refine(const CubicalChain& t, int levels) {
    require(levels >= 0, "refine needs a nonnegative number of levels");
    CubicalChain out = t;
    for (int i = 0; i < levels; ++i) out = refine_once(out);
    return out;
}

inline CubicalChain at_level(const CubicalChain& t, int level) {
    require(level >= t.level(), "cannot coarsen a cubical chain");
    return refine(t, level - t.level());
}

inline CubicalChain add_chains(const CubicalChain& a, const CubicalChain& b, double sb = 1.0) {
    require(a.dim() == b.dim() && a.degree() == b.degree(), "chains must share dimension and degree");
    const int lv = std::max(a.level(), b.level());
    CubicalChain out = at_level(a, lv);
    CubicalChain bb = at_level(b, lv);
    for (auto& [f, c] : bb.terms()) out.add(f, sb * c);
    return out;
}

inline CubicalChain operator+(const CubicalChain& a, const CubicalChain& b) { return add_chains(a, b, 1.0); }
inline CubicalChain operator-(const CubicalChain& a, const CubicalChain& b) { return add_chains(a, b, -1.0); }
inline CubicalChain operator*(double s, CubicalChain a) { return a *= s; }

inline CubicalChain boundary(const CubicalChain& t) {
    if (t.degree() == 0) fail(ErrorKind::precondition, "degree underflow: boundary of a 0-chain");
    CubicalChain out(t.dim(), t.degree() - 1, t.level());
    const int d = t.dim();
    for (auto& [f, c] : t.terms()) {
        int j = 0;
        for (int i = 0; i < d; ++i) {
            if (!f.has_axis(i)) continue;
            const double sgn = (j % 2 == 0) ? 1.0 : -1.0;
            Face back = f;
            back.axes &= ~(1u << i);
            Face front = back;
            front.base[i] += 1;
            out.add(front, sgn * c);
            out.add(back, -sgn * c);
            ++j;
        }
    }
    return out;
}

inline double mass(const CubicalChain& t) {
    double s = 0;
    for (auto& [f, c] : t.terms()) s += std::abs(c);
    return s * std::pow(t.cell(), t.degree());
}

inline double normal_mass(const CubicalChain& t) {
    return mass(t) + (t.degree() > 0 ? mass(boundary(t)) : 0.0);
}

inline bool approx_equal(const CubicalChain& a, const CubicalChain& b, double tol = 1e-12) {
    if (a.dim() != b.dim() || a.degree() != b.degree()) return false;
    CubicalChain diff = a - b;
    double scale = 0;
    for (auto& [f, c] : a.terms()) scale = std::max(scale, std::abs(c));
    for (auto& [f, c] : b.terms()) scale = std::max(scale, std::abs(c));
    for (auto& [f, c] : diff.terms())
        if (std::abs(c) > tol * std::max(1.0, scale)) return false;
    return true;
}

// Same faces read at a coarser level: the geometric image under x -> 2^shift x.
inline CubicalChain rescale_dyadic(const CubicalChain& t, int shift) {
    CubicalChain out(t.dim(), t.degree(), t.level() - shift);
    for (auto& [f, c] : t.terms()) out.add(f, c);
    return out;
}

inline CubicalChain translate_cells(const CubicalChain& t, const Index& off) {
    CubicalChain out(t.dim(), t.degree(), t.level());
    for (auto& [f, c] : t.terms()) {
        Face g = f;
        for (int i = 0; i < t.dim(); ++i) g.base[i] += off[i];
        out.add(g, c);
    }
    return out;
}

struct Box {
    Point lo{}, hi{};
};

inline Box support_box(const CubicalChain& t) {
    Box b;
    const double h = t.cell();
    bool first = true;
    for (auto& [f, c] : t.terms()) {
        for (int i = 0; i < t.dim(); ++i) {
            const double lo = double(f.base[i]) * h;
            const double hi = lo + (f.has_axis(i) ? h : 0.0);
            if (first || lo < b.lo[i]) b.lo[i] = lo;
            if (first || hi > b.hi[i]) b.hi[i] = hi;
        }
        first = false;
    }
    return b;
}

// Oriented simplex [v0, ..., vm] with a real coefficient.
struct Simplex {
    std::vector<Point> v;
    double c = 1.0;
};

inline bool point_less(const Point& a, const Point& b, int d) {
    for (int i = 0; i < d; ++i)
        if (a[i] != b[i]) return a[i] < b[i];
    return false;
}

inline bool point_eq(const Point& a, const Point& b, int d) {
    for (int i = 0; i < d; ++i)
        if (a[i] != b[i]) return false;
    return true;
}

// Unsigned m-volume of the simplex spanned by v (Gram determinant).
inline double simplex_volume(const std::vector<Point>& v, int d) {
    const int m = int(v.size()) - 1;
    if (m <= 0) return 1.0;
    std::vector<double> g(std::size_t(m * m), 0.0);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            double s = 0;
            for (int i = 0; i < d; ++i) s += (v[a + 1][i] - v[0][i]) * (v[b + 1][i] - v[0][i]);
            g[a * m + b] = s;
        }
    // Cholesky-free determinant by Gaussian elimination with partial pivoting.
    double det = 1;
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(g[r * m + col]) > std::abs(g[piv * m + col])) piv = r;
        if (g[piv * m + col] == 0) return 0.0;
        if (piv != col) {
            for (int k = 0; k < m; ++k) std::swap(g[col * m + k], g[piv * m + k]);
            det = -det;
        }
        det *= g[col * m + col];
        for (int r = col + 1; r < m; ++r) {
            const double f = g[r * m + col] / g[col * m + col];
            for (int k = col; k < m; ++k) g[r * m + k] -= f * g[col * m + k];
        }
    }
    double fact = 1;
    for (int i = 2; i <= m; ++i) fact *= i;
    return std::sqrt(std::max(0.0, det)) / fact;
}

class SimplicialChain {
public:
    SimplicialChain() = default;
    SimplicialChain(int d, int m) : d_(d), m_(m) {
        require(d >= 1 && d <= kMaxDim, "ambient dimension must be in 1..4");
        require(m >= 0 && m <= d, "chain degree must be in 0..d");
    }

    int dim() const { return d_; }
    int degree() const { return m_; }
    const std::vector<Simplex>& simplices() const { return s_; }
    std::vector<Simplex>& simplices() { return s_; }
    std::size_t size() const { return s_.size(); }
    bool empty() const { return s_.empty(); }

    void add(std::vector<Point> v, double c) {
        if (int(v.size()) != m_ + 1) fail(ErrorKind::precondition, "simplex has wrong vertex count");
        if (c != 0) s_.push_back(Simplex{std::move(v), c});
    }
    void add(const Simplex& s) { add(s.v, s.c); }
    void append(const SimplicialChain& o, double scale = 1.0) {
        require(o.d_ == d_ && o.m_ == m_, "chains must share dimension and degree");
        for (auto& s : o.s_) add(s.v, s.c * scale);
    }

    // Sorts vertices (folding the permutation sign into the coefficient), merges
    // identical simplices and drops degenerate or negligible terms.
    SimplicialChain& canonicalize(double rel_tol = 1e-12) {
        std::vector<Simplex> tmp;
        tmp.reserve(s_.size());
        for (auto s : s_) {
            // insertion sort keeps track of parity
            bool neg = false;
            for (std::size_t i = 1; i < s.v.size(); ++i)
                for (std::size_t j = i; j > 0 && point_less(s.v[j], s.v[j - 1], d_); --j) {
                    std::swap(s.v[j], s.v[j - 1]);
                    neg = !neg;
                }
            bool degenerate = false;
            for (std::size_t i = 1; i < s.v.size(); ++i)
                if (point_eq(s.v[i], s.v[i - 1], d_)) degenerate = true;
            if (degenerate) continue;
            if (neg) s.c = -s.c;
            tmp.push_back(std::move(s));
        }
        auto key_less = [&](const Simplex& a, const Simplex& b) {
            for (std::size_t i = 0; i < a.v.size(); ++i) {
                if (point_less(a.v[i], b.v[i], d_)) return true;
                if (point_less(b.v[i], a.v[i], d_)) return false;
            }
            return false;
        };
        auto key_eq = [&](const Simplex& a, const Simplex& b) { return !key_less(a, b) && !key_less(b, a); };
        std::stable_sort(tmp.begin(), tmp.end(), key_less);
        std::vector<Simplex> merged;
        for (auto& s : tmp) {
            if (!merged.empty() && key_eq(merged.back(), s))
                merged.back().c += s.c;
            else
                merged.push_back(std::move(s));
        }
        double mx = 0;
        for (auto& s : merged) mx = std::max(mx, std::abs(s.c));
        s_.clear();
        for (auto& s : merged)
            if (std::abs(s.c) > rel_tol * mx) s_.push_back(std::move(s));
        return *this;
    }

    SimplicialChain& operator*=(double k) {
        for (auto& s : s_) s.c *= k;
        return *this;
    }

private:
    int d_ = 1, m_ = 0;
    std::vector<Simplex> s_;
};

inline SimplicialChain operator+(SimplicialChain a, const SimplicialChain& b) {
    a.append(b);
    return a.canonicalize();
}
inline SimplicialChain operator-(SimplicialChain a, const SimplicialChain& b) {
    a.append(b, -1.0);
    return a.canonicalize();
}

inline SimplicialChain boundary(const SimplicialChain& t) {
    if (t.degree() == 0) fail(ErrorKind::precondition, "degree underflow: boundary of a 0-chain");
    SimplicialChain out(t.dim(), t.degree() - 1);
    for (auto& s : t.simplices()) {
        for (std::size_t i = 0; i < s.v.size(); ++i) {
            std::vector<Point> f;
            f.reserve(s.v.size() - 1);
            for (std::size_t j = 0; j < s.v.size(); ++j)
                if (j != i) f.push_back(s.v[j]);
            out.add(std::move(f), (i % 2 == 0) ? s.c : -s.c);
        }
    }
    return out.canonicalize();
}

inline double mass(const SimplicialChain& t) {
    double s = 0;
    for (auto& x : t.simplices()) s += std::abs(x.c) * simplex_volume(x.v, t.dim());
    return s;
}

inline double normal_mass(const SimplicialChain& t) {
    return mass(t) + (t.degree() > 0 ? mass(boundary(t)) : 0.0);
}

inline bool approx_equal(const SimplicialChain& a, const SimplicialChain& b, double tol = 1e-12) {
    if (a.dim() != b.dim() || a.degree() != b.degree()) return false;
    SimplicialChain diff = a;
    diff.append(b, -1.0);
    diff.canonicalize(0.0);
    double scale = 1.0;
    for (auto& s : a.simplices()) scale = std::max(scale, std::abs(s.c));
    for (auto& s : diff.simplices())
        if (std::abs(s.c) > tol * scale) return false;
    return true;
}

inline Box support_box(const SimplicialChain& t) {
    Box b;
    bool first = true;
    for (auto& s : t.simplices())
        for (auto& p : s.v) {
            for (int i = 0; i < t.dim(); ++i) {
                if (first || p[i] < b.lo[i]) b.lo[i] = p[i];
                if (first || p[i] > b.hi[i]) b.hi[i] = p[i];
            }
            first = false;
        }
    return b;
}

inline double diameter(const Box& b, int d) { return dist(b.lo, b.hi, d); }

// Cone a⧼T: each simplex [v0..vm] becomes [a, v0, .., vm].
inline SimplicialChain cone(const Point& apex, const SimplicialChain& t) {
    require(t.degree() < t.dim(), "cone needs degree below the ambient dimension");
    SimplicialChain out(t.dim(), t.degree() + 1);
    for (auto& s : t.simplices()) {
        std::vector<Point> v;
        v.reserve(s.v.size() + 1);
        v.push_back(apex);
        v.insert(v.end(), s.v.begin(), s.v.end());
        out.add(std::move(v), s.c);
    }
    return out.canonicalize();
}

// Total weight T(1) of a 0-chain.
inline double total_weight(const SimplicialChain& t) {
    require(t.degree() == 0, "total weight is defined for 0-chains");
    double s = 0;
    for (auto& x : t.simplices()) s += x.c;
    return s;
}

inline std::vector<std::vector<int>> permutations(int m) {
    std::vector<int> p(static_cast<std::size_t>(m));
    std::iota(p.begin(), p.end(), 0);
    std::vector<std::vector<int>> out;
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return out;
}

inline int permutation_sign(const std::vector<int>& p) {
    int inv = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            if (p[i] > p[j]) ++inv;
    return inv % 2 ? -1 : 1;
}

inline Point face_corner(const Face& f, int level, int d) {
    Point p{};
    const double h = dyadic(level);
    for (int i = 0; i < d; ++i) p[i] = double(f.base[i]) * h;
    return p;
}

// Kuhn triangulation: every m-face becomes m! simplices walking from the lower
// corner along the face axes in permuted order; orientation is the permutation sign.
inline SimplicialChain triangulate(const CubicalChain& t) {
    const int d = t.dim(), m = t.degree();
    SimplicialChain out(d, m);
    const double h = t.cell();
    const auto perms = permutations(m);
    for (auto& [f, c] : t.terms()) {
        const auto ax = f.axis_list(d);
        const Point corner = face_corner(f, t.level(), d);
        for (auto& p : perms) {
            std::vector<Point> v{corner};
            Point cur = corner;
            for (int j = 0; j < m; ++j) {
                cur[ax[p[j]]] += h;
                v.push_back(cur);
            }
            out.add(std::move(v), c * permutation_sign(p));
        }
    }
    return out.canonicalize();
}

// Pushforward of a simplicial chain by a map applied to vertices.
inline SimplicialChain map_vertices(const SimplicialChain& t, int d_out,
                                    const std::function<Point(const Point&)>& f) {
    SimplicialChain out(d_out, t.degree());
    for (auto& s : t.simplices()) {
        std::vector<Point> v;
        v.reserve(s.v.size());
        for (auto& p : s.v) v.push_back(f(p));
        out.add(std::move(v), s.c);
    }
    return out.canonicalize();
}

// Splits every simplex until all edges are at most `max_edge` long (degree <= 2).
inline SimplicialChain subdivide(const SimplicialChain& t, double max_edge) {
    require(t.degree() <= 2, "subdivision supports degree at most 2");
    require(max_edge > 0, "subdivision needs a positive edge length");
    const int d = t.dim();
    SimplicialChain out(d, t.degree());
    auto mid = [&](const Point& a, const Point& b) {
        Point p{};
        for (int i = 0; i < d; ++i) p[i] = 0.5 * (a[i] + b[i]);
        return p;
    };
    for (auto& s : t.simplices()) {
        if (t.degree() == 0) {
            out.add(s);
        } else if (t.degree() == 1) {
            const double len = dist(s.v[0], s.v[1], d);
            const int n = std::max(1, int(std::ceil(len / max_edge)));
            Point prev = s.v[0];
            for (int k = 1; k <= n; ++k) {
                Point q{};
                for (int i = 0; i < d; ++i)
                    q[i] = k == n ? s.v[1][i] : s.v[0][i] + (s.v[1][i] - s.v[0][i]) * double(k) / double(n);
                out.add({prev, q}, s.c);
                prev = q;
            }
        } else {
            std::vector<Simplex> work{s};
            while (!work.empty()) {
                Simplex x = work.back();
                work.pop_back();
                const double e = std::max({dist(x.v[0], x.v[1], d), dist(x.v[1], x.v[2], d), dist(x.v[0], x.v[2], d)});
                if (e <= max_edge) {
                    out.add(x);
                    continue;
                }
                const Point a = x.v[0], b = x.v[1], c = x.v[2];
                const Point ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
                work.push_back({{a, ab, ca}, x.c});
                work.push_back({{ab, b, bc}, x.c});
                work.push_back({{ca, bc, c}, x.c});
                work.push_back({{ab, bc, ca}, x.c});
            }
        }
    }
    return out.canonicalize();
}

} // namespace fraccur
