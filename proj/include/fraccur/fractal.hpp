#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <unordered_set>
#include <vector>

#include "domain.hpp"
#include "flatnorm.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "sobolev.hpp"

namespace fraccur {

struct Segment {
    Point a, b;
};

// A bounded set given one of several ways: a membership oracle (open sets U),
// finite points, segments, closed boxes, or a {0,1} raster. A set may also carry an
// exact description of its boundary.
class OccupancySet {
public:
    enum class Kind { oracle, points, segments, boxes, raster };
    using Oracle = std::function<bool(const Point&)>;

    static OccupancySet from_oracle(int d, const Box& bbox, Oracle f, std::string name = "oracle") {
        OccupancySet s(Kind::oracle, d, std::move(name));
        s.bbox_ = bbox;
        s.oracle_ = std::move(f);
        s.check_bbox();
        return s;
    }
    static OccupancySet from_points(int d, std::vector<Point> pts, std::string name = "points") {
        require(!pts.empty(), "point set is empty");
        OccupancySet s(Kind::points, d, std::move(name));
        s.points_ = std::move(pts);
        for (auto& p : s.points_) s.grow(p);
        return s;
    }
    static OccupancySet from_segments(int d, std::vector<Segment> segs, std::string name = "segments") {
        require(!segs.empty(), "segment set is empty");
        OccupancySet s(Kind::segments, d, std::move(name));
        s.segments_ = std::move(segs);
        for (auto& g : s.segments_) {
            s.grow(g.a);
            s.grow(g.b);
        }
        return s;
    }
    static OccupancySet from_boxes(int d, std::vector<Box> boxes, std::string name = "boxes") {
        require(!boxes.empty(), "box set is empty");
        OccupancySet s(Kind::boxes, d, std::move(name));
        s.boxes_ = std::move(boxes);
        for (auto& b : s.boxes_) {
            for (int i = 0; i < d; ++i) require(b.lo[i] <= b.hi[i], "box with negative extent");
            s.grow(b.lo);
            s.grow(b.hi);
        }
        return s;
    }
    static OccupancySet from_raster(const GridFunction& g, std::string name = "raster") {
        if (!g.is_binary()) fail(ErrorKind::precondition, "raster set needs {0,1} values");
        require(!g.is_zero(), "raster set is empty");
        OccupancySet s(Kind::raster, g.dim(), std::move(name));
        s.raster_ = std::make_shared<GridFunction>(g);
        const double h = g.cell();
        for (std::size_t o = 0; o < g.size(); ++o) {
            if (g[o] == 0) continue;
            const Index c = g.cell_at(o);
            Point lo{}, hi{};
            for (int i = 0; i < g.dim(); ++i) {
                lo[i] = double(c[i]) * h;
                hi[i] = double(c[i] + 1) * h;
            }
            s.grow(lo);
            s.grow(hi);
        }
        return s;
    }

    Kind kind() const { return kind_; }
    int dim() const { return d_; }
    const Box& bbox() const { return bbox_; }
    const std::string& name() const { return name_; }
    const std::vector<Point>& points() const { return points_; }
    const std::vector<Segment>& segments() const { return segments_; }
    const std::vector<Box>& boxes() const { return boxes_; }
    const GridFunction& raster() const { return *raster_; }

    // Membership; for segment and point sets this is never true off a null set.
    bool contains(const Point& x) const {
        switch (kind_) {
        case Kind::oracle: return oracle_(x);
        case Kind::boxes:
            for (auto& b : boxes_) {
                bool in = true;
                for (int i = 0; i < d_ && in; ++i) in = x[i] >= b.lo[i] && x[i] <= b.hi[i];
                if (in) return true;
            }
            return false;
        case Kind::raster: {
            Index c{};
            for (int i = 0; i < d_; ++i) c[i] = std::int64_t(std::floor(std::ldexp(x[i], raster_->level())));
            return raster_->value(c) != 0.0;
        }
        default: return false;
        }
    }

    bool has_boundary() const { return bool(boundary_); }
    const OccupancySet& boundary() const { return *boundary_; }
    OccupancySet& with_boundary(OccupancySet b) {
        require(b.dim() == d_, "boundary dimension mismatch");
        boundary_ = std::make_shared<OccupancySet>(std::move(b));
        return *this;
    }

private:
    OccupancySet(Kind k, int d, std::string name) : kind_(k), d_(d), name_(std::move(name)) {
        require(d >= 1 && d <= 3, "occupancy sets are implemented for d <= 3");
    }
    void grow(const Point& p) {
        for (int i = 0; i < d_; ++i) {
            if (first_ || p[i] < bbox_.lo[i]) bbox_.lo[i] = p[i];
            if (first_ || p[i] > bbox_.hi[i]) bbox_.hi[i] = p[i];
        }
        first_ = false;
    }
    void check_bbox() const {
        for (int i = 0; i < d_; ++i)
            require(std::isfinite(bbox_.lo[i]) && std::isfinite(bbox_.hi[i]) && bbox_.lo[i] <= bbox_.hi[i],
                    "bounding box must be finite and nonempty");
    }

    Kind kind_;
    int d_;
    std::string name_;
    Box bbox_{};
    bool first_ = true;
    Oracle oracle_;
    std::vector<Point> points_;
    std::vector<Segment> segments_;
    std::vector<Box> boxes_;
    std::shared_ptr<GridFunction> raster_;
    std::shared_ptr<OccupancySet> boundary_;
};

namespace detail {

// Closed k-cubes [l, l+1] 2^-k on one axis that contain x.
inline std::pair<std::int64_t, std::int64_t> cubes_at(double x, int k) {
    const double y = std::ldexp(x, k), f = std::floor(y);
    const auto l = std::int64_t(f);
    return y == f ? std::pair{l - 1, l} : std::pair{l, l};
}

// Does the segment meet the closed box? Liang-Barsky clipping with closed slabs.
inline bool segment_meets_box(const Segment& s, const Point& lo, const Point& hi, int d) {
    double t0 = 0, t1 = 1;
    for (int i = 0; i < d; ++i) {
        const double p = s.b[i] - s.a[i];
        if (p == 0) {
            if (s.a[i] < lo[i] || s.a[i] > hi[i]) return false;
            continue;
        }
        double ta = (lo[i] - s.a[i]) / p, tb = (hi[i] - s.a[i]) / p;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

// Points j 2^-s of an integer lattice covering the bounding box of U with a margin,
// with prefix sums of the membership flags. Points outside the lattice count as
// outside U.
class SampleLattice {
public:
    SampleLattice(const OccupancySet& U, int s) : d_(U.dim()), s_(s) {
        std::size_t total = 1;
        for (int i = 0; i < d_; ++i) {
            lo_[i] = std::int64_t(std::floor(std::ldexp(U.bbox().lo[i], s))) - 1;
            const std::int64_t hi = std::int64_t(std::ceil(std::ldexp(U.bbox().hi[i], s))) + 1;
            n_[i] = hi - lo_[i] + 1;
            total *= std::size_t(n_[i]);
        }
        if (total > (std::size_t(1) << 28)) fail(ErrorKind::precondition, "sample lattice too large for this resolution");
        std::vector<std::uint8_t> in(total, 0);
        const std::size_t row = std::size_t(n_[0]);
        parallel_for(total / row, [&](std::size_t r) {
            std::size_t rest = r;
            Point x{};
            for (int i = 1; i < d_; ++i) {
                x[i] = std::ldexp(double(lo_[i] + std::int64_t(rest % std::size_t(n_[i]))), -s_);
                rest /= std::size_t(n_[i]);
            }
            for (std::size_t j = 0; j < row; ++j) {
                x[0] = std::ldexp(double(lo_[0] + std::int64_t(j)), -s_);
                in[r * row + j] = U.contains(x) ? 1 : 0;
            }
        });
        // prefix sums on the shape n + 1
        std::size_t ptotal = 1;
        for (int i = 0; i < d_; ++i) {
            stride_[i] = ptotal;
            ptotal *= std::size_t(n_[i] + 1);
        }
        pre_.assign(ptotal, 0);
        for (std::size_t r = 0; r < total / row; ++r) {
            std::size_t rest = r, po = stride_[0];
            for (int i = 1; i < d_; ++i) {
                po += (rest % std::size_t(n_[i]) + 1) * stride_[i];
                rest /= std::size_t(n_[i]);
            }
            std::copy(in.begin() + std::ptrdiff_t(r * row), in.begin() + std::ptrdiff_t((r + 1) * row),
                      pre_.begin() + std::ptrdiff_t(po));
        }
        for (int i = 0; i < d_; ++i) {
            const std::size_t st = stride_[i], block = st * std::size_t(n_[i] + 1);
            for (std::size_t base = 0; base < ptotal; base += block)
                for (std::size_t j = 1; j <= std::size_t(n_[i]); ++j)
                    for (std::size_t t = 0; t < st; ++t) pre_[base + j * st + t] += pre_[base + (j - 1) * st + t];
        }
    }

    int resolution() const { return s_; }

    struct Count {
        std::int64_t in = 0, points = 0;
        bool clipped = false; // the range reaches outside the lattice
    };

    // Lattice points j with a <= j <= b.
    Count count(const Index& a, const Index& b) const {
        Count c;
        Index lo{}, hi{};
        std::int64_t pts = 1;
        for (int i = 0; i < d_; ++i) {
            if (a[i] > b[i]) return c;
            lo[i] = std::max(a[i], lo_[i]) - lo_[i];
            hi[i] = std::min(b[i], lo_[i] + n_[i] - 1) - lo_[i];
            if (a[i] < lo_[i] || b[i] > lo_[i] + n_[i] - 1) c.clipped = true;
            if (lo[i] > hi[i]) {
                c.clipped = true;
                c.points = 0;
                return c;
            }
            pts *= hi[i] - lo[i] + 1;
        }
        c.points = pts;
        std::int64_t sum = 0;
        for (std::uint32_t m = 0; m < (1u << d_); ++m) {
            std::size_t po = 0;
            int sign = 1;
            for (int i = 0; i < d_; ++i) {
                if ((m >> i) & 1u) {
                    po += std::size_t(lo[i]) * stride_[i];
                    sign = -sign;
                } else {
                    po += std::size_t(hi[i] + 1) * stride_[i];
                }
            }
            sum += sign * std::int64_t(pre_[po]);
        }
        c.in = sum;
        return c;
    }

    // Index range of the lattice points in the closed k-cube l (k <= s).
    void closed_cube(const Index& l, int k, Index& a, Index& b) const {
        const std::int64_t w = std::int64_t(1) << (s_ - k);
        for (int i = 0; i < d_; ++i) {
            a[i] = l[i] * w;
            b[i] = (l[i] + 1) * w;
        }
    }

    // Cube index range at level k covering the lattice.
    void cube_range(int k, Index& a, Index& b) const {
        const std::int64_t w = std::int64_t(1) << (s_ - k);
        for (int i = 0; i < d_; ++i) {
            a[i] = floor_div(lo_[i], w) - 1;
            b[i] = floor_div(lo_[i] + n_[i] - 1, w) + 1;
        }
    }

private:
    int d_, s_;
    Index lo_{}, n_{};
    std::array<std::size_t, kMaxDim> stride_{};
    std::vector<std::int32_t> pre_;
};

inline std::int64_t count_cubes(int d, const std::vector<std::pair<Index, Index>>& ranges,
                                const std::function<bool(const Index&)>& keep = {}) {
    std::unordered_set<Index, IndexHash> seen;
    for (auto& [a, b] : ranges)
        for_each_index(d, a, b, [&](const Index& c) {
            if (!keep || keep(c)) seen.insert(c);
        });
    return std::int64_t(seen.size());
}

} // namespace detail

// Sample resolution used for oracle sets: 2^2 lattice steps per cube side.
inline constexpr int kOracleOversample = 2;

// N_A(k): number of closed dyadic k-cubes meeting A. Exact for points, segments,
// boxes and rasters; for oracle sets a cube counts when one of its lattice samples
// at spacing 2^-(k+2) lies in A.
inline std::int64_t box_count(const OccupancySet& A, int k) {
    require(k >= 0 && k <= 30, "box counting level out of range");
    const int d = A.dim();
    using detail::cubes_at;
    switch (A.kind()) {
    case OccupancySet::Kind::points: {
        std::vector<std::pair<Index, Index>> r;
        for (auto& p : A.points()) {
            Index a{}, b{};
            for (int i = 0; i < d; ++i) std::tie(a[i], b[i]) = cubes_at(p[i], k);
            r.push_back({a, b});
        }
        return detail::count_cubes(d, r);
    }
    case OccupancySet::Kind::boxes: {
        std::vector<std::pair<Index, Index>> r;
        for (auto& bx : A.boxes()) {
            Index a{}, b{};
            for (int i = 0; i < d; ++i) {
                a[i] = std::int64_t(std::ceil(std::ldexp(bx.lo[i], k))) - 1;
                b[i] = std::int64_t(std::floor(std::ldexp(bx.hi[i], k)));
            }
            r.push_back({a, b});
        }
        return detail::count_cubes(d, r);
    }
    case OccupancySet::Kind::segments: {
        std::unordered_set<Index, IndexHash> seen;
        const double h = dyadic(k);
        for (auto& s : A.segments()) {
            Index a{}, b{};
            for (int i = 0; i < d; ++i) {
                a[i] = cubes_at(std::min(s.a[i], s.b[i]), k).first;
                b[i] = cubes_at(std::max(s.a[i], s.b[i]), k).second;
            }
            detail::for_each_index(d, a, b, [&](const Index& c) {
                Point lo{}, hi{};
                for (int i = 0; i < d; ++i) {
                    lo[i] = double(c[i]) * h;
                    hi[i] = double(c[i] + 1) * h;
                }
                if (detail::segment_meets_box(s, lo, hi, d)) seen.insert(c);
            });
        }
        return std::int64_t(seen.size());
    }
    case OccupancySet::Kind::raster: {
        const GridFunction& g = A.raster();
        if (k > g.level()) fail(ErrorKind::precondition, "box counting finer than the raster resolution");
        const std::int64_t w = std::int64_t(1) << (g.level() - k);
        std::vector<std::pair<Index, Index>> r;
        for (std::size_t o = 0; o < g.size(); ++o) {
            if (g[o] == 0) continue;
            const Index c = g.cell_at(o);
            Index a{}, b{};
            for (int i = 0; i < d; ++i) {
                a[i] = detail::floor_div(c[i] + w - 1, w) - 1; // ceil(c / w) - 1
                b[i] = detail::floor_div(c[i] + 1, w);
            }
            r.push_back({a, b});
        }
        return detail::count_cubes(d, r);
    }
    case OccupancySet::Kind::oracle: {
        const detail::SampleLattice lat(A, k + kOracleOversample);
        Index a{}, b{};
        lat.cube_range(k, a, b);
        std::int64_t n = 0;
        detail::for_each_index(d, a, b, [&](const Index& l) {
            Index x{}, y{};
            lat.closed_cube(l, k, x, y);
            if (lat.count(x, y).in > 0) ++n;
        });
        return n;
    }
    }
    return 0;
}

namespace detail {

// Closed k-cubes holding lattice samples both inside and outside U.
inline std::int64_t mixed_cubes(const SampleLattice& lat, int d, int k) {
    Index a{}, b{}, m{};
    lat.cube_range(k, a, b);
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) {
        m[i] = b[i] - a[i] + 1;
        total *= std::size_t(m[i]);
    }
    std::vector<std::uint8_t> mixed(total, 0);
    parallel_for(total, [&](std::size_t o) {
        Index l{}, x{}, y{};
        std::size_t rest = o;
        for (int i = 0; i < d; ++i) {
            l[i] = a[i] + std::int64_t(rest % std::size_t(m[i]));
            rest /= std::size_t(m[i]);
        }
        lat.closed_cube(l, k, x, y);
        const auto c = lat.count(x, y);
        std::int64_t pts = 1;
        for (int i = 0; i < d; ++i) pts *= y[i] - x[i] + 1;
        if (c.in > 0 && c.in < pts) mixed[o] = 1;
    });
    return std::int64_t(std::count(mixed.begin(), mixed.end(), std::uint8_t(1)));
}

} // namespace detail

// N_{dU}(k): exact through the attached boundary when there is one, otherwise the
// closed k-cubes with mixed lattice samples (a lower bound).
inline std::int64_t boundary_count(const OccupancySet& U, int k) {
    if (U.has_boundary()) return box_count(U.boundary(), k);
    require(U.kind() == OccupancySet::Kind::oracle, "boundary counting needs an oracle set or an attached boundary");
    const detail::SampleLattice lat(U, k + kOracleOversample);
    return detail::mixed_cubes(lat, U.dim(), k);
}

struct Summability {
    std::vector<double> terms, partial;
    double ratio = 0; // geometric ratio fitted to the last three terms
    bool converging = false;
    double tail = 0; // geometric tail estimate; infinite when diverging
};

// Cauchy-type verdict on a positive series from its last three terms.
inline Summability summability_verdict(std::vector<double> terms, double threshold = 0.99) {
    Summability s;
    s.terms = std::move(terms);
    double acc = 0;
    for (double t : s.terms) s.partial.push_back(acc += t);
    if (s.terms.size() < 3) fail(ErrorKind::precondition, "summability verdict needs at least three terms");
    const std::vector<double> last(s.terms.end() - 3, s.terms.end());
    if (last.back() == 0) {
        s.ratio = 0;
        s.converging = true;
        return s;
    }
    s.ratio = fit_ratio(last);
    s.converging = s.ratio < threshold;
    s.tail = s.converging ? last.back() * s.ratio / (1 - s.ratio) : INFINITY;
    return s;
}

// Partial sums of N_A(k) 2^{-km} for k = 0..kmax.
inline Summability summability(const OccupancySet& A, double m, int kmax) {
    require(m >= 0, "summability exponent must be nonnegative");
    require(kmax >= 2, "summability needs kmax >= 2");
    std::vector<double> t;
    for (int k = 0; k <= kmax; ++k) t.push_back(double(box_count(A, k)) * std::exp2(-k * m));
    return summability_verdict(t);
}

struct BoxDimension {
    double slope = 0, residual = 0;
    std::vector<int> levels;
    std::vector<std::int64_t> counts;
};

// Least-squares slope of log N_A(k) against k log 2 over k in [k1, k2].
inline BoxDimension box_dimension(const OccupancySet& A, int k1, int k2) {
    require(k2 - k1 >= 2, "box dimension needs at least three levels");
    BoxDimension r;
    std::vector<double> x, y;
    for (int k = k1; k <= k2; ++k) {
        const auto n = box_count(A, k);
        r.levels.push_back(k);
        r.counts.push_back(n);
        if (n > 0) {
            x.push_back(double(k));
            y.push_back(std::log2(double(n)));
        }
    }
    if (x.size() < 3) fail(ErrorKind::numeric, "box counts vanish on the requested levels");
    r.slope = ls_slope(x, y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (my + r.slope * (x[i] - mx));
        ss += e * e;
    }
    r.residual = std::sqrt(ss / double(x.size()));
    return r;
}

// Whitney decomposition: Q_k holds the k-cubes whose 3^d block lies in U and which
// sit in no earlier cube. Containment is tested on the open block against lattice
// samples at spacing 2^-(kmax+1).
struct WhitneyResult {
    int d = 2, k0 = -1, kmax = 0;
    std::map<int, std::vector<Index>> cubes;
    std::vector<std::int64_t> card;           // Card Q_k, k = 0..kmax
    std::vector<std::int64_t> boundary_cubes; // mixed closed k-cubes on the sample lattice
    double covered = 0;                       // total volume of the cubes

    std::int64_t card_bound(int k) const { // 3^d 2^d N_dU(k-1)
        return std::int64_t(std::pow(6.0, d)) * boundary_cubes[std::size_t(k - 1)];
    }
};

inline WhitneyResult whitney(const OccupancySet& U, int kmax) {
    require(U.kind() == OccupancySet::Kind::oracle || U.kind() == OccupancySet::Kind::raster,
            "whitney needs an open set given by an oracle or a raster");
    require(kmax >= 0 && kmax <= 16, "whitney kmax out of range");
    const int d = U.dim(), s = kmax + 1;
    const detail::SampleLattice lat(U, s);
    WhitneyResult res;
    res.d = d;
    res.kmax = kmax;
    res.card.assign(std::size_t(kmax + 1), 0);
    for (int k = 0; k <= kmax; ++k) res.boundary_cubes.push_back(detail::mixed_cubes(lat, d, k));

    // covered[l]: the k-cube l lies in a Whitney cube of level <= k; dense over cube_range(k)
    std::vector<std::uint8_t> prev;
    Index pa{}, pm{};
    for (int k = 0; k <= kmax; ++k) {
        const std::int64_t w = std::int64_t(1) << (s - k);
        Index a{}, b{}, m{};
        lat.cube_range(k, a, b);
        std::size_t total = 1;
        for (int j = 0; j < d; ++j) {
            m[j] = b[j] - a[j] + 1;
            total *= std::size_t(m[j]);
        }
        auto cube_at = [&](std::size_t o) {
            Index l{};
            for (int j = 0; j < d; ++j) {
                l[j] = a[j] + std::int64_t(o % std::size_t(m[j]));
                o /= std::size_t(m[j]);
            }
            return l;
        };
        auto parent_covered = [&](const Index& l) {
            if (k == 0) return false;
            std::size_t o = 0, stride = 1;
            for (int j = 0; j < d; ++j) {
                const std::int64_t p = detail::floor_div(l[j], 2) - pa[j];
                if (p < 0 || p >= pm[j]) return false;
                o += std::size_t(p) * stride;
                stride *= std::size_t(pm[j]);
            }
            return prev[o] != 0;
        };
        std::vector<std::uint8_t> cover(total, 0), ok(total, 0);
        parallel_for(total, [&](std::size_t o) {
            const Index l = cube_at(o);
            if (parent_covered(l)) {
                cover[o] = 1;
                return;
            }
            Index x{}, y{};
            std::int64_t pts = 1;
            for (int j = 0; j < d; ++j) {
                x[j] = (l[j] - 1) * w + 1;
                y[j] = (l[j] + 2) * w - 1;
                pts *= y[j] - x[j] + 1;
            }
            const auto c = lat.count(x, y);
            if (!c.clipped && c.in == pts) ok[o] = cover[o] = 1;
        });
        auto& level = res.cubes[k];
        for (std::size_t o = 0; o < total; ++o)
            if (ok[o]) level.push_back(cube_at(o));
        res.card[std::size_t(k)] = std::int64_t(level.size());
        if (res.k0 < 0 && res.card[std::size_t(k)] > 0) res.k0 = k;
        if (res.k0 >= 0 && k > res.k0 && res.card[std::size_t(k)] > res.card_bound(k))
            fail(ErrorKind::internal, "Whitney count exceeds 6^d N_dU(k-1) at level " + std::to_string(k));
        res.covered += double(res.card[std::size_t(k)]) * std::pow(dyadic(k), d);
        prev = std::move(cover);
        pa = a;
        pm = m;
    }
    if (res.k0 < 0) fail(ErrorKind::precondition, "no Whitney cube up to kmax: set is empty at this resolution");
    return res;
}

struct WhitneyChain {
    WhitneyResult whitney;
    Decomposition dec;        // T_k = sum of [[Q]], Q in Q_k, for k = k0..kmax
    std::vector<double> cost; // N(T_k)^{1-alpha} F(T_k)^alpha
    Summability series;
    double raster_mass = 0;   // volume of U rasterized at level kmax
    double residual_mass = 0; // raster_mass minus the covered volume
};

// The decomposition behind the fractional structure of [[U]]. The cheap path uses
// N(T_k) <= Card (2^-kd + 2d 2^-k(d-1)) and F(T_k) <= Card 2^-kd; the exact path
// computes masses of the chains (F = M in top degree).
inline WhitneyChain whitney_chain(const OccupancySet& U, const WhitneyResult& wr, double alpha, bool exact = false) {
    check_alpha(alpha);
    require(wr.d == U.dim(), "Whitney result does not match the set");
    WhitneyChain out;
    out.whitney = wr;
    const auto& w = out.whitney;
    const int kmax = w.kmax;
    const int d = w.d;
    out.dec.d = d;
    out.dec.m = d;
    out.dec.exact = exact;
    for (int k = w.k0; k <= kmax; ++k) {
        CubicalChain t(d, d, k);
        for (auto& l : w.cubes.at(k)) {
            Face f;
            f.base = l;
            f.axes = full_mask(d);
            t.add(f, 1.0);
        }
        PartStats ps;
        const double card = double(w.card[std::size_t(k)]);
        if (exact) {
            ps.mass = mass(t);
            ps.bmass = mass(boundary(t));
            ps.flat = ps.mass;
        } else {
            ps.mass = card * std::pow(dyadic(k), d);
            ps.bmass = card * 2 * d * std::pow(dyadic(k), d - 1);
            ps.flat = ps.mass;
        }
        ps.normal = ps.mass + ps.bmass;
        out.dec.parts.push_back(ps);
        out.dec.chains.push_back(std::move(t));
        out.cost.push_back(std::pow(ps.normal, 1 - alpha) * std::pow(ps.flat, alpha));
    }
    std::vector<double> terms = out.cost;
    while (terms.size() < 3) terms.insert(terms.begin(), 0.0);
    out.series = summability_verdict(terms);
    // rasterized volume at level kmax from cell centres
    const double h = dyadic(kmax);
    Index a{}, b{};
    for (int i = 0; i < d; ++i) {
        a[i] = std::int64_t(std::floor(U.bbox().lo[i] / h)) - 1;
        b[i] = std::int64_t(std::ceil(U.bbox().hi[i] / h)) + 1;
    }
    std::int64_t inside = 0;
    detail::for_each_index(d, a, b, [&](const Index& c) {
        Point x{};
        for (int i = 0; i < d; ++i) x[i] = (double(c[i]) + 0.5) * h;
        if (U.contains(x)) ++inside;
    });
    out.raster_mass = double(inside) * std::pow(h, d);
    out.residual_mass = out.raster_mass - w.covered;
    return out;
}

inline WhitneyChain whitney_chain(const OccupancySet& U, double alpha, int kmax, bool exact = false) {
    check_alpha(alpha);
    return whitney_chain(U, whitney(U, kmax), alpha, exact);
}

// ---- generators ----

inline OccupancySet disk(const Point& c, double r, int d = 2) {
    require(r > 0, "disk radius must be positive");
    Box b;
    for (int i = 0; i < d; ++i) {
        b.lo[i] = c[i] - r;
        b.hi[i] = c[i] + r;
    }
    return OccupancySet::from_oracle(
        d, b, [c, r, d](const Point& x) { return dist(x, c, d) < r; }, "disk");
}

// Star-shaped planar domain r < r0 (1 + sum_j a_j cos(j theta + phi_j)).
inline OccupancySet star_domain(const Point& c, double r0, std::vector<double> amp, std::vector<double> phase) {
    require(r0 > 0, "star radius must be positive");
    require(amp.size() == phase.size(), "star harmonics need matching amplitudes and phases");
    double total = 0;
    for (double a : amp) total += std::abs(a);
    require(total < 1, "star harmonics must keep the radius positive");
    const double R = r0 * (1 + total);
    Box b;
    b.lo[0] = c[0] - R;
    b.hi[0] = c[0] + R;
    b.lo[1] = c[1] - R;
    b.hi[1] = c[1] + R;
    return OccupancySet::from_oracle(
        2, b,
        [c, r0, amp = std::move(amp), phase = std::move(phase)](const Point& x) {
            const double dx = x[0] - c[0], dy = x[1] - c[1], th = std::atan2(dy, dx);
            double r = 1;
            for (std::size_t j = 0; j < amp.size(); ++j) r += amp[j] * std::cos(double(j + 1) * th + phase[j]);
            return std::hypot(dx, dy) < r0 * r;
        },
        "star");
}

// Open cube (lo, hi)^d.
inline OccupancySet square(double lo = 0, double hi = 1, int d = 2) {
    require(lo < hi, "square needs lo < hi");
    Box b;
    for (int i = 0; i < d; ++i) {
        b.lo[i] = lo;
        b.hi[i] = hi;
    }
    return OccupancySet::from_oracle(
        d, b,
        [lo, hi, d](const Point& x) {
            for (int i = 0; i < d; ++i)
                if (!(x[i] > lo && x[i] < hi)) return false;
            return true;
        },
        "square");
}

namespace detail {

inline double cross2(const Point& o, const Point& a, const Point& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline bool in_triangle(const Point& x, const Point& a, const Point& b, const Point& c) {
    const double d1 = cross2(a, b, x), d2 = cross2(b, c, x), d3 = cross2(c, a, x);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

// Apex of the Koch bump over a -> b, on the right of the direction of travel.
inline Point koch_apex(const Point& a, const Point& b) {
    const double s = std::sqrt(3.0) / 6;
    Point p{};
    p[0] = 0.5 * (a[0] + b[0]) + s * (b[1] - a[1]);
    p[1] = 0.5 * (a[1] + b[1]) - s * (b[0] - a[0]);
    return p;
}

inline Point lerp(const Point& a, const Point& b, double t) {
    Point p{};
    p[0] = a[0] + t * (b[0] - a[0]);
    p[1] = a[1] + t * (b[1] - a[1]);
    return p;
}

// Region between segment a -> b and its generation-n Koch curve.
inline bool in_koch_region(const Point& x, Point a, Point b, int n) {
    while (n > 0) {
        const Point top = koch_apex(a, b);
        if (!in_triangle(x, a, b, top)) return false;
        const Point p = lerp(a, b, 1.0 / 3), q = lerp(a, b, 2.0 / 3);
        if (in_triangle(x, p, top, q)) return true;
        // at most one of the four sub-regions can hold x
        const Point sub[4][2] = {{a, p}, {p, top}, {top, q}, {q, b}};
        int next = -1;
        for (int i = 0; i < 4 && next < 0; ++i)
            if (in_triangle(x, sub[i][0], sub[i][1], koch_apex(sub[i][0], sub[i][1]))) next = i;
        if (next < 0) return false;
        a = sub[next][0];
        b = sub[next][1];
        --n;
    }
    return false;
}

inline void koch_polyline(const Point& a, const Point& b, int n, std::vector<Segment>& out) {
    if (n == 0) {
        out.push_back({a, b});
        return;
    }
    const Point p = lerp(a, b, 1.0 / 3), q = lerp(a, b, 2.0 / 3), top = koch_apex(a, b);
    koch_polyline(a, p, n - 1, out);
    koch_polyline(p, top, n - 1, out);
    koch_polyline(top, q, n - 1, out);
    koch_polyline(q, b, n - 1, out);
}

} // namespace detail

// Open Koch snowflake of the given generation: an equilateral triangle of side
// `side` centred at c with outward bumps; its boundary polyline is attached.
inline OccupancySet koch_snowflake(int gen, const Point& c = make_point({0.5, 0.5}), double side = 0.6) {
    require(gen >= 0 && gen <= 10, "koch generation out of range");
    require(side > 0, "koch side must be positive");
    const double R = side / std::sqrt(3.0);
    const double pi = std::numbers::pi;
    std::array<Point, 3> v;
    for (int i = 0; i < 3; ++i) { // counterclockwise, so bumps on the right point outward
        const double th = pi / 2 + 2 * pi * i / 3;
        v[std::size_t(i)] = make_point({c[0] + R * std::cos(th), c[1] + R * std::sin(th)});
    }
    Box b;
    b.lo[0] = c[0] - side;
    b.hi[0] = c[0] + side;
    b.lo[1] = c[1] - side;
    b.hi[1] = c[1] + side;
    auto oracle = [v, gen](const Point& x) {
        if (detail::in_triangle(x, v[0], v[1], v[2])) return true;
        for (int i = 0; i < 3; ++i)
            if (detail::in_koch_region(x, v[std::size_t(i)], v[std::size_t((i + 1) % 3)], gen)) return true;
        return false;
    };
    std::vector<Segment> segs;
    for (int i = 0; i < 3; ++i) detail::koch_polyline(v[std::size_t(i)], v[std::size_t((i + 1) % 3)], gen, segs);
    auto s = OccupancySet::from_oracle(2, b, oracle, "koch:" + std::to_string(gen));
    s.with_boundary(OccupancySet::from_segments(2, std::move(segs), "koch-boundary"));
    return s;
}

// Koch curve over [0, 1] x {y0} as a polyline.
inline OccupancySet koch_curve(int gen, double y0 = 0.3) {
    require(gen >= 0 && gen <= 10, "koch generation out of range");
    std::vector<Segment> segs;
    // left to right with bumps upward: travel right, so flip to travel left for "right side up"
    detail::koch_polyline(make_point({1.0, y0}), make_point({0.0, y0}), gen, segs);
    return OccupancySet::from_segments(2, std::move(segs), "kochcurve:" + std::to_string(gen));
}

// Product of d middle Cantor sets with the given ratio, as closed boxes of generation gen.
inline OccupancySet cantor_product(double ratio, int gen, int d = 2) {
    require(ratio > 0 && ratio < 0.5, "cantor ratio must lie in (0, 1/2)");
    require(gen >= 0 && gen <= 12 && std::pow(2.0, gen * d) <= 1e7, "cantor generation too large");
    std::vector<std::pair<double, double>> iv{{0.0, 1.0}};
    for (int g = 0; g < gen; ++g) {
        std::vector<std::pair<double, double>> nx;
        for (auto [a, b] : iv) {
            const double l = (b - a) * ratio;
            nx.push_back({a, a + l});
            nx.push_back({b - l, b});
        }
        iv = std::move(nx);
    }
    std::vector<Box> boxes;
    Index lo{}, hi{};
    for (int i = 0; i < d; ++i) hi[i] = std::int64_t(iv.size()) - 1;
    detail::for_each_index(d, lo, hi, [&](const Index& c) {
        Box b;
        for (int i = 0; i < d; ++i) {
            b.lo[i] = iv[std::size_t(c[i])].first;
            b.hi[i] = iv[std::size_t(c[i])].second;
        }
        boxes.push_back(b);
    });
    return OccupancySet::from_boxes(d, std::move(boxes), "cantor");
}

// Open polygon (even-odd rule) with its edges attached as the boundary.
inline OccupancySet polygon(const std::vector<Point>& pts) {
    require(pts.size() >= 3, "polygon needs at least three vertices");
    Box b;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int j = 0; j < 2; ++j) {
            if (i == 0 || pts[i][j] < b.lo[j]) b.lo[j] = pts[i][j];
            if (i == 0 || pts[i][j] > b.hi[j]) b.hi[j] = pts[i][j];
        }
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < pts.size(); ++i) segs.push_back({pts[i], pts[(i + 1) % pts.size()]});
    auto oracle = [segs](const Point& x) {
        bool in = false;
        for (auto& s : segs) {
            if (detail::segment_meets_box(s, x, x, 2)) return false; // on the boundary
            if ((s.a[1] > x[1]) != (s.b[1] > x[1])) {
                const double t = (x[1] - s.a[1]) / (s.b[1] - s.a[1]);
                if (x[0] < s.a[0] + t * (s.b[0] - s.a[0])) in = !in;
            }
        }
        return in;
    };
    auto s = OccupancySet::from_oracle(2, b, oracle, "polygon");
    s.with_boundary(OccupancySet::from_segments(2, segs, "polygon-boundary"));
    return s;
}

// Indicator of U sampled at cell centres on the level-L grid over its bounding box.
inline GridFunction rasterize(const OccupancySet& U, int level) {
    const int d = U.dim();
    const double h = dyadic(level);
    Index lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        lo[i] = std::int64_t(std::floor(U.bbox().lo[i] / h));
        hi[i] = std::int64_t(std::ceil(U.bbox().hi[i] / h));
        if (hi[i] == lo[i]) ++hi[i];
    }
    return GridFunction::sample(d, level, lo, hi, [&](const Point& x) { return U.contains(x) ? 1.0 : 0.0; });
}

} // namespace fraccur
