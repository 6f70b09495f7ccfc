#pragma once

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "grid.hpp"

namespace fraccur {

struct IndexHash {
    std::size_t operator()(const Index& a) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        for (auto v : a) {
            std::uint64_t x = std::uint64_t(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            x ^= x >> 30;
            x *= 0xbf58476d1ce4e5b9ull;
            x ^= x >> 27;
            h ^= x;
        }
        return std::size_t(h);
    }
};

// Finite cubical complex at a fixed level: a set of d-cells together with all of
// their faces. Either a full index box [lo, hi) or an explicit list of cells.
class ComplexDomain {
public:
    ComplexDomain() = default;

    static ComplexDomain box(int d, int level, const Index& lo, const Index& hi) {
        ComplexDomain c;
        c.d_ = d;
        c.level_ = level;
        c.lo_ = lo;
        c.hi_ = hi;
        for (int i = 0; i < d; ++i) require(hi[i] > lo[i], "domain box is empty");
        return c;
    }

    // Cells listed explicitly; duplicates are removed.
    static ComplexDomain cells(int d, int level, std::vector<Index> list) {
        require(!list.empty(), "domain has no cells");
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        ComplexDomain c;
        c.d_ = d;
        c.level_ = level;
        c.masked_ = true;
        c.list_ = std::move(list);
        for (int i = 0; i < d; ++i) {
            c.lo_[i] = c.list_.front()[i];
            c.hi_[i] = c.list_.front()[i] + 1;
        }
        for (auto& q : c.list_)
            for (int i = 0; i < d; ++i) {
                c.lo_[i] = std::min(c.lo_[i], q[i]);
                c.hi_[i] = std::max(c.hi_[i], q[i] + 1);
            }
        c.ids_.reserve(c.list_.size() * 2);
        for (std::size_t k = 0; k < c.list_.size(); ++k) c.ids_.emplace(c.list_[k], int(k));
        return c;
    }

    // Bounding box of the support of t (at `level`, default t's level) padded by `pad` cells.
    static ComplexDomain around(const CubicalChain& t, int pad, int level = -1) {
        if (level < 0) level = t.level();
        require(level >= t.level(), "domain level is coarser than the chain");
        require(!t.empty(), "cannot build a domain around an empty chain");
        const int sh = level - t.level();
        Index lo{}, hi{};
        bool first = true;
        for (auto& [f, c] : t.terms())
            for (int i = 0; i < t.dim(); ++i) {
                const std::int64_t a = f.base[i] << sh;
                const std::int64_t b = (f.base[i] + (f.has_axis(i) ? 1 : 0)) << sh;
                if (first || a < lo[i]) lo[i] = a;
                if (first || b > hi[i]) hi[i] = b;
                if (i == t.dim() - 1) first = false;
            }
        for (int i = 0; i < t.dim(); ++i) {
            lo[i] -= pad;
            hi[i] += pad;
            if (hi[i] == lo[i]) ++hi[i];
        }
        return box(t.dim(), level, lo, hi);
    }

    // Cells within Chebyshev distance `radius` (in cells) of the support of t.
    static ComplexDomain band(const CubicalChain& t, int radius, int level = -1) {
        if (level < 0) level = t.level();
        require(level >= t.level(), "domain level is coarser than the chain");
        require(radius >= 1, "band radius must be at least one cell");
        CubicalChain tl = at_level(t, level);
        const int d = t.dim();
        std::vector<Index> seeds;
        for (auto& [f, c] : tl.terms()) {
            // cells touching the face
            const int free = d - f.degree();
            for (std::uint32_t s = 0; s < (1u << free); ++s) {
                Index q = f.base;
                int j = 0;
                for (int i = 0; i < d; ++i)
                    if (!f.has_axis(i)) {
                        if ((s >> j) & 1u) q[i] -= 1;
                        ++j;
                    }
                seeds.push_back(q);
            }
        }
        std::sort(seeds.begin(), seeds.end());
        seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
        std::vector<Index> out;
        const int w = 2 * radius - 1;
        std::int64_t span = 1;
        for (int i = 0; i < d; ++i) span *= w;
        out.reserve(seeds.size() * std::size_t(std::min<std::int64_t>(span, 64)));
        for (auto& q : seeds)
            for (std::int64_t k = 0; k < span; ++k) {
                Index r = q;
                std::int64_t rem = k;
                for (int i = 0; i < d; ++i) {
                    r[i] += rem % w - (radius - 1);
                    rem /= w;
                }
                out.push_back(r);
            }
        return cells(d, level, std::move(out));
    }

    int dim() const { return d_; }
    int level() const { return level_; }
    bool masked() const { return masked_; }
    const Index& lo() const { return lo_; }
    const Index& hi() const { return hi_; }

    std::size_t cell_count() const {
        if (masked_) return list_.size();
        std::size_t n = 1;
        for (int i = 0; i < d_; ++i) n *= std::size_t(hi_[i] - lo_[i]);
        return n;
    }

    // Dense id of a cell, or -1 when outside.
    long cell_id(const Index& q) const {
        for (int i = 0; i < d_; ++i)
            if (q[i] < lo_[i] || q[i] >= hi_[i]) return -1;
        if (masked_) {
            auto it = ids_.find(q);
            return it == ids_.end() ? -1 : it->second;
        }
        long id = 0;
        for (int i = 0; i < d_; ++i) id = id * long(hi_[i] - lo_[i]) + long(q[i] - lo_[i]);
        return id;
    }

    Index cell_at(std::size_t id) const {
        if (masked_) return list_[id];
        Index q{};
        for (int i = d_ - 1; i >= 0; --i) {
            const auto w = std::size_t(hi_[i] - lo_[i]);
            q[i] = lo_[i] + std::int64_t(id % w);
            id /= w;
        }
        return q;
    }

    // A face belongs to the complex when some cell containing it is a domain cell.
    bool contains_face(const Face& f) const {
        const int free = d_ - f.degree();
        for (std::uint32_t s = 0; s < (1u << free); ++s) {
            Index q = f.base;
            int j = 0;
            for (int i = 0; i < d_; ++i)
                if (!f.has_axis(i)) {
                    if ((s >> j) & 1u) q[i] -= 1;
                    ++j;
                }
            if (cell_id(q) >= 0) return true;
        }
        return false;
    }

private:
    int d_ = 1, level_ = 0;
    Index lo_{}, hi_{};
    bool masked_ = false;
    std::vector<Index> list_;
    std::unordered_map<Index, int, IndexHash> ids_;
};

} // namespace fraccur
