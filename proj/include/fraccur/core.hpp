#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fraccur {

inline constexpr int kMaxDim = 4;

using Point = std::array<double, kMaxDim>;
using Index = std::array<std::int64_t, kMaxDim>;

enum class ErrorKind { config, precondition, numeric, io, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// CLI exit code for an error kind: 2 config, 3 precondition, 4 numeric.
inline int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::config:
    case ErrorKind::io: return 2;
    case ErrorKind::precondition: return 3;
    case ErrorKind::numeric:
    case ErrorKind::internal: return 4;
    }
    return 4;
}

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(ErrorKind::precondition, msg);
}

inline double dyadic(int k) { return std::ldexp(1.0, -k); }

inline Point make_point(std::initializer_list<double> xs) {
    Point p{};
    int i = 0;
    for (double x : xs) {
        if (i >= kMaxDim) fail(ErrorKind::precondition, "point has too many coordinates");
        p[i++] = x;
    }
    return p;
}

inline double dist(const Point& a, const Point& b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline int popcount(std::uint32_t x) { return __builtin_popcount(x); }

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) fail(ErrorKind::numeric, "slope fit needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) fail(ErrorKind::numeric, "degenerate abscissae in slope fit");
    return sxy / sxx;
}

// Geometric decay ratio of a positive sequence from a log-linear fit.
inline double fit_ratio(const std::vector<double>& terms) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!(terms[i] > 0)) continue;
        x.push_back(double(i));
        y.push_back(std::log2(terms[i]));
    }
    if (x.size() < 2) return 0.0;
    return std::exp2(ls_slope(x, y));
}

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Calls f on every index in the inclusive range [lo, hi], axis 0 fastest.
inline void for_each_index(int d, const Index& lo, const Index& hi, const std::function<void(const Index&)>& f) {
    for (int i = 0; i < d; ++i)
        if (hi[i] < lo[i]) return;
    Index c = lo;
    for (;;) {
        f(c);
        int i = 0;
        for (; i < d; ++i) {
            if (c[i] < hi[i]) {
                ++c[i];
                break;
            }
            c[i] = lo[i];
        }
        if (i == d) return;
    }
}

} // namespace detail

} // namespace fraccur
