#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "core.hpp"

namespace fraccur {

namespace detail {

// The FFTW planner is not reentrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

} // namespace detail

// Circular convolution on a fixed d-dimensional shape with a fixed real kernel.
// Arrays are stored with axis 0 fastest; FFTW wants the last axis fastest, so the
// shape is handed over reversed.
class CircularConvolver {
public:
    CircularConvolver(const std::vector<int>& shape, const std::vector<double>& kernel) : shape_(shape) {
        const int d = int(shape.size());
        require(d >= 1 && d <= kMaxDim, "convolution dimension out of range");
        n_ = 1;
        for (int s : shape) n_ *= std::size_t(s);
        require(kernel.size() == n_, "kernel does not match the convolution shape");
        std::vector<int> rev(shape.rbegin(), shape.rend());
        nc_ = n_ / std::size_t(rev.back()) * std::size_t(rev.back() / 2 + 1);
        real_ = fftw_alloc_real(n_);
        spec_ = fftw_alloc_complex(nc_);
        kspec_.resize(nc_);
        {
            std::lock_guard<std::mutex> g(detail::fftw_planner_mutex());
            fwd_ = fftw_plan_dft_r2c(d, rev.data(), real_, spec_, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_c2r(d, rev.data(), spec_, real_, FFTW_ESTIMATE);
        }
        if (!fwd_ || !bwd_) fail(ErrorKind::internal, "fftw planning failed");
        std::copy(kernel.begin(), kernel.end(), real_);
        fftw_execute(fwd_);
        for (std::size_t i = 0; i < nc_; ++i) kspec_[i] = {spec_[i][0], spec_[i][1]};
    }
    CircularConvolver(const CircularConvolver&) = delete;
    CircularConvolver& operator=(const CircularConvolver&) = delete;
    ~CircularConvolver() {
        std::lock_guard<std::mutex> g(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(spec_);
    }

    std::size_t size() const { return n_; }

    std::vector<double> apply(const std::vector<double>& x) {
        require(x.size() == n_, "input does not match the convolution shape");
        std::copy(x.begin(), x.end(), real_);
        fftw_execute(fwd_);
        for (std::size_t i = 0; i < nc_; ++i) {
            const std::complex<double> z = std::complex<double>(spec_[i][0], spec_[i][1]) * kspec_[i];
            spec_[i][0] = z.real();
            spec_[i][1] = z.imag();
        }
        fftw_execute(bwd_);
        std::vector<double> out(real_, real_ + n_);
        const double scale = 1.0 / double(n_);
        for (double& v : out) v *= scale;
        return out;
    }

private:
    std::vector<int> shape_;
    std::size_t n_ = 0, nc_ = 0;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    std::vector<std::complex<double>> kspec_;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

} // namespace fraccur
