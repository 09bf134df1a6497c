#pragma once

#include <complex>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <thread>
#include <vector>

namespace koopman {

using cdouble = std::complex<double>;
using CVec = std::vector<cdouble>;
using RVec = std::vector<double>;

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// Dense complex matrix, column-major. Columns are the natural unit here
/// (snapshots, modes), so column access is contiguous.
struct CMat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    CVec a;

    CMat() = default;
    CMat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

    cdouble& operator()(std::size_t i, std::size_t j) { return a[i + j * rows]; }
    const cdouble& operator()(std::size_t i, std::size_t j) const { return a[i + j * rows]; }

    cdouble* col(std::size_t j) { return a.data() + j * rows; }
    const cdouble* col(std::size_t j) const { return a.data() + j * rows; }
};

inline double norm2(std::span<const cdouble> v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

inline double norm2(const CVec& v) { return norm2(std::span<const cdouble>(v)); }

inline cdouble dot_conj(std::span<const cdouble> a, std::span<const cdouble> b) {
    cdouble s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

/// Wrap x into [0, period).
inline double wrap_coord(double x, double period) {
    double r = x - period * std::floor(x / period);
    if (r >= period) r -= period;
    if (r < 0.0) r = 0.0;
    return r;
}

/// Wrap an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, two_pi);
    if (r <= -3.14159265358979323846) r += two_pi;
    return r;
}

/// Compensated (Kahan) accumulator; long trajectory averages sum 1e6+
/// unit-modulus terms and plain summation loses digits there.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

struct KahanCSum {
    KahanSum re, im;
    void add(cdouble z) {
        re.add(z.real());
        im.add(z.imag());
    }
    cdouble value() const { return {re.sum, im.sum}; }
};

/// Run fn(i) for i in [0, n) on a few threads. Each index writes only its own
/// output slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw < 2 || n < 16) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned nthreads = hw;
    std::vector<std::thread> workers;
    workers.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) {
        workers.emplace_back([&, t]() {
            for (std::size_t i = t; i < n; i += nthreads) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace koopman
