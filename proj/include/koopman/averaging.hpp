#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "koopman/core.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/observables.hpp"
#include "koopman/stats.hpp"

namespace koopman {

/// Truncated spatial Fourier coefficients of the empirical measure of one
/// trajectory: coeffs[idx] = (1/N) sum_n e^{-i 2 pi omega n} f_k(T^n x0) over
/// the canonical wavevector grid. omega = 0 is the ergodic-average case
/// c_{x,N}; nonzero omega builds the periodic-eigenquotient coordinates.
struct EmpiricalMeasureCoeffs {
    CVec coeffs;
    int kmax = 0;
    int dims = 0;
    RVec x0;
    long N = 0;
    double omega = 0.0;
};

struct ConvergenceReport {
    long N_used = 0;
    double final_delta = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::vector<std::pair<long, double>> history;  // (N at checkpoint, delta)
};

// ---------------------------------------------------------------------------
// Shared-pass accumulator
// ---------------------------------------------------------------------------

/// Running Fourier average of a set of observables along one trajectory.
/// One trajectory pass is shared across all observables, sums are
/// compensated, and advancing in pieces gives bit-identical results to one
/// long run, which is what makes adaptive horizon extension exact.
class AveragingAccumulator {
  public:
    AveragingAccumulator(const MapSystem& system, std::vector<Observable> obs, RVec x0,
                         double omega = 0.0)
        : system_(&system), obs_(std::move(obs)), omega_(omega) {
        if (x0.size() != system.dim)
            throw input_error("averaging: x0 dimension mismatch");
        for (const auto& o : obs_) width_ += o.codomain_dim();
        acc_.resize(width_);
        detail::wrap_state(x0, system.domain);
        state_ = std::move(x0);
    }

    /// Consume `steps` further trajectory states.
    void advance(long steps) {
        for (long i = 0; i < steps; ++i) {
            cdouble w = (omega_ == 0.0)
                            ? cdouble(1.0)
                            : std::polar(1.0, -two_pi * omega_ * static_cast<double>(n_));
            std::size_t q = 0;
            for (const auto& o : obs_) {
                CVec vals = eval(o, state_, system_->domain);
                for (const auto& v : vals) acc_[q++].add(w * v);
            }
            state_ = system_->step(state_);
            if (!detail::all_finite(state_))
                throw divergence_error("map state became non-finite", n_);
            ++n_;
        }
    }

    long n() const { return n_; }

    CVec averages() const {
        CVec out(width_);
        for (std::size_t q = 0; q < width_; ++q)
            out[q] = acc_[q].value() / static_cast<double>(n_);
        return out;
    }

  private:
    const MapSystem* system_;
    std::vector<Observable> obs_;
    double omega_;
    std::size_t width_ = 0;
    std::vector<KahanCSum> acc_;
    RVec state_;
    long n_ = 0;
};

/// Finite-horizon Fourier average (1/N) sum_{n<N} e^{-i 2 pi omega n} f(T^n x0).
/// omega = 0 gives the ergodic average.
inline CVec fourier_average(const MapSystem& system, const Observable& obs, RVec x0, long N,
                            double omega) {
    if (N < 1) throw input_error("fourier_average: N must be at least 1");
    AveragingAccumulator acc(system, {obs}, std::move(x0), omega);
    acc.advance(N);
    return acc.averages();
}

// ---------------------------------------------------------------------------
// Harmonic-grid coefficients (fast shared ladder)
// ---------------------------------------------------------------------------

namespace detail {

/// Per-coordinate phase ladders e^{i 2 pi k x / L}, k = -kmax..kmax.
struct HarmonicLadder {
    int kmax;
    int dims;
    std::vector<CVec> phases;  // phases[d][k + kmax]

    HarmonicLadder(int dims_, int kmax_)
        : kmax(kmax_), dims(dims_), phases(static_cast<std::size_t>(dims_)) {
        for (auto& p : phases) p.assign(static_cast<std::size_t>(2 * kmax + 1), cdouble(1.0));
    }

    void load(const RVec& x, const std::vector<CoordDomain>& domain) {
        for (int d = 0; d < dims; ++d) {
            auto& p = phases[static_cast<std::size_t>(d)];
            cdouble e1 = std::polar(1.0, two_pi * x[static_cast<std::size_t>(d)] /
                                             domain[static_cast<std::size_t>(d)].period);
            p[static_cast<std::size_t>(kmax)] = 1.0;
            for (int k = 1; k <= kmax; ++k) {
                p[static_cast<std::size_t>(kmax + k)] =
                    p[static_cast<std::size_t>(kmax + k - 1)] * e1;
                p[static_cast<std::size_t>(kmax - k)] =
                    std::conj(p[static_cast<std::size_t>(kmax + k)]);
            }
        }
    }
};

}  // namespace detail

/// Coefficients of the empirical measure's Fourier transform, demodulated at
/// omega, over the canonical |k|_inf <= kmax grid. One trajectory pass is
/// shared across all wavevectors.
inline EmpiricalMeasureCoeffs fourier_coeffs(const MapSystem& system, RVec x0, long N,
                                             int kmax, double omega) {
    if (N < 1) throw input_error("fourier_coeffs: N must be at least 1");
    if (kmax < 0) throw input_error("fourier_coeffs: kmax must be nonnegative");
    if (x0.size() != system.dim) throw input_error("fourier_coeffs: x0 dimension mismatch");
    for (const auto& d : system.domain)
        if (!d.periodic())
            throw input_error(
                "fourier_coeffs: state space must be torus-periodic in every "
                "coordinate (wrap bounded systems with torus_chart)");

    const int dims = static_cast<int>(system.dim);
    const std::size_t W = static_cast<std::size_t>(2 * kmax + 1);
    std::size_t total = 1;
    for (int d = 0; d < dims; ++d) total *= W;

    std::vector<KahanCSum> acc(total);
    detail::HarmonicLadder ladder(dims, kmax);
    detail::wrap_state(x0, system.domain);

    EmpiricalMeasureCoeffs out;
    out.kmax = kmax;
    out.dims = dims;
    out.x0 = x0;
    out.N = N;
    out.omega = omega;

    RVec x = std::move(x0);
    std::vector<std::size_t> digit(static_cast<std::size_t>(dims), 0);
    CVec prefix(static_cast<std::size_t>(dims) + 1, cdouble(1.0));
    for (long n = 0; n < N; ++n) {
        ladder.load(x, system.domain);
        cdouble w = (omega == 0.0)
                        ? cdouble(1.0)
                        : std::polar(1.0, -two_pi * omega * static_cast<double>(n));
        // odometer over the grid with running prefix products
        std::fill(digit.begin(), digit.end(), std::size_t{0});
        prefix[0] = w;
        for (int d = 0; d < dims; ++d)
            prefix[static_cast<std::size_t>(d) + 1] =
                prefix[static_cast<std::size_t>(d)] * ladder.phases[static_cast<std::size_t>(d)][0];
        for (std::size_t idx = 0;; ++idx) {
            acc[idx].add(prefix[static_cast<std::size_t>(dims)]);
            int d = dims - 1;
            while (d >= 0 && digit[static_cast<std::size_t>(d)] == W - 1) --d;
            if (d < 0) break;
            ++digit[static_cast<std::size_t>(d)];
            for (int e = d + 1; e < dims; ++e) digit[static_cast<std::size_t>(e)] = 0;
            for (int e = d; e < dims; ++e)
                prefix[static_cast<std::size_t>(e) + 1] =
                    prefix[static_cast<std::size_t>(e)] *
                    ladder.phases[static_cast<std::size_t>(e)][digit[static_cast<std::size_t>(e)]];
        }
        x = system.step(x);
        if (!detail::all_finite(x)) throw divergence_error("map state became non-finite", n);
    }

    out.coeffs.resize(total);
    for (std::size_t i = 0; i < total; ++i)
        out.coeffs[i] = acc[i].value() / static_cast<double>(N);
    return out;
}

/// Empirical-measure coefficients c_{x,N} over the canonical grid (omega = 0).
/// The k = 0 coefficient is exactly 1.
inline EmpiricalMeasureCoeffs empirical_coeffs(const MapSystem& system, RVec x0, long N,
                                               int kmax) {
    return fourier_coeffs(system, std::move(x0), N, kmax, 0.0);
}

/// Coefficients of a finite state list under the unit-torus chart; used when
/// trajectories come from ingested data rather than a built-in map.
inline EmpiricalMeasureCoeffs empirical_coeffs_from_states(
    const std::vector<RVec>& states, int kmax) {
    if (states.empty()) throw input_error("empirical_coeffs_from_states: no states");
    const int dims = static_cast<int>(states.front().size());
    std::vector<CoordDomain> domain(static_cast<std::size_t>(dims), CoordDomain::torus(1.0));
    const std::size_t W = static_cast<std::size_t>(2 * kmax + 1);
    std::size_t total = 1;
    for (int d = 0; d < dims; ++d) total *= W;
    std::vector<KahanCSum> acc(total);
    detail::HarmonicLadder ladder(dims, kmax);
    auto grid = wavevector_grid(dims, kmax);
    for (const auto& st : states) {
        if (st.size() != static_cast<std::size_t>(dims))
            throw input_error("empirical_coeffs_from_states: ragged state list");
        RVec x = st;
        detail::wrap_state(x, domain);
        ladder.load(x, domain);
        for (std::size_t idx = 0; idx < total; ++idx) {
            cdouble v(1.0);
            for (int d = 0; d < dims; ++d)
                v *= ladder.phases[static_cast<std::size_t>(d)][static_cast<std::size_t>(
                    grid[idx][static_cast<std::size_t>(d)] + kmax)];
            acc[idx].add(v);
        }
    }
    EmpiricalMeasureCoeffs out;
    out.kmax = kmax;
    out.dims = dims;
    out.x0 = states.front();
    out.N = static_cast<long>(states.size());
    out.coeffs.resize(total);
    for (std::size_t i = 0; i < total; ++i)
        out.coeffs[i] = acc[i].value() / static_cast<double>(states.size());
    return out;
}

// ---------------------------------------------------------------------------
// Adaptive horizon
// ---------------------------------------------------------------------------

/// Extend the averaging horizon in checkpoint increments until the
/// max-over-observables change across one full window drops below tol, or
/// N_max is reached. Non-convergence is reported, not raised.
inline std::pair<CVec, ConvergenceReport> adaptive_average(const MapSystem& system,
                                                           const std::vector<Observable>& obs,
                                                           RVec x0, double tol,
                                                           long checkpoint, long N_max) {
    if (tol <= 0.0) throw input_error("adaptive_average: tol must be positive");
    if (checkpoint < 1) throw input_error("adaptive_average: checkpoint must be >= 1");
    if (N_max < checkpoint) throw input_error("adaptive_average: N_max < checkpoint");

    AveragingAccumulator acc(system, obs, std::move(x0));
    ConvergenceReport report;
    acc.advance(checkpoint);
    CVec prev = acc.averages();
    while (acc.n() < N_max) {
        long step = std::min(checkpoint, N_max - acc.n());
        acc.advance(step);
        CVec cur = acc.averages();
        double delta = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i)
            delta = std::max(delta, std::abs(cur[i] - prev[i]));
        report.history.emplace_back(acc.n(), delta);
        report.final_delta = delta;
        if (delta < tol && step == checkpoint) {
            report.converged = true;
            break;
        }
        prev = std::move(cur);
    }
    report.N_used = acc.n();
    return {acc.averages(), std::move(report)};
}

/// Adaptive-horizon empirical coefficients over the canonical harmonic grid.
inline std::pair<EmpiricalMeasureCoeffs, ConvergenceReport> adaptive_empirical_coeffs(
    const MapSystem& system, RVec x0, int kmax, double tol, long checkpoint, long N_max) {
    for (const auto& d : system.domain)
        if (!d.periodic())
            throw input_error("adaptive_empirical_coeffs: state space must be torus-periodic");
    auto [avg, report] = adaptive_average(
        system, harmonic_grid(static_cast<int>(system.dim), kmax), x0, tol, checkpoint, N_max);
    EmpiricalMeasureCoeffs coeffs;
    coeffs.coeffs = std::move(avg);
    coeffs.kmax = kmax;
    coeffs.dims = static_cast<int>(system.dim);
    coeffs.x0 = std::move(x0);
    coeffs.N = report.N_used;
    return {std::move(coeffs), std::move(report)};
}

// ---------------------------------------------------------------------------
// Convergence-rate estimation
// ---------------------------------------------------------------------------

struct SlopeEstimate {
    double slope = 0.0;
    bool exact = false;  // some error hit zero; slope is the -inf sentinel
};

/// Least-squares slope of log(error vs the N_ref average) against log N.
/// Periodic orbits give about -1, strongly mixing trajectories about -1/2.
inline SlopeEstimate convergence_slope(const MapSystem& system, const Observable& obs,
                                       RVec x0, const std::vector<long>& N_list,
                                       long N_ref) {
    if (N_list.empty()) throw input_error("convergence_slope: empty N list");
    for (std::size_t i = 0; i + 1 < N_list.size(); ++i)
        if (N_list[i] >= N_list[i + 1])
            throw input_error("convergence_slope: N list must be strictly increasing");
    if (N_list.front() < 1) throw input_error("convergence_slope: N must be >= 1");
    if (N_ref <= N_list.back())
        throw input_error("convergence_slope: N_ref must exceed every N");

    AveragingAccumulator acc(system, {obs}, std::move(x0));
    std::vector<CVec> at_n;
    long done = 0;
    for (long N : N_list) {
        acc.advance(N - done);
        done = N;
        at_n.push_back(acc.averages());
    }
    acc.advance(N_ref - done);
    CVec ref = acc.averages();

    std::vector<double> logN, logE;
    for (std::size_t i = 0; i < N_list.size(); ++i) {
        double e2 = 0.0;
        for (std::size_t q = 0; q < ref.size(); ++q) e2 += std::norm(at_n[i][q] - ref[q]);
        double err = std::sqrt(e2);
        if (err == 0.0)
            return {-std::numeric_limits<double>::infinity(), true};
        logN.push_back(std::log(static_cast<double>(N_list[i])));
        logE.push_back(std::log(err));
    }
    return {stats::least_squares_slope(logN, logE), false};
}

}  // namespace koopman
