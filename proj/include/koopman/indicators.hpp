#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "koopman/averaging.hpp"
#include "koopman/core.hpp"
#include "koopman/errors.hpp"
#include "koopman/quotient.hpp"

namespace koopman {

/// Fourier coefficients mu_hat(k) = <d mu, f_k> of a prior probability
/// measure on the unit torus, in canonical wavevector order.
struct TargetMeasure {
    CVec coeffs;
    int kmax = 0;
    int dims = 0;
    std::string description;
};

inline TargetMeasure uniform_target(int dims, int kmax) {
    auto grid = wavevector_grid(dims, kmax);
    TargetMeasure t;
    t.kmax = kmax;
    t.dims = dims;
    t.description = "uniform";
    t.coeffs.assign(grid.size(), cdouble(0.0));
    t.coeffs[wavevector_index(std::vector<int>(static_cast<std::size_t>(dims), 0), kmax)] =
        1.0;
    return t;
}

/// Torus-wrapped gaussian: coefficients are exact characteristic-function
/// values e^{i 2 pi k c} e^{-2 pi^2 sigma^2 k^2} per coordinate.
inline TargetMeasure gaussian_target(const RVec& center, const RVec& sigma, int kmax) {
    if (center.size() != sigma.size() || center.empty())
        throw input_error("gaussian_target: center/sigma mismatch");
    for (double s : sigma)
        if (s <= 0.0) throw input_error("gaussian_target: sigma must be positive");
    const int dims = static_cast<int>(center.size());
    auto grid = wavevector_grid(dims, kmax);
    TargetMeasure t;
    t.kmax = kmax;
    t.dims = dims;
    t.description = "gaussian";
    t.coeffs.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cdouble v(1.0);
        for (int d = 0; d < dims; ++d) {
            double k = grid[i][static_cast<std::size_t>(d)];
            double s = sigma[static_cast<std::size_t>(d)];
            v *= std::polar(std::exp(-2.0 * 0.25 * two_pi * two_pi * s * s * k * k),
                            two_pi * k * center[static_cast<std::size_t>(d)]);
        }
        t.coeffs[i] = v;
    }
    return t;
}

/// Coefficients of a density sampled on a uniform cell-center grid over the
/// unit torus (row-major values, shape[d] cells per coordinate). The density
/// is renormalized to unit mass.
inline TargetMeasure target_from_grid(const std::vector<double>& values,
                                      const std::vector<std::size_t>& shape, int kmax) {
    if (shape.empty()) throw input_error("target_from_grid: empty shape");
    std::size_t total = 1;
    for (std::size_t g : shape) {
        if (g < 1) throw input_error("target_from_grid: bad shape");
        total *= g;
    }
    if (values.size() != total) throw input_error("target_from_grid: value count mismatch");
    double mean = 0.0;
    for (double v : values) {
        if (v < 0.0) throw input_error("target_from_grid: negative density");
        mean += v;
    }
    mean /= static_cast<double>(total);
    if (mean <= 0.0) throw input_error("target_from_grid: zero density");

    const int dims = static_cast<int>(shape.size());
    auto grid = wavevector_grid(dims, kmax);
    TargetMeasure t;
    t.kmax = kmax;
    t.dims = dims;
    t.description = "grid";
    t.coeffs.assign(grid.size(), cdouble(0.0));
    std::vector<std::size_t> digit(shape.size(), 0);
    for (std::size_t cell = 0; cell < total; ++cell) {
        double w = values[cell] / (mean * static_cast<double>(total));
        for (std::size_t ki = 0; ki < grid.size(); ++ki) {
            double phase = 0.0;
            for (int d = 0; d < dims; ++d)
                phase += grid[ki][static_cast<std::size_t>(d)] *
                         (static_cast<double>(digit[static_cast<std::size_t>(d)]) + 0.5) /
                         static_cast<double>(shape[static_cast<std::size_t>(d)]);
            t.coeffs[ki] += w * std::polar(1.0, two_pi * phase);
        }
        int d = dims - 1;
        while (d >= 0 && digit[static_cast<std::size_t>(d)] + 1 ==
                             shape[static_cast<std::size_t>(d)]) {
            digit[static_cast<std::size_t>(d)] = 0;
            --d;
        }
        if (d >= 0) ++digit[static_cast<std::size_t>(d)];
    }
    return t;
}

/// Pointwise density of the torus-wrapped gaussian (image sum truncated once
/// terms drop below 1e-12 relative); used by the ball-integral oracle.
inline double wrapped_gaussian_density(std::span<const double> x, const RVec& center,
                                       const RVec& sigma) {
    double rho = 1.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        double s = sigma[d];
        double acc = 0.0;
        for (int m = -1;; --m) {
            double u = x[d] - center[d] + m;
            double term = std::exp(-0.5 * u * u / (s * s));
            acc += term;
            if (term < 1e-12 * (acc + 1e-300)) break;
        }
        for (int m = 0;; ++m) {
            double u = x[d] - center[d] + m;
            double term = std::exp(-0.5 * u * u / (s * s));
            acc += term;
            if (term < 1e-12 * (acc + 1e-300)) break;
        }
        rho *= acc / (s * std::sqrt(two_pi));
    }
    return rho;
}

enum class IndicatorKind { ErgodicitySobolev, ErgodicityBall, Mixing };

struct IndicatorSeries {
    std::vector<std::pair<long, double>> values;  // (n, value), n strictly increasing
    IndicatorKind kind = IndicatorKind::ErgodicitySobolev;
    double s = 0.0;
};

// ---------------------------------------------------------------------------
// Sobolev ergodicity proxy
// ---------------------------------------------------------------------------

/// |c_{x,n} - d mu|_{2,-s} along a trajectory, computed incrementally at
/// n = stride, 2 stride, ..., n_max without re-summation.
inline IndicatorSeries ergodicity_sobolev(const MapSystem& system, RVec x0,
                                          const TargetMeasure& target, double s,
                                          long n_max, long stride) {
    if (stride < 1 || n_max < stride)
        throw input_error("ergodicity_sobolev: bad checkpoint schedule");
    if (static_cast<std::size_t>(target.dims) != system.dim)
        throw input_error("ergodicity_sobolev: target dimension mismatch");
    for (const auto& d : system.domain)
        if (!d.periodic()) throw input_error("ergodicity_sobolev: torus state space required");

    const int kmax = target.kmax, dims = target.dims;
    RVec w = sobolev_weights(dims, kmax, s);
    auto grid = wavevector_grid(dims, kmax);
    const std::size_t total = grid.size();

    std::vector<KahanCSum> acc(total);
    detail::HarmonicLadder ladder(dims, kmax);
    detail::wrap_state(x0, system.domain);

    IndicatorSeries series;
    series.kind = IndicatorKind::ErgodicitySobolev;
    series.s = s;

    RVec x = std::move(x0);
    for (long n = 1; n <= n_max; ++n) {
        ladder.load(x, system.domain);
        for (std::size_t idx = 0; idx < total; ++idx) {
            cdouble v(1.0);
            for (int d = 0; d < dims; ++d)
                v *= ladder.phases[static_cast<std::size_t>(d)][static_cast<std::size_t>(
                    grid[idx][static_cast<std::size_t>(d)] + kmax)];
            acc[idx].add(v);
        }
        if (n % stride == 0 || n == n_max) {
            double d2 = 0.0;
            for (std::size_t idx = 0; idx < total; ++idx)
                d2 += w[idx] *
                      std::norm(acc[idx].value() / static_cast<double>(n) - target.coeffs[idx]);
            if (series.values.empty() || series.values.back().first != n)
                series.values.emplace_back(n, std::sqrt(d2));
        }
        x = system.step(x);
        if (!detail::all_finite(x)) throw divergence_error("map state became non-finite", n);
    }
    return series;
}

/// Sobolev distance of running means of an instantaneous coefficient history
/// to the target; value at n uses the mean of entries 0..n.
inline IndicatorSeries ergodicity_sobolev_running(const std::vector<CVec>& history,
                                                  const TargetMeasure& target, double s) {
    if (history.empty()) throw input_error("ergodicity_sobolev_running: empty history");
    RVec w = sobolev_weights(target.dims, target.kmax, s);
    IndicatorSeries series;
    series.kind = IndicatorKind::ErgodicitySobolev;
    series.s = s;
    std::vector<KahanCSum> acc(target.coeffs.size());
    for (std::size_t n = 0; n < history.size(); ++n) {
        if (history[n].size() != target.coeffs.size())
            throw input_error("ergodicity_sobolev_running: truncation mismatch");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i].add(history[n][i]);
        double d2 = 0.0;
        for (std::size_t i = 0; i < acc.size(); ++i)
            d2 += w[i] *
                  std::norm(acc[i].value() / static_cast<double>(n + 1) - target.coeffs[i]);
        series.values.emplace_back(static_cast<long>(n), std::sqrt(d2));
    }
    return series;
}

// ---------------------------------------------------------------------------
// Ball-integral oracle
// ---------------------------------------------------------------------------

/// Measure of a torus ball under the uniform measure (unit torus, D <= 2).
inline double uniform_ball_measure(double r, int dims) {
    if (dims == 1) return std::min(2.0 * r, 1.0);
    if (dims == 2) {
        const double pi = 0.5 * two_pi;
        if (r <= 0.5) return pi * r * r;
        if (r * r >= 0.5) return 1.0;
        double seg = r * r * std::acos(0.5 / r) - 0.5 * std::sqrt(r * r - 0.25);
        return pi * r * r - 4.0 * seg;
    }
    throw input_error("uniform_ball_measure: oracle supports D = 1 or 2");
}

struct BallOracleGrid {
    int centers_per_dim = 32;
    int n_radii = 16;
    int density_samples_per_dim = 64;  // quadrature grid for non-uniform priors
};

/// Ball-integral empirical ergodicity E_x(n): integrated squared discrepancy
/// between trajectory residence times and prior ball measures, over a
/// deterministic center x radius grid. Residence times come from direct
/// counting; this path never touches the Fourier machinery it validates.
/// Pass an empty density for the uniform prior (analytic ball measures).
inline IndicatorSeries ergodicity_ball_oracle(
    const Trajectory& traj, const std::function<double(std::span<const double>)>& density,
    const std::vector<long>& checkpoints, BallOracleGrid grid = {}) {
    const int dims = static_cast<int>(traj.domain.size());
    if (dims < 1 || dims > 2)
        throw input_error("ergodicity_ball_oracle: supports D = 1 or 2");
    for (const auto& d : traj.domain)
        if (!d.periodic())
            throw input_error("ergodicity_ball_oracle: torus state space required");
    if (checkpoints.empty()) throw input_error("ergodicity_ball_oracle: empty schedule");
    for (std::size_t i = 0; i + 1 < checkpoints.size(); ++i)
        if (checkpoints[i] >= checkpoints[i + 1])
            throw input_error("ergodicity_ball_oracle: schedule must increase");
    if (checkpoints.front() < 1 ||
        checkpoints.back() > static_cast<long>(traj.states.size()))
        throw input_error("ergodicity_ball_oracle: schedule outside trajectory");

    // R so the largest ball covers the whole torus
    const double R = 0.5 * std::sqrt(static_cast<double>(dims));
    const int n_r = grid.n_radii;
    const double dr = R / static_cast<double>(n_r);
    const double half = 0.5 * dr;

    // centers on a uniform cell-center grid
    const int G = grid.centers_per_dim;
    const std::size_t n_centers = (dims == 1) ? static_cast<std::size_t>(G)
                                              : static_cast<std::size_t>(G) * G;
    std::vector<RVec> centers(n_centers, RVec(static_cast<std::size_t>(dims)));
    for (std::size_t c = 0; c < n_centers; ++c) {
        if (dims == 1) {
            centers[c][0] = (static_cast<double>(c) + 0.5) / G;
        } else {
            centers[c][0] = (static_cast<double>(c / static_cast<std::size_t>(G)) + 0.5) / G;
            centers[c][1] = (static_cast<double>(c % static_cast<std::size_t>(G)) + 0.5) / G;
        }
    }

    auto torus_dist = [&](const RVec& a, std::span<const double> b) {
        double s = 0.0;
        for (int d = 0; d < dims; ++d) {
            double u = std::abs(a[static_cast<std::size_t>(d)] - b[static_cast<std::size_t>(d)]);
            u = std::min(u, 1.0 - u);
            s += u * u;
        }
        return std::sqrt(s);
    };

    // prior ball measures mu[B(c, r_j)], r_j = (j - 1/2) dr
    const std::size_t nbin = 2 * static_cast<std::size_t>(n_r) + 1;
    std::vector<std::vector<double>> prior(n_centers, std::vector<double>(
                                                          static_cast<std::size_t>(n_r)));
    if (!density) {
        for (std::size_t c = 0; c < n_centers; ++c)
            for (int j = 1; j <= n_r; ++j)
                prior[c][static_cast<std::size_t>(j - 1)] =
                    uniform_ball_measure((static_cast<double>(j) - 0.5) * dr, dims);
    } else {
        // quadrature of the density, binned by distance like the counts
        const int Gq = grid.density_samples_per_dim;
        const std::size_t nq =
            (dims == 1) ? static_cast<std::size_t>(Gq) : static_cast<std::size_t>(Gq) * Gq;
        std::vector<RVec> qpts(nq, RVec(static_cast<std::size_t>(dims)));
        RVec qw(nq);
        for (std::size_t g = 0; g < nq; ++g) {
            if (dims == 1) {
                qpts[g][0] = (static_cast<double>(g) + 0.5) / Gq;
            } else {
                qpts[g][0] = (static_cast<double>(g / static_cast<std::size_t>(Gq)) + 0.5) / Gq;
                qpts[g][1] = (static_cast<double>(g % static_cast<std::size_t>(Gq)) + 0.5) / Gq;
            }
            qw[g] = density(qpts[g]) / static_cast<double>(nq);
        }
        parallel_for(n_centers, [&](std::size_t c) {
            std::vector<double> hist(nbin, 0.0);
            for (std::size_t g = 0; g < nq; ++g) {
                double dist = torus_dist(centers[c], qpts[g]);
                std::size_t b = std::min(nbin - 1, static_cast<std::size_t>(dist / half));
                hist[b] += qw[g];
            }
            // dist < r_j = (2j-1) half  <=>  bin index <= 2j-2
            double run = 0.0;
            for (int j = 1; j <= n_r; ++j) {
                for (std::size_t b = static_cast<std::size_t>(std::max(0, 2 * j - 3));
                     b < static_cast<std::size_t>(2 * j - 1); ++b)
                    run += hist[b];
                prior[c][static_cast<std::size_t>(j - 1)] = run;
            }
        });
    }

    // incremental residence counting
    std::vector<std::vector<long>> hist(n_centers, std::vector<long>(nbin, 0));
    IndicatorSeries series;
    series.kind = IndicatorKind::ErgodicityBall;
    series.s = 0.0;

    std::size_t next_cp = 0;
    for (long n = 1; n <= checkpoints.back(); ++n) {
        const RVec& raw = traj.states[static_cast<std::size_t>(n - 1)];
        RVec y(static_cast<std::size_t>(dims));
        for (int d = 0; d < dims; ++d)
            y[static_cast<std::size_t>(d)] = wrap_coord(
                raw[static_cast<std::size_t>(d)] / traj.domain[static_cast<std::size_t>(d)].period,
                1.0);
        for (std::size_t c = 0; c < n_centers; ++c) {
            double dist = torus_dist(centers[c], y);
            std::size_t b = std::min(nbin - 1, static_cast<std::size_t>(dist / half));
            ++hist[c][b];
        }
        if (n == checkpoints[next_cp]) {
            double e2 = 0.0;
            for (std::size_t c = 0; c < n_centers; ++c) {
                long run = 0;
                for (int j = 1; j <= n_r; ++j) {
                    for (std::size_t b = static_cast<std::size_t>(std::max(0, 2 * j - 3));
                         b < static_cast<std::size_t>(2 * j - 1); ++b)
                        run += hist[c][b];
                    double res = static_cast<double>(run) / static_cast<double>(n);
                    double diff = res - prior[c][static_cast<std::size_t>(j - 1)];
                    e2 += diff * diff;
                }
            }
            e2 *= dr / static_cast<double>(n_centers);
            series.values.emplace_back(n, std::sqrt(e2));
            ++next_cp;
            if (next_cp >= checkpoints.size()) break;
        }
    }
    return series;
}

// ---------------------------------------------------------------------------
// Mixing norm
// ---------------------------------------------------------------------------

/// M(n) = |rho_n - d mu|_{2,-1/2} of an instantaneous density-coefficient
/// history. Unlike the ergodicity proxy this never averages in time.
inline IndicatorSeries mixing_norm(const std::vector<CVec>& history,
                                   const TargetMeasure& target) {
    if (history.empty()) throw input_error("mixing_norm: empty history");
    const double s = 0.5;
    RVec w = sobolev_weights(target.dims, target.kmax, s);
    IndicatorSeries series;
    series.kind = IndicatorKind::Mixing;
    series.s = s;
    for (std::size_t n = 0; n < history.size(); ++n) {
        if (history[n].size() != target.coeffs.size())
            throw input_error("mixing_norm: truncation mismatch");
        series.values.emplace_back(static_cast<long>(n),
                                   weighted_l2_distance(history[n], target.coeffs, w));
    }
    return series;
}

// ---------------------------------------------------------------------------
// Greedy coverage step
// ---------------------------------------------------------------------------

struct Agent {
    RVec position;  // unit torus
    double speed = 1.0;
};

struct GreedyStepResult {
    std::vector<double> headings;
    std::vector<Agent> agents;
    EmpiricalMeasureCoeffs pooled;
};

/// Append one visited point to pooled empirical coefficients.
inline EmpiricalMeasureCoeffs pooled_add_point(EmpiricalMeasureCoeffs pooled,
                                               std::span<const double> pos) {
    auto grid = wavevector_grid(pooled.dims, pooled.kmax);
    const double n = static_cast<double>(pooled.N);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double phase = 0.0;
        for (int d = 0; d < pooled.dims; ++d)
            phase += grid[i][static_cast<std::size_t>(d)] * pos[static_cast<std::size_t>(d)];
        cdouble f = std::polar(1.0, two_pi * phase);
        pooled.coeffs[i] = (n * pooled.coeffs[i] + f) / (n + 1.0);
    }
    pooled.N += 1;
    return pooled;
}

/// One-step greedy coverage controller: each agent picks the heading from the
/// control set minimizing the Sobolev ergodicity proxy after a virtual dt
/// step of the pooled empirical measure. Near-equal scores (1e-12 relative)
/// break toward the lowest control index; agents commit in order. This is a
/// one-step lookahead inspired by, not reproducing, the closed-form spectral
/// coverage feedback laws in the literature.
inline GreedyStepResult greedy_coverage_step(std::vector<Agent> agents,
                                             EmpiricalMeasureCoeffs pooled,
                                             const TargetMeasure& target,
                                             const std::vector<double>& control_set,
                                             double dt) {
    if (control_set.empty()) throw input_error("greedy_coverage_step: empty control set");
    if (pooled.dims != 2 || target.dims != 2)
        throw input_error("greedy_coverage_step: heading control is planar (D = 2)");
    if (pooled.kmax != target.kmax)
        throw input_error("greedy_coverage_step: truncation mismatch");
    if (dt <= 0.0) throw input_error("greedy_coverage_step: dt must be positive");

    RVec w = sobolev_weights(target.dims, target.kmax, SobolevIndex::quotient_default(2).s);
    GreedyStepResult out;
    out.headings.reserve(agents.size());

    for (auto& agent : agents) {
        if (agent.position.size() != 2)
            throw input_error("greedy_coverage_step: agent position must be 2d");
        std::vector<double> scores(control_set.size());
        std::vector<RVec> cands(control_set.size());
        parallel_for(control_set.size(), [&](std::size_t c) {
            RVec pos(2);
            pos[0] = wrap_coord(agent.position[0] + agent.speed * dt * std::cos(control_set[c]),
                                1.0);
            pos[1] = wrap_coord(agent.position[1] + agent.speed * dt * std::sin(control_set[c]),
                                1.0);
            EmpiricalMeasureCoeffs trial = pooled_add_point(pooled, pos);
            scores[c] = weighted_l2_distance(trial.coeffs, target.coeffs, w);
            cands[c] = std::move(pos);
        });
        double best = scores[0];
        for (double v : scores) best = std::min(best, v);
        std::size_t pick = 0;
        const double tie = best + std::max(1e-15, 1e-12 * best);
        for (std::size_t c = 0; c < scores.size(); ++c)
            if (scores[c] <= tie) {
                pick = c;
                break;
            }
        out.headings.push_back(control_set[pick]);
        pooled = pooled_add_point(pooled, cands[pick]);
        agent.position = cands[pick];
    }
    out.agents = std::move(agents);
    out.pooled = std::move(pooled);
    return out;
}

}  // namespace koopman
