#pragma once

#include <cmath>
#include <vector>

#include "koopman/core.hpp"
#include "koopman/errors.hpp"
#include "koopman/observables.hpp"

namespace koopman {

/// Eigenvalues for generalized Laplace analysis, ordered by non-increasing
/// modulus. GLA consumes eigenvalues; it does not discover them.
struct EigenvalueList {
    CVec values;
    bool assume_simple = true;

    static EigenvalueList make(CVec vals) {
        // ties in modulus (rotations) are fine; only a real ordering violation
        // breaks the subtraction telescope
        for (std::size_t i = 0; i + 1 < vals.size(); ++i)
            if (std::abs(vals[i]) <
                std::abs(vals[i + 1]) - 1e-9 * (1.0 + std::abs(vals[i + 1])))
                throw input_error("eigenvalue list must be ordered by non-increasing modulus");
        for (std::size_t i = 0; i < vals.size(); ++i)
            for (std::size_t j = i + 1; j < vals.size(); ++j)
                if (std::abs(vals[i] - vals[j]) < 1e-12)
                    throw input_error("eigenvalue list contains duplicates within 1e-12");
        return {std::move(vals), true};
    }
};

/// Projection of the observable onto one eigenspace, evaluated at the
/// trajectory's initial condition: the value phi_j(p) C_j(F).
struct ProjectedMode {
    cdouble eigenvalue;
    CVec mode_at_p;
    long horizon = 0;
};

/// Fourier-average projection (1/K) sum_k e^{-i 2 pi omega k} b_k for a
/// unit-modulus eigenvalue e^{i 2 pi omega}. K is the column count.
inline ProjectedMode fourier_projection(const SnapshotMatrix& s, double omega) {
    const std::size_t K = s.count(), m = s.m;
    if (K < 2) throw input_error("fourier_projection: need at least 2 columns");
    std::vector<KahanCSum> acc(m);
    for (std::size_t k = 0; k < K; ++k) {
        cdouble w = (omega == 0.0)
                        ? cdouble(1.0)
                        : std::polar(1.0, -two_pi * omega * static_cast<double>(k));
        for (std::size_t i = 0; i < m; ++i) acc[i].add(w * s.columns[k][i]);
    }
    ProjectedMode out;
    out.eigenvalue = std::polar(1.0, two_pi * omega);
    out.horizon = static_cast<long>(K);
    out.mode_at_p.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        out.mode_at_p[i] = acc[i].value() / static_cast<double>(K);
    return out;
}

/// Continuous-time Fourier projection (1/T) int_0^T e^{-i 2 pi omega t} F(t) dt,
/// realized by the trapezoid rule on uniformly sampled snapshots. omega is in
/// cycles per unit time; the eigenvalue field holds the generator eigenvalue
/// i 2 pi omega.
inline ProjectedMode fourier_projection_continuous(const SnapshotMatrix& s, double omega,
                                                   double dt) {
    const std::size_t K = s.count(), m = s.m;
    if (K < 2) throw input_error("fourier_projection_continuous: need at least 2 columns");
    if (dt <= 0.0) throw input_error("fourier_projection_continuous: dt must be positive");
    const double T = dt * static_cast<double>(K - 1);
    std::vector<KahanCSum> acc(m);
    for (std::size_t k = 0; k < K; ++k) {
        double t = dt * static_cast<double>(k);
        double wgt = (k == 0 || k + 1 == K) ? 0.5 : 1.0;
        cdouble w = std::polar(wgt * dt / T, -two_pi * omega * t);
        for (std::size_t i = 0; i < m; ++i) acc[i].add(w * s.columns[k][i]);
    }
    ProjectedMode out;
    out.eigenvalue = cdouble(0.0, two_pi * omega);
    out.horizon = static_cast<long>(K);
    out.mode_at_p.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.mode_at_p[i] = acc[i].value();
    return out;
}

namespace detail {

inline void gla_range_check(cdouble lambda, std::size_t K, double data_scale,
                            const char* which) {
    double mod = std::abs(lambda);
    if (mod == 0.0) return;
    double logmag = static_cast<double>(K - 1) * std::abs(std::log10(mod)) +
                    std::log10(std::max(1.0, data_scale));
    if (logmag > 280.0)
        throw numerical_error(std::string("gla_modes: ") + which +
                              " powers overflow at this horizon; use a smaller K "
                              "(Laplace-type averages are unstable off the unit circle)");
}

}  // namespace detail

/// Generalized Laplace analysis: for eigenvalues ordered by non-increasing
/// modulus, mode_j = (1/K) sum_k lambda_j^{-k} [b_k - sum_{i<j} lambda_i^k mode_i],
/// with previously computed modes subtracted exactly as stated. The finite-K
/// average carries O(1/K) truncation bias, and stages below the top modulus
/// amplify earlier-stage errors; this follows the theorem's structure and is
/// the documented stability caveat.
inline std::vector<ProjectedMode> gla_modes(const SnapshotMatrix& s,
                                            const EigenvalueList& eigs) {
    const std::size_t K = s.count(), m = s.m;
    if (K < 2) throw input_error("gla_modes: need at least 2 columns");
    double scale = 0.0;
    for (const auto& col : s.columns) scale = std::max(scale, norm2(col));

    std::vector<ProjectedMode> modes;
    modes.reserve(eigs.values.size());
    for (std::size_t j = 0; j < eigs.values.size(); ++j) {
        cdouble lam = eigs.values[j];
        if (lam == cdouble(0.0))
            throw input_error("gla_modes: zero eigenvalue, lambda^{-k} undefined");
        detail::gla_range_check(lam, K, scale, "lambda^{-k}");
        for (std::size_t i = 0; i < j; ++i)
            detail::gla_range_check(eigs.values[i], K, scale, "subtracted-mode");

        std::vector<KahanCSum> acc(m);
        cdouble lam_inv = cdouble(1.0) / lam;
        cdouble lam_inv_pow(1.0);
        CVec prev_pow(j, cdouble(1.0));
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t q = 0; q < m; ++q) {
                cdouble resid = s.columns[k][q];
                for (std::size_t i = 0; i < j; ++i)
                    resid -= prev_pow[i] * modes[i].mode_at_p[q];
                acc[q].add(lam_inv_pow * resid);
            }
            lam_inv_pow *= lam_inv;
            for (std::size_t i = 0; i < j; ++i) prev_pow[i] *= eigs.values[i];
        }

        ProjectedMode pm;
        pm.eigenvalue = lam;
        pm.horizon = static_cast<long>(K);
        pm.mode_at_p.resize(m);
        for (std::size_t q = 0; q < m; ++q)
            pm.mode_at_p[q] = acc[q].value() / static_cast<double>(K);
        modes.push_back(std::move(pm));
    }
    return modes;
}

/// Continuous-time GLA with generator eigenvalues (e^{lambda t} growth),
/// trapezoid rule over uniformly sampled snapshots.
inline std::vector<ProjectedMode> gla_modes_continuous(const SnapshotMatrix& s,
                                                       const CVec& gen_eigs, double dt) {
    const std::size_t K = s.count(), m = s.m;
    if (K < 2) throw input_error("gla_modes_continuous: need at least 2 columns");
    if (dt <= 0.0) throw input_error("gla_modes_continuous: dt must be positive");
    for (std::size_t i = 0; i + 1 < gen_eigs.size(); ++i)
        if (gen_eigs[i].real() < gen_eigs[i + 1].real())
            throw input_error("gla_modes_continuous: order eigenvalues by descending Re");
    const double T = dt * static_cast<double>(K - 1);

    std::vector<ProjectedMode> modes;
    for (std::size_t j = 0; j < gen_eigs.size(); ++j) {
        cdouble lam = gen_eigs[j];
        double maxexp = std::abs(lam.real()) * T;
        for (std::size_t i = 0; i < j; ++i)
            maxexp = std::max(maxexp, std::abs(gen_eigs[i].real()) * T);
        if (maxexp > 600.0)
            throw numerical_error("gla_modes_continuous: exponential factors overflow; "
                                  "use a shorter horizon");

        std::vector<KahanCSum> acc(m);
        for (std::size_t k = 0; k < K; ++k) {
            double t = dt * static_cast<double>(k);
            double wgt = (k == 0 || k + 1 == K) ? 0.5 : 1.0;
            cdouble demod = std::exp(-lam * t) * (wgt * dt / T);
            for (std::size_t q = 0; q < m; ++q) {
                cdouble resid = s.columns[k][q];
                for (std::size_t i = 0; i < j; ++i)
                    resid -= std::exp(gen_eigs[i] * t) * modes[i].mode_at_p[q];
                acc[q].add(demod * resid);
            }
        }
        ProjectedMode pm;
        pm.eigenvalue = lam;
        pm.horizon = static_cast<long>(K);
        pm.mode_at_p.resize(m);
        for (std::size_t q = 0; q < m; ++q) pm.mode_at_p[q] = acc[q].value();
        modes.push_back(std::move(pm));
    }
    return modes;
}

/// Norm of b_{K-1} minus the mode reconstruction at k = K-1. Reported so
/// callers can detect observables outside the span of the given eigenspaces.
inline double gla_reconstruction_residual(const SnapshotMatrix& s,
                                          const std::vector<ProjectedMode>& modes) {
    const std::size_t K = s.count(), m = s.m;
    CVec recon(m, cdouble(0.0));
    for (const auto& pm : modes) {
        cdouble p(1.0);
        for (std::size_t k = 0; k + 1 < K; ++k) p *= pm.eigenvalue;
        for (std::size_t q = 0; q < m; ++q) recon[q] += p * pm.mode_at_p[q];
    }
    double r2 = 0.0;
    for (std::size_t q = 0; q < m; ++q) r2 += std::norm(s.columns[K - 1][q] - recon[q]);
    return std::sqrt(r2);
}

}  // namespace koopman
