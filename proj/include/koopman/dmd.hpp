#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "koopman/core.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"
#include "koopman/observables.hpp"

namespace koopman {

/// Empirical Ritz value / vector pair. The mode approximates phi_i(p) C_i(F);
/// energy is its 2-norm, the ranking used for mode selection.
struct RitzPair {
    cdouble value;
    CVec mode;
    double energy = 0.0;
};

enum class DmdVariant { Companion, Svd };

struct DmdResult {
    std::vector<RitzPair> pairs;  // descending energy
    double residual_norm = 0.0;   // |b_r - K_r c|
    CVec companion_coeffs;        // least-squares c
    DmdVariant variant = DmdVariant::Companion;
};

struct KrylovFit {
    CVec c;
    double residual = 0.0;
    std::size_t rank = 0;
    std::size_t r = 0;
};

namespace detail {

inline CMat krylov_matrix(const SnapshotMatrix& s, std::size_t r) {
    CMat K(s.m, r);
    for (std::size_t j = 0; j < r; ++j)
        std::copy(s.columns[j].begin(), s.columns[j].end(), K.col(j));
    return K;
}

inline void sort_pairs_by_energy(std::vector<RitzPair>& pairs) {
    std::stable_sort(pairs.begin(), pairs.end(), [](const RitzPair& a, const RitzPair& b) {
        return a.energy > b.energy;
    });
}

inline double max_column_norm(const SnapshotMatrix& s) {
    double mx = 0.0;
    for (const auto& c : s.columns) mx = std::max(mx, norm2(c));
    return mx;
}

}  // namespace detail

/// Least-squares stage shared by the companion path: c minimizing
/// |b_r - K_r c| over the first r = count-1 columns, with the residual norm
/// and the numerical rank of K_r.
inline KrylovFit krylov_least_squares(const SnapshotMatrix& s) {
    if (s.count() < 2) throw input_error("dmd: need at least 2 snapshot columns");
    const std::size_t r = s.count() - 1;
    double scale = 0.0;
    for (std::size_t j = 0; j < r; ++j) scale = std::max(scale, norm2(s.columns[j]));
    if (scale == 0.0) throw input_error("dmd: snapshot columns b_0..b_{r-1} are all zero");

    CMat K = detail::krylov_matrix(s, r);
    linalg::LsSolution ls = linalg::least_squares(K, s.columns[r], 1e-12);
    KrylovFit fit;
    fit.c = std::move(ls.x);
    fit.residual = ls.residual;
    fit.rank = ls.rank;
    fit.r = r;
    return fit;
}

/// Companion-matrix DMD. Ritz values are the eigenvalues of the r x r
/// companion matrix of the least-squares coefficients, computed as roots of
/// its characteristic polynomial; Ritz vectors come from the Vandermonde
/// solve E V = K_r.
inline DmdResult companion_dmd(const SnapshotMatrix& s) {
    KrylovFit fit = krylov_least_squares(s);
    const std::size_t r = fit.r, m = s.m;
    if (fit.rank < r)
        throw numerical_error(
            "companion_dmd: Krylov matrix is rank deficient (rank " +
            std::to_string(fit.rank) + " of " + std::to_string(r) +
            "); svd_dmd handles rank-deficient data");

    // roots of z^r - c_{r-1} z^{r-1} - ... - c_0
    CVec monic(r);
    for (std::size_t j = 0; j < r; ++j) monic[j] = -fit.c[j];
    CVec lambda = linalg::poly_roots_monic(monic);

    // a multiple root computes as a cluster of width ~sqrt(eps), so the
    // repeated-value test needs a numerical guard on top of the 1e-10 contract
    double maxmod = 0.0;
    for (auto l : lambda) maxmod = std::max(maxmod, std::abs(l));
    const double sep_tol = std::max(1e-10, 1e-7 * (1.0 + maxmod));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = i + 1; j < r; ++j)
            if (std::abs(lambda[i] - lambda[j]) < sep_tol)
                throw numerical_error(
                    "companion_dmd: Ritz values repeat within " + std::to_string(sep_tol) +
                    ", Vandermonde solve is degenerate");

    // E = K_r V^{-1}: row i of E solves sum_l lambda_l^j E(i,l) = K_r(i,j)
    CMat E(m, r);
    CVec rhs(r);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < r; ++j) rhs[j] = s.columns[j][i];
        CVec row = linalg::vandermonde_solve(lambda, rhs);
        for (std::size_t l = 0; l < r; ++l) E(i, l) = row[l];
    }

    DmdResult out;
    out.variant = DmdVariant::Companion;
    out.residual_norm = fit.residual;
    out.companion_coeffs = std::move(fit.c);
    out.pairs.resize(r);
    for (std::size_t l = 0; l < r; ++l) {
        out.pairs[l].value = lambda[l];
        out.pairs[l].mode.assign(E.col(l), E.col(l) + m);
        out.pairs[l].energy = norm2(out.pairs[l].mode);
    }
    detail::sort_pairs_by_energy(out.pairs);
    return out;
}

/// SVD-robust DMD: project onto the leading singular subspace of K_r, take
/// the eigenvalues of the projected one-step operator, lift the eigenvectors
/// back and fit mode amplitudes to the whole snapshot sequence.
inline DmdResult svd_dmd(const SnapshotMatrix& s, double rank_tol = 1e-10) {
    if (s.count() < 2) throw input_error("dmd: need at least 2 snapshot columns");
    const std::size_t r = s.count() - 1, m = s.m;

    CMat X = detail::krylov_matrix(s, r);
    linalg::SvdResult svd = linalg::jacobi_svd(X);
    if (svd.sigma.empty() || svd.sigma[0] <= 0.0)
        throw numerical_error("svd_dmd: all singular values below tolerance (empty data)");
    std::size_t rank = 0;
    while (rank < r && svd.sigma[rank] >= rank_tol * svd.sigma[0]) ++rank;
    if (rank == 0)
        throw numerical_error("svd_dmd: all singular values below tolerance (empty data)");

    // projected operator A~ = U^H Y W Sigma^{-1}
    CMat B(m, rank);  // Y W Sigma^{-1}
    for (std::size_t j = 0; j < rank; ++j)
        for (std::size_t l = 0; l < r; ++l) {
            cdouble w = svd.v(l, j) / svd.sigma[j];
            if (w == cdouble(0.0)) continue;
            const CVec& ycol = s.columns[l + 1];
            for (std::size_t i = 0; i < m; ++i) B(i, j) += ycol[i] * w;
        }
    CMat At(rank, rank);
    for (std::size_t i = 0; i < rank; ++i)
        for (std::size_t j = 0; j < rank; ++j) {
            cdouble acc = 0.0;
            for (std::size_t l = 0; l < m; ++l) acc += std::conj(svd.u(l, i)) * B(l, j);
            At(i, j) = acc;
        }

    linalg::EigResult eg = linalg::eig_dense(At);

    // lift eigenvectors, then fit amplitudes to all r+1 snapshots
    CMat dirs(m, rank);
    for (std::size_t j = 0; j < rank; ++j)
        for (std::size_t i = 0; i < m; ++i) {
            cdouble acc = 0.0;
            for (std::size_t l = 0; l < rank; ++l) acc += svd.u(i, l) * eg.vectors(l, j);
            dirs(i, j) = acc;
        }

    const std::size_t nsnap = r + 1;
    CMat stacked(nsnap * m, rank);
    CVec stacked_rhs(nsnap * m);
    CVec lam_pow(rank, cdouble(1.0));
    for (std::size_t k = 0; k < nsnap; ++k) {
        for (std::size_t j = 0; j < rank; ++j)
            for (std::size_t i = 0; i < m; ++i)
                stacked(k * m + i, j) = lam_pow[j] * dirs(i, j);
        for (std::size_t i = 0; i < m; ++i) stacked_rhs[k * m + i] = s.columns[k][i];
        for (std::size_t j = 0; j < rank; ++j) lam_pow[j] *= eg.values[j];
    }
    linalg::LsSolution amp = linalg::least_squares(stacked, stacked_rhs, 1e-12);

    // companion coefficients via the pseudoinverse, for the residual report
    CVec utb(rank);
    for (std::size_t j = 0; j < rank; ++j) {
        cdouble acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += std::conj(svd.u(i, j)) * s.columns[r][i];
        utb[j] = acc / svd.sigma[j];
    }
    CVec c(r, cdouble(0.0));
    for (std::size_t l = 0; l < r; ++l) {
        cdouble acc = 0.0;
        for (std::size_t j = 0; j < rank; ++j) acc += svd.v(l, j) * utb[j];
        c[l] = acc;
    }
    CVec resid = s.columns[r];
    for (std::size_t l = 0; l < r; ++l)
        for (std::size_t i = 0; i < m; ++i) resid[i] -= s.columns[l][i] * c[l];

    DmdResult out;
    out.variant = DmdVariant::Svd;
    out.companion_coeffs = std::move(c);
    out.residual_norm = norm2(resid);
    out.pairs.resize(rank);
    for (std::size_t j = 0; j < rank; ++j) {
        out.pairs[j].value = eg.values[j];
        out.pairs[j].mode.resize(m);
        for (std::size_t i = 0; i < m; ++i) out.pairs[j].mode[i] = amp.x[j] * dirs(i, j);
        out.pairs[j].energy = norm2(out.pairs[j].mode);
    }
    detail::sort_pairs_by_energy(out.pairs);
    return out;
}

/// Finite Ritz approximation of [U^k F](p): sum_i lambda_i^k w_i.
inline CVec reconstruct(const DmdResult& result, long k) {
    if (k < 0) throw input_error("reconstruct: k must be nonnegative");
    if (result.pairs.empty()) return {};
    const std::size_t m = result.pairs.front().mode.size();
    CVec out(m, cdouble(0.0));
    for (const auto& pair : result.pairs) {
        cdouble p(1.0);
        for (long i = 0; i < k; ++i) p *= pair.value;
        for (std::size_t j = 0; j < m; ++j) out[j] += p * pair.mode[j];
    }
    return out;
}

/// Partition of mode components into (eps1, eps2)-coherent groups: two
/// components are coherent when, for every selected Ritz pair, their
/// coefficients match in modulus within eps1 and in phase within eps2
/// (phase differences wrapped into (-pi, pi]). Groups are the connected
/// components of the pairwise relation.
inline std::vector<std::vector<std::size_t>> coherency_groups(
    const DmdResult& result, const std::vector<std::size_t>& selected, double eps1,
    double eps2) {
    if (selected.empty()) throw input_error("coherency_groups: no modes selected");
    if (eps1 <= 0.0 || eps2 <= 0.0)
        throw input_error("coherency_groups: tolerances must be positive");
    for (std::size_t i : selected)
        if (i >= result.pairs.size()) throw input_error("coherency_groups: index out of range");
    const std::size_t m = result.pairs.front().mode.size();

    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    for (std::size_t j1 = 0; j1 < m; ++j1) {
        for (std::size_t j2 = j1 + 1; j2 < m; ++j2) {
            bool coherent = true;
            for (std::size_t i : selected) {
                cdouble a = result.pairs[i].mode[j1];
                cdouble b = result.pairs[i].mode[j2];
                if (std::abs(std::abs(a) - std::abs(b)) >= eps1 ||
                    std::abs(wrap_angle(std::arg(a) - std::arg(b))) >= eps2) {
                    coherent = false;
                    break;
                }
            }
            if (coherent) parent[find(j1)] = find(j2);
        }
    }

    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> slot(m, -1);
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t root = find(j);
        if (slot[root] < 0) {
            slot[root] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[root])].push_back(j);
    }
    return groups;
}

}  // namespace koopman
