#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "koopman/averaging.hpp"
#include "koopman/core.hpp"
#include "koopman/errors.hpp"
#include "koopman/observables.hpp"
#include "koopman/sym_eigen.hpp"

namespace koopman {

/// Order of the negative-index Sobolev norm; s = (D+1)/2 makes the norm
/// equivalent to the ball-integral ergodicity metric.
struct SobolevIndex {
    double s;

    static SobolevIndex quotient_default(int dims) {
        return {0.5 * (static_cast<double>(dims) + 1.0)};
    }
};

/// Weights [1 + (2 pi |k|_2)^2]^{-s} over the canonical wavevector grid.
inline RVec sobolev_weights(int dims, int kmax, double s) {
    if (s <= 0.0) throw input_error("sobolev_weights: s must be positive");
    auto grid = wavevector_grid(dims, kmax);
    RVec w(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double k2 = 0.0;
        for (int kj : grid[i]) k2 += static_cast<double>(kj) * kj;
        w[i] = std::pow(1.0 + two_pi * two_pi * k2, -s);
    }
    return w;
}

/// sqrt( sum_k w_k |a_k - b_k|^2 ).
inline double weighted_l2_distance(std::span<const cdouble> a, std::span<const cdouble> b,
                                   std::span<const double> w) {
    if (a.size() != b.size() || a.size() != w.size())
        throw input_error("weighted_l2_distance: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * std::norm(a[i] - b[i]);
    return std::sqrt(acc);
}

/// Sobolev pseudodistance between two empirical measures through their
/// truncated coefficient vectors. A genuine metric on coefficient vectors;
/// zero exactly on pairs sharing an ergodic measure.
inline double sobolev_distance(const EmpiricalMeasureCoeffs& a,
                               const EmpiricalMeasureCoeffs& b, SobolevIndex s) {
    if (a.kmax != b.kmax || a.dims != b.dims || a.coeffs.size() != b.coeffs.size())
        throw input_error("sobolev_distance: truncation mismatch");
    RVec w = sobolev_weights(a.dims, a.kmax, s.s);
    return weighted_l2_distance(a.coeffs, b.coeffs, w);
}

struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> d;  // n x n, row-major, symmetric, zero diagonal
    double s = 0.0;
    std::vector<long> seed_ids;

    double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

/// All pairwise Sobolev pseudodistances over a seed set. The weight vector is
/// computed once; pairs are evaluated in parallel.
inline DistanceMatrix distance_matrix(const std::vector<EmpiricalMeasureCoeffs>& set,
                                      SobolevIndex s) {
    if (set.size() < 2) throw input_error("distance_matrix: need at least 2 seeds");
    const int kmax = set.front().kmax, dims = set.front().dims;
    const std::size_t len = set.front().coeffs.size();
    for (const auto& c : set)
        if (c.kmax != kmax || c.dims != dims || c.coeffs.size() != len)
            throw input_error("distance_matrix: truncation mismatch across the seed set");

    RVec w = sobolev_weights(dims, kmax, s.s);
    DistanceMatrix out;
    out.n = set.size();
    out.s = s.s;
    out.d.assign(out.n * out.n, 0.0);
    out.seed_ids.resize(out.n);
    for (std::size_t i = 0; i < out.n; ++i) out.seed_ids[i] = static_cast<long>(i);

    const std::size_t n = out.n;
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dij = weighted_l2_distance(set[i].coeffs, set[j].coeffs, w);
            out.d[i * n + j] = dij;
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.d[j * n + i] = out.d[i * n + j];
    return out;
}

/// Scale-ordered diffusion coordinates of the quotient.
struct DiffusionEmbedding {
    std::size_t n = 0;
    int n_coords = 0;
    std::vector<double> coords;  // row i holds (chi_1(i), ..., chi_{n_coords}(i))
    RVec eigenvalues;            // kernel eigenvalues of the returned coordinates
    double bandwidth = 0.0;

    double chi(std::size_t i, int k) const {
        return coords[i * static_cast<std::size_t>(n_coords) + static_cast<std::size_t>(k)];
    }
};

/// Diffusion-maps embedding of a pairwise-distance set: Gaussian kernel,
/// alpha = 1 density normalization, Markov normalization, top nontrivial
/// eigenvectors scaled by their eigenvalues. bandwidth <= 0 selects the
/// median of the nonzero pairwise distances.
inline DiffusionEmbedding diffusion_maps(const DistanceMatrix& dm, double bandwidth,
                                         int n_coords) {
    const std::size_t n = dm.n;
    if (n_coords < 1) throw input_error("diffusion_maps: n_coords must be >= 1");
    if (n < static_cast<std::size_t>(n_coords) + 1)
        throw input_error("diffusion_maps: need at least n_coords + 1 seeds");

    if (bandwidth <= 0.0) {
        std::vector<double> nz;
        nz.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (dm(i, j) > 0.0) nz.push_back(dm(i, j));
        if (nz.empty())
            throw numerical_error(
                "diffusion_maps: all pairwise distances are zero (degenerate kernel)");
        std::nth_element(nz.begin(), nz.begin() + static_cast<long>(nz.size() / 2), nz.end());
        bandwidth = nz[nz.size() / 2];
    }

    linalg::SymMat W(n);
    double off_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        W(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double dij = dm(i, j);
            double w = std::exp(-(dij * dij) / (bandwidth * bandwidth));
            W(i, j) = W(j, i) = w;
            off_max = std::max(off_max, w);
        }
    }
    if (off_max < 1e-250)
        throw numerical_error(
            "diffusion_maps: kernel is numerically zero at this bandwidth; use the "
            "auto (median) bandwidth");

    // alpha = 1: divide by the sampling-density estimate on both sides
    RVec q(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) q[i] += W(i, j);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) W(i, j) /= q[i] * q[j];

    // symmetric conjugate of the Markov normalization
    RVec deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += W(i, j);
    RVec isq(n);
    for (std::size_t i = 0; i < n; ++i) isq[i] = 1.0 / std::sqrt(deg[i]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) W(i, j) *= isq[i] * isq[j];

    linalg::SymEigResult eg = linalg::sym_eig(std::move(W));

    DiffusionEmbedding out;
    out.n = n;
    out.n_coords = n_coords;
    out.bandwidth = bandwidth;
    out.coords.assign(n * static_cast<std::size_t>(n_coords), 0.0);
    out.eigenvalues.resize(static_cast<std::size_t>(n_coords));

    // eigenvalues ascend; the top one is the trivial stationary direction
    for (int k = 0; k < n_coords; ++k) {
        std::size_t col = n - 2 - static_cast<std::size_t>(k);
        double mu = std::max(0.0, eg.values[col + 0]);
        out.eigenvalues[static_cast<std::size_t>(k)] = mu;

        RVec psi(n);
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            psi[i] = eg.vectors(i, col) * isq[i];
            nrm += psi[i] * psi[i];
        }
        nrm = std::sqrt(nrm);
        // deterministic sign: largest-magnitude entry positive
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(psi[i]) > std::abs(psi[arg])) arg = i;
        double sgn = (psi[arg] < 0.0) ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            out.coords[i * static_cast<std::size_t>(n_coords) + static_cast<std::size_t>(k)] =
                mu * sgn * psi[i] / nrm;
    }
    return out;
}

/// k-means in truncated diffusion coordinates. Farthest-point seeding from
/// the lowest seed index and a fixed iteration cap keep it deterministic.
inline std::vector<int> extract_components(const DiffusionEmbedding& emb, int k_clusters) {
    const std::size_t n = emb.n;
    const std::size_t d = static_cast<std::size_t>(emb.n_coords);
    if (k_clusters < 1 || static_cast<std::size_t>(k_clusters) > n)
        throw input_error("extract_components: k_clusters must be in [1, N]");
    const std::size_t k = static_cast<std::size_t>(k_clusters);

    auto dist2 = [&](const double* a, const double* b) {
        double s = 0.0;
        for (std::size_t q = 0; q < d; ++q) s += (a[q] - b[q]) * (a[q] - b[q]);
        return s;
    };

    std::vector<RVec> centers;
    centers.reserve(k);
    centers.push_back(RVec(emb.coords.begin(), emb.coords.begin() + static_cast<long>(d)));
    std::vector<double> mind(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) mind[i] = dist2(&emb.coords[i * d], centers[0].data());
    while (centers.size() < k) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (mind[i] > mind[far]) far = i;
        centers.emplace_back(emb.coords.begin() + static_cast<long>(far * d),
                             emb.coords.begin() + static_cast<long>(far * d + d));
        for (std::size_t i = 0; i < n; ++i)
            mind[i] = std::min(mind[i], dist2(&emb.coords[i * d], centers.back().data()));
    }

    std::vector<int> label(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(&emb.coords[i * d], centers[0].data());
            for (std::size_t c = 1; c < k; ++c) {
                double dd = dist2(&emb.coords[i * d], centers[c].data());
                if (dd < bd) {
                    bd = dd;
                    best = static_cast<int>(c);
                }
            }
            if (label[i] != best) {
                label[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<RVec> sums(k, RVec(d, 0.0));
        std::vector<long> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t q = 0; q < d; ++q) sums[static_cast<std::size_t>(label[i])][q] +=
                emb.coords[i * d + q];
            ++counts[static_cast<std::size_t>(label[i])];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (std::size_t q = 0; q < d; ++q)
                    centers[c][q] = sums[c][q] / static_cast<double>(counts[c]);
    }
    return label;
}

}  // namespace koopman
