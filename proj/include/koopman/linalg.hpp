#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "koopman/core.hpp"
#include "koopman/errors.hpp"

namespace koopman::linalg {

// ---------------------------------------------------------------------------
// Householder QR with column pivoting, complex least squares
// ---------------------------------------------------------------------------

struct QrResult {
    CMat qr;                     // R in the upper triangle, Householder vectors below
    std::vector<double> tau;     // per-column reflector scale, 0 marks a skipped column
    std::vector<std::size_t> perm;  // column permutation, qr column j holds A column perm[j]
    std::size_t rank = 0;
    double rcond_tol = 0.0;
};

/// Pivoted Householder QR of an m x n complex matrix. Numerical rank is the
/// number of diagonal entries above rel_tol * |R(0,0)|.
inline QrResult qr_factor(CMat A, double rel_tol = 1e-12) {
    const std::size_t m = A.rows, n = A.cols;
    QrResult out;
    out.perm.resize(n);
    std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});

    const std::size_t kmax = std::min(m, n);
    out.tau.assign(kmax, 0.0);
    double r00 = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) {
        // pivot: bring the column with the largest remaining norm to position k
        std::size_t piv = k;
        double best = -1.0;
        for (std::size_t j = k; j < n; ++j) {
            double nj = 0.0;
            for (std::size_t i = k; i < m; ++i) nj += std::norm(A(i, j));
            if (nj > best) {
                best = nj;
                piv = j;
            }
        }
        if (piv != k) {
            for (std::size_t i = 0; i < m; ++i) std::swap(A(i, k), A(i, piv));
            std::swap(out.perm[k], out.perm[piv]);
        }

        // Householder vector for column k
        double xnorm = std::sqrt(best);
        if (k == 0) r00 = xnorm;
        if (xnorm == 0.0) continue;

        cdouble x0 = A(k, k);
        double ax0 = std::abs(x0);
        cdouble phase = (ax0 == 0.0) ? cdouble(1.0, 0.0) : x0 / ax0;
        cdouble alpha = -phase * xnorm;

        A(k, k) -= alpha;  // v lives in A(k..m-1, k)
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < m; ++i) vnorm2 += std::norm(A(i, k));
        if (vnorm2 == 0.0) {
            A(k, k) = alpha;
            continue;
        }

        // apply H = I - 2 v v^H / |v|^2 to the trailing columns
        for (std::size_t j = k + 1; j < n; ++j) {
            cdouble proj = 0.0;
            for (std::size_t i = k; i < m; ++i) proj += std::conj(A(i, k)) * A(i, j);
            proj *= 2.0 / vnorm2;
            for (std::size_t i = k; i < m; ++i) A(i, j) -= proj * A(i, k);
        }

        // rescale v to unit leading entry and stash it below the diagonal;
        // the diagonal slot takes R(k,k)
        cdouble v0 = A(k, k);
        for (std::size_t i = k + 1; i < m; ++i) A(i, k) /= v0;
        A(k, k) = alpha;
        out.tau[k] = 2.0 * std::norm(v0) / vnorm2;
    }

    out.rcond_tol = rel_tol * r00;
    out.rank = 0;
    for (std::size_t k = 0; k < kmax; ++k)
        if (std::abs(A(k, k)) > out.rcond_tol) ++out.rank;

    out.qr = std::move(A);
    return out;
}

/// Apply Q^H (from qr_factor) to a vector in place.
inline void qr_apply_qh(const QrResult& f, CVec& b) {
    const std::size_t m = f.qr.rows, n = f.qr.cols;
    const std::size_t kmax = std::min(m, n);
    for (std::size_t k = 0; k < kmax; ++k) {
        if (f.tau[k] == 0.0) continue;
        // reflector v = (1, qr(k+1..m-1, k)), H = I - tau v v^H
        cdouble proj = b[k];
        for (std::size_t i = k + 1; i < m; ++i) proj += std::conj(f.qr(i, k)) * b[i];
        proj *= f.tau[k];
        b[k] -= proj;
        for (std::size_t i = k + 1; i < m; ++i) b[i] -= proj * f.qr(i, k);
    }
}

struct LsSolution {
    CVec x;
    double residual = 0.0;
    std::size_t rank = 0;
};

/// Minimum-residual solution of A x = b via pivoted QR; free variables of a
/// rank-deficient system are set to zero (basic solution).
inline LsSolution least_squares(const CMat& A, const CVec& b, double rel_tol = 1e-12) {
    QrResult f = qr_factor(A, rel_tol);
    const std::size_t m = A.rows, n = A.cols, r = f.rank;
    CVec qtb = b;
    qr_apply_qh(f, qtb);

    LsSolution out;
    out.rank = r;
    double res2 = 0.0;
    for (std::size_t i = r; i < m; ++i) res2 += std::norm(qtb[i]);
    out.residual = std::sqrt(res2);

    CVec y(n, cdouble(0.0));
    for (std::size_t ii = r; ii-- > 0;) {
        cdouble s = qtb[ii];
        for (std::size_t j = ii + 1; j < r; ++j) s -= f.qr(ii, j) * y[j];
        y[ii] = s / f.qr(ii, ii);
    }
    out.x.assign(n, cdouble(0.0));
    for (std::size_t j = 0; j < n; ++j) out.x[f.perm[j]] = y[j];
    return out;
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD (Hestenes), complex
// ---------------------------------------------------------------------------

struct SvdResult {
    CMat u;                      // m x n, columns with sigma == 0 are zero
    std::vector<double> sigma;   // descending
    CMat v;                      // n x n unitary
};

/// A = U diag(sigma) V^H by orthogonalizing column pairs. Accurate for the
/// small, skinny matrices DMD produces; no Gram matrix is formed.
inline SvdResult jacobi_svd(CMat A) {
    const std::size_t m = A.rows, n = A.cols;
    CMat V(n, n);
    for (std::size_t j = 0; j < n; ++j) V(j, j) = 1.0;

    const double eps = 1e-15;
    const int max_sweeps = 42;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0;
                cdouble apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    app += std::norm(A(i, p));
                    aqq += std::norm(A(i, q));
                    apq += std::conj(A(i, p)) * A(i, q);
                }
                double off = std::abs(apq);
                if (off <= eps * std::sqrt(app * aqq) || off == 0.0) continue;
                rotated = true;

                // absorb the phase of a_pq into column q, then rotate as real
                cdouble phase = apq / off;
                for (std::size_t i = 0; i < m; ++i) A(i, q) *= std::conj(phase);
                for (std::size_t i = 0; i < n; ++i) V(i, q) *= std::conj(phase);

                double zeta = (aqq - app) / (2.0 * off);
                double t = ((zeta >= 0.0) ? 1.0 : -1.0) /
                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    cdouble ap = A(i, p), aq = A(i, q);
                    A(i, p) = c * ap - s * aq;
                    A(i, q) = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    cdouble vp = V(i, p), vq = V(i, q);
                    V(i, p) = c * vp - s * vq;
                    V(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    SvdResult out;
    out.sigma.resize(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> nrm(n);
    for (std::size_t j = 0; j < n; ++j) nrm[j] = norm2(std::span<const cdouble>(A.col(j), m));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return nrm[a] > nrm[b]; });

    out.u = CMat(m, n);
    out.v = CMat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t src = order[j];
        out.sigma[j] = nrm[src];
        if (nrm[src] > 0.0)
            for (std::size_t i = 0; i < m; ++i) out.u(i, j) = A(i, src) / nrm[src];
        for (std::size_t i = 0; i < n; ++i) out.v(i, j) = V(i, src);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense complex eigensolver: Hessenberg reduction + shifted QR
// ---------------------------------------------------------------------------

namespace detail {

inline void givens(cdouble a, cdouble b, cdouble& ca, cdouble& cb, double& r) {
    r = std::sqrt(std::norm(a) + std::norm(b));
    if (r == 0.0) {
        ca = 1.0;
        cb = 0.0;
        return;
    }
    ca = a / r;
    cb = b / r;
}

}  // namespace detail

struct EigResult {
    CVec values;
    CMat vectors;  // column i is the eigenvector of values[i]
};

/// Eigen decomposition of a small dense complex matrix. Schur form via
/// single-shift QR on the Hessenberg reduction, eigenvectors by back
/// substitution on the triangular factor.
inline EigResult eig_dense(CMat A, bool want_vectors = true) {
    const std::size_t n = A.rows;
    if (n == 0) return {};
    if (n != A.cols) throw input_error("eig_dense: matrix must be square");

    CMat Z(n, n);
    for (std::size_t i = 0; i < n; ++i) Z(i, i) = 1.0;

    // Hessenberg reduction by Householder similarity
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double xnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm2 += std::norm(A(i, k));
        double xnorm = std::sqrt(xnorm2);
        if (xnorm == 0.0) continue;
        cdouble x0 = A(k + 1, k);
        double ax0 = std::abs(x0);
        cdouble phase = (ax0 == 0.0) ? cdouble(1.0) : x0 / ax0;
        cdouble alpha = -phase * xnorm;

        CVec v(n, cdouble(0.0));
        for (std::size_t i = k + 1; i < n; ++i) v[i] = A(i, k);
        v[k + 1] -= alpha;
        double vn2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vn2 += std::norm(v[i]);
        if (vn2 == 0.0) continue;
        double beta = 2.0 / vn2;

        // A <- H A H, Z <- Z H
        for (std::size_t j = 0; j < n; ++j) {
            cdouble proj = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) proj += std::conj(v[i]) * A(i, j);
            proj *= beta;
            for (std::size_t i = k + 1; i < n; ++i) A(i, j) -= proj * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            cdouble proj = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) proj += A(i, j) * v[j];
            proj *= beta;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= proj * std::conj(v[j]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            cdouble proj = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) proj += Z(i, j) * v[j];
            proj *= beta;
            for (std::size_t j = k + 1; j < n; ++j) Z(i, j) -= proj * std::conj(v[j]);
        }
    }

    // shifted QR with deflation
    const double eps = 1e-15;
    std::size_t hi = n - 1;
    long iter = 0;
    const long iter_cap = 60 * static_cast<long>(n) + 200;
    while (true) {
        // zero out negligible subdiagonals
        for (std::size_t l = 1; l <= hi; ++l) {
            double here = std::abs(A(l, l - 1));
            double diag = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
            if (diag == 0.0) diag = 1.0;
            if (here <= eps * diag) A(l, l - 1) = 0.0;
        }
        while (hi > 0 && A(hi, hi - 1) == 0.0) --hi;
        if (hi == 0) break;

        std::size_t lo = hi;
        while (lo > 0 && A(lo, lo - 1) != 0.0) --lo;

        if (++iter > iter_cap)
            throw numerical_error("eig_dense: QR iteration failed to converge");

        // Wilkinson shift from the trailing 2x2 of the active block
        cdouble a = A(hi - 1, hi - 1), b = A(hi - 1, hi);
        cdouble c = A(hi, hi - 1), d = A(hi, hi);
        cdouble tr = a + d;
        cdouble det = a * d - b * c;
        cdouble disc = std::sqrt(tr * tr - 4.0 * det);
        cdouble mu1 = 0.5 * (tr + disc), mu2 = 0.5 * (tr - disc);
        cdouble mu = (std::abs(mu1 - d) < std::abs(mu2 - d)) ? mu1 : mu2;
        if (iter % 17 == 0) mu = d + cdouble(std::abs(A(hi, hi - 1)), 0.0);  // stagnation kick

        // explicit single-shift QR step on [lo, hi]
        for (std::size_t l = lo; l <= hi; ++l) A(l, l) -= mu;
        std::vector<cdouble> ga(hi - lo), gb(hi - lo);
        for (std::size_t k = lo; k < hi; ++k) {
            cdouble ca, cb;
            double r;
            detail::givens(A(k, k), A(k + 1, k), ca, cb, r);
            ga[k - lo] = ca;
            gb[k - lo] = cb;
            A(k, k) = r;
            A(k + 1, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) {
                cdouble t1 = A(k, j), t2 = A(k + 1, j);
                A(k, j) = std::conj(ca) * t1 + std::conj(cb) * t2;
                A(k + 1, j) = -cb * t1 + ca * t2;
            }
        }
        for (std::size_t k = lo; k < hi; ++k) {
            cdouble ca = ga[k - lo], cb = gb[k - lo];
            std::size_t top = std::min(k + 2, hi) + 1;
            for (std::size_t i = 0; i < top; ++i) {
                cdouble t1 = A(i, k), t2 = A(i, k + 1);
                A(i, k) = ca * t1 + cb * t2;
                A(i, k + 1) = -std::conj(cb) * t1 + std::conj(ca) * t2;
            }
            for (std::size_t i = 0; i < n; ++i) {
                cdouble t1 = Z(i, k), t2 = Z(i, k + 1);
                Z(i, k) = ca * t1 + cb * t2;
                Z(i, k + 1) = -std::conj(cb) * t1 + std::conj(ca) * t2;
            }
        }
        for (std::size_t l = lo; l <= hi; ++l) A(l, l) += mu;
    }

    EigResult out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = A(i, i);
    if (!want_vectors) return out;

    // eigenvectors of the triangular factor, transformed back by Z
    double tnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) tnorm = std::max(tnorm, std::abs(A(i, j)));
    if (tnorm == 0.0) tnorm = 1.0;

    out.vectors = CMat(n, n);
    for (std::size_t kk = 0; kk < n; ++kk) {
        CVec y(n, cdouble(0.0));
        y[kk] = 1.0;
        for (std::size_t ii = kk; ii-- > 0;) {
            cdouble s = 0.0;
            for (std::size_t j = ii + 1; j <= kk; ++j) s += A(ii, j) * y[j];
            cdouble denom = A(ii, ii) - out.values[kk];
            if (std::abs(denom) < 1e-14 * tnorm)
                denom = cdouble(1e-14 * tnorm, 0.0);
            y[ii] = -s / denom;
        }
        CVec x(n, cdouble(0.0));
        for (std::size_t i = 0; i < n; ++i) {
            cdouble s = 0.0;
            for (std::size_t j = 0; j <= kk; ++j) s += Z(i, j) * y[j];
            x[i] = s;
        }
        double nx = norm2(x);
        if (nx > 0.0)
            for (auto& e : x) e /= nx;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, kk) = x[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vandermonde solve (Bjorck-Pereyra, primal problem)
// ---------------------------------------------------------------------------

/// Solve sum_j nodes[j]^i z[j] = f[i] for i = 0..n-1 in O(n^2) using the
/// classical progressive recurrences. Nodes must be distinct.
inline CVec vandermonde_solve(const CVec& nodes, CVec f) {
    const std::size_t n = nodes.size();
    if (f.size() != n) throw input_error("vandermonde_solve: size mismatch");
    if (n == 0) return {};
    for (std::size_t k = 0; k + 1 < n; ++k)
        for (std::size_t i = n - 1; i > k; --i) f[i] -= nodes[k] * f[i - 1];
    for (std::size_t kk = n - 1; kk-- > 0;) {
        for (std::size_t i = kk + 1; i < n; ++i) {
            cdouble d = nodes[i] - nodes[i - kk - 1];
            f[i] /= d;
        }
        for (std::size_t i = kk; i + 1 < n; ++i) f[i] -= f[i + 1];
    }
    return f;
}

// ---------------------------------------------------------------------------
// Monic polynomial roots: Aberth-Ehrlich simultaneous iteration
// ---------------------------------------------------------------------------

/// Roots of z^n + a[n-1] z^{n-1} + ... + a[0]. Simultaneous iteration from a
/// scaled circle (Fujiwara bound); a few Newton polish steps at the end.
inline CVec poly_roots_monic(const CVec& a) {
    const std::size_t n = a.size();
    if (n == 0) return {};
    if (n == 1) return {-a[0]};

    double bound = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double t = std::pow(std::abs(a[n - 1 - k]), 1.0 / static_cast<double>(k + 1));
        bound = std::max(bound, t);
    }
    double r0 = std::max(2.0 * bound, 1e-8);

    CVec z(n);
    for (std::size_t k = 0; k < n; ++k) {
        double th = two_pi * static_cast<double>(k) / static_cast<double>(n) + 0.41;
        z[k] = 0.5 * r0 * cdouble(std::cos(th), std::sin(th)) * (1.0 + 1e-3 * static_cast<double>(k));
    }

    auto eval = [&](cdouble x, cdouble& p, cdouble& dp) {
        p = 1.0;
        dp = 0.0;
        for (std::size_t k = n; k-- > 0;) {
            dp = dp * x + p;
            p = p * x + a[k];
        }
    };

    const int max_iter = 400;
    for (int it = 0; it < max_iter; ++it) {
        double max_step = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cdouble p, dp;
            eval(z[i], p, dp);
            if (p == cdouble(0.0)) continue;
            cdouble w = (dp == cdouble(0.0)) ? cdouble(0.0) : p / dp;
            cdouble s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                cdouble d = z[i] - z[j];
                if (std::abs(d) < 1e-300) d = cdouble(1e-300, 0.0);
                s += 1.0 / d;
            }
            cdouble denom = 1.0 - w * s;
            cdouble step = (std::abs(denom) < 1e-300) ? w : w / denom;
            z[i] -= step;
            max_step = std::max(max_step, std::abs(step) / (1.0 + std::abs(z[i])));
        }
        if (max_step < 1e-15) break;
    }

    // Newton polish
    for (std::size_t i = 0; i < n; ++i) {
        for (int it = 0; it < 3; ++it) {
            cdouble p, dp;
            eval(z[i], p, dp);
            if (dp == cdouble(0.0)) break;
            z[i] -= p / dp;
        }
    }
    return z;
}

}  // namespace koopman::linalg
