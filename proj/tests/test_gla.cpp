#include "doctest.h"

#include <cmath>

#include "koopman/dmd.hpp"
#include "koopman/gla.hpp"
#include "koopman/linalg.hpp"

using namespace koopman;

namespace {

SnapshotMatrix expansion(const CVec& lambda, const std::vector<CVec>& modes,
                         std::size_t count) {
    // b_k = sum_j lambda_j^k v_j
    const std::size_t m = modes.front().size();
    std::vector<CVec> cols;
    CVec pw(lambda.size(), cdouble(1.0));
    for (std::size_t k = 0; k < count; ++k) {
        CVec col(m, cdouble(0.0));
        for (std::size_t j = 0; j < lambda.size(); ++j)
            for (std::size_t i = 0; i < m; ++i) col[i] += pw[j] * modes[j][i];
        cols.push_back(col);
        for (std::size_t j = 0; j < lambda.size(); ++j) pw[j] *= lambda[j];
    }
    return SnapshotMatrix::from_columns(std::move(cols));
}

/// Independent oracle: fit b_k = sum_j lambda_j^k m_j by least squares.
std::vector<CVec> vandermonde_fit(const SnapshotMatrix& s, const CVec& lambda) {
    const std::size_t K = s.count(), m = s.m, r = lambda.size();
    CMat A(K, r);
    CVec pw(r, cdouble(1.0));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < r; ++j) A(k, j) = pw[j];
        for (std::size_t j = 0; j < r; ++j) pw[j] *= lambda[j];
    }
    std::vector<CVec> out(r, CVec(m));
    for (std::size_t q = 0; q < m; ++q) {
        CVec rhs(K);
        for (std::size_t k = 0; k < K; ++k) rhs[k] = s.columns[k][q];
        auto ls = linalg::least_squares(A, rhs);
        for (std::size_t j = 0; j < r; ++j) out[j][q] = ls.x[j];
    }
    return out;
}

}  // namespace

TEST_CASE("eigenvalue list validation") {
    CHECK_THROWS_AS(EigenvalueList::make({cdouble(0.5), cdouble(2.0)}), input_error);
    CHECK_THROWS_AS(EigenvalueList::make({cdouble(1.0), cdouble(1.0)}), input_error);
    auto ok = EigenvalueList::make({cdouble(2.0), cdouble(0.5)});
    CHECK(ok.values.size() == 2);
}

TEST_CASE("fourier projection of constant snapshots") {
    CVec v = {cdouble(1.0, 2.0), cdouble(-3.0, 0.5)};
    auto snap = SnapshotMatrix::from_columns({v, v, v, v});

    auto p0 = fourier_projection(snap, 0.0);
    CHECK(std::abs(p0.mode_at_p[0] - v[0]) < 1e-15);
    CHECK(std::abs(p0.mode_at_p[1] - v[1]) < 1e-15);
    CHECK(std::abs(p0.eigenvalue - cdouble(1.0)) < 1e-15);

    auto ph = fourier_projection(snap, 0.5);  // alternating signs cancel, K even
    CHECK(std::abs(ph.mode_at_p[0]) < 1e-13);
    CHECK(std::abs(ph.mode_at_p[1]) < 1e-13);
}

TEST_CASE("fourier projection at omega 0 is the plain column mean") {
    // small integer data so the plain mean is exact
    std::vector<CVec> cols = {{cdouble(1.0)}, {cdouble(2.0)}, {cdouble(3.0)}, {cdouble(6.0)}};
    auto snap = SnapshotMatrix::from_columns(cols);
    auto p = fourier_projection(snap, 0.0);
    CHECK(p.mode_at_p[0] == cdouble(3.0));
}

TEST_CASE("projection is linear in the snapshots") {
    CVec v1 = {cdouble(0.3, -0.4)};
    auto snap = expansion({std::polar(1.0, 0.7)}, {v1}, 50);
    auto scaled_cols = snap.columns;
    const cdouble alpha(2.5, -1.0);
    for (auto& c : scaled_cols) c[0] *= alpha;
    auto snap2 = SnapshotMatrix::from_columns(scaled_cols);
    auto a = fourier_projection(snap, 0.123);
    auto b = fourier_projection(snap2, 0.123);
    CHECK(std::abs(b.mode_at_p[0] - alpha * a.mode_at_p[0]) < 1e-12);
}

TEST_CASE("gla on a single unit-modulus geometric sequence") {
    CVec v = {cdouble(0.7, 0.1), cdouble(-0.2, 0.9)};
    cdouble lam = std::polar(1.0, two_pi * 0.3);
    auto snap = expansion({lam}, {v}, 100);
    auto modes = gla_modes(snap, EigenvalueList::make({lam}));
    REQUIRE(modes.size() == 1);
    CHECK(std::abs(modes[0].mode_at_p[0] - v[0]) < 1e-10);
    CHECK(std::abs(modes[0].mode_at_p[1] - v[1]) < 1e-10);
    CHECK(modes[0].horizon == 100);
    CHECK(gla_reconstruction_residual(snap, modes) < 1e-9);
}

TEST_CASE("gla recovers resonant unit-circle expansions exactly") {
    // eighth roots of unity: every cross ratio sums to zero over K = 0 mod 8
    CVec lambda = {std::polar(1.0, 0.0), std::polar(1.0, two_pi / 8.0),
                   std::polar(1.0, 3.0 * two_pi / 8.0)};
    std::vector<CVec> modes_true = {{cdouble(1.0, 0.0), cdouble(0.5, 0.5)},
                                    {cdouble(-0.3, 0.2), cdouble(1.5, 0.0)},
                                    {cdouble(0.0, -1.0), cdouble(0.25, 0.75)}};
    auto snap = expansion(lambda, modes_true, 80);
    auto modes = gla_modes(snap, EigenvalueList::make(lambda));
    REQUIRE(modes.size() == 3);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t q = 0; q < 2; ++q)
            CHECK(std::abs(modes[j].mode_at_p[q] - modes_true[j][q]) < 1e-9);
    // comfortably inside the 1e-6 contract for recoverable expansions
}

TEST_CASE("gla off the unit circle: finite-K bias and stage amplification") {
    // b_k = 2^k v1 + 0.5^k v2. Stage 1 carries the Cesaro bias
    // delta = (4 / 3K)(1 - 4^{-K}) toward v2; stage 2 amplifies that error by
    // (lambda_1/lambda_2)^k. The least-squares oracle recovers both modes to
    // machine precision from the same data.
    CVec lambda = {cdouble(2.0), cdouble(0.5)};
    CVec v1 = {cdouble(1.0), cdouble(0.0)};
    CVec v2 = {cdouble(0.0), cdouble(1.0)};
    const std::size_t K = 20;
    auto snap = expansion(lambda, {v1, v2}, K);

    auto oracle = vandermonde_fit(snap, lambda);
    CHECK(std::abs(oracle[0][0] - cdouble(1.0)) < 1e-8);
    CHECK(std::abs(oracle[0][1]) < 1e-8);
    CHECK(std::abs(oracle[1][1] - cdouble(1.0)) < 1e-8);

    auto modes = gla_modes(snap, EigenvalueList::make(lambda));
    const double Kd = static_cast<double>(K);
    double delta = (4.0 / (3.0 * Kd)) * (1.0 - std::pow(4.0, -Kd));
    CHECK(std::abs(modes[0].mode_at_p[0] - cdouble(1.0)) < 1e-12);
    CHECK(std::abs(modes[0].mode_at_p[1] - cdouble(delta)) < 1e-12);

    // the bias shrinks like 1/K at stage 1 ...
    auto modes40 = gla_modes(expansion(lambda, {v1, v2}, 2 * K),
                             EigenvalueList::make(lambda));
    CHECK(std::abs(modes40[0].mode_at_p[1]) < 0.6 * std::abs(modes[0].mode_at_p[1]));

    // ... while stage 2 inherits it amplified by (l1/l2)^k; this is the
    // documented reason GLA is an analytical tool off the unit circle
    double err2_K = std::abs(modes[1].mode_at_p[1] - cdouble(1.0));
    double err2_2K = std::abs(modes40[1].mode_at_p[1] - cdouble(1.0));
    CHECK(err2_K > 1.0);
    CHECK(err2_2K > err2_K);
}

TEST_CASE("gla error paths") {
    auto snap = expansion({cdouble(0.5)}, {{cdouble(1.0)}}, 10);
    CHECK_THROWS_AS(gla_modes(snap, EigenvalueList{{cdouble(0.0)}, true}), input_error);

    // |lambda| < 1 with a huge horizon overflows lambda^{-k}
    std::vector<CVec> ones(4000, CVec{cdouble(1.0)});
    auto big = SnapshotMatrix::from_columns(std::move(ones));
    CHECK_THROWS_AS(gla_modes(big, EigenvalueList::make({cdouble(0.5)})), numerical_error);
}

TEST_CASE("gla agrees with companion dmd on rotation snapshots") {
    auto rot = MapSystem::circle_rotation(0.25);
    auto traj = iterate_map(rot, {0.15}, 200);  // horizon 0 mod 4: resonant averages
    auto obs = Observable::composite({Observable::harmonic(std::vector<int>{1}),
                                      Observable::harmonic(std::vector<int>{2})});
    auto snap = trace(obs, traj);

    auto dmd = companion_dmd(snap.slice(0, 3));
    REQUIRE(dmd.pairs.size() == 2);

    CVec eigs = {dmd.pairs[0].value, dmd.pairs[1].value};
    auto modes = gla_modes(snap.slice(0, 200), EigenvalueList::make(eigs));
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t q = 0; q < 2; ++q)
            CHECK(std::abs(modes[j].mode_at_p[q] - dmd.pairs[j].mode[q]) < 1e-6);
}

TEST_CASE("continuous fourier projection recovers harmonic oscillator modes") {
    const double omega = 1.0;
    auto f = FlowSystem::harmonic_oscillator(omega);
    const double dt = two_pi / 500.0;
    const long nper = 40;
    auto traj = integrate_flow(f, {1.0, 0.0}, dt, 500 * nper);
    auto obs = Observable::composite({Observable::coordinate(0), Observable::coordinate(1)});
    auto snap = trace(obs, traj);

    // phi_1 C_1 = (p1(0) - i p2(0)/omega)/2 (1, i omega)^T at omega/(2 pi) cycles
    auto proj = fourier_projection_continuous(snap, omega / two_pi, dt);
    cdouble expected0 = 0.5 * cdouble(1.0, 0.0);
    cdouble expected1 = 0.5 * cdouble(0.0, omega);
    CHECK(std::abs(proj.mode_at_p[0] - expected0) < 1e-3);
    CHECK(std::abs(proj.mode_at_p[1] - expected1) < 1e-3);

    // conjugate frequency picks up the second normal mode
    auto proj2 = fourier_projection_continuous(snap, -omega / two_pi, dt);
    CHECK(std::abs(proj2.mode_at_p[0] - cdouble(0.5)) < 1e-3);
    CHECK(std::abs(proj2.mode_at_p[1] + cdouble(0.0, omega) * 0.5) < 1e-3);
}

TEST_CASE("continuous gla subtracts recovered normal modes in order") {
    // two-mode exponential expansion with distinct decay rates
    const double dt = 0.01;
    const std::size_t K = 2000;
    CVec gen = {cdouble(0.0, 1.0), cdouble(-0.5, 0.0)};
    CVec v1 = {cdouble(1.0), cdouble(0.0, 1.0)};
    CVec v2 = {cdouble(0.5), cdouble(-1.0)};
    std::vector<CVec> cols;
    for (std::size_t k = 0; k < K; ++k) {
        double t = dt * static_cast<double>(k);
        CVec col(2);
        for (std::size_t q = 0; q < 2; ++q)
            col[q] = std::exp(gen[0] * t) * v1[q] + std::exp(gen[1] * t) * v2[q];
        cols.push_back(col);
    }
    auto snap = SnapshotMatrix::from_columns(std::move(cols));
    auto modes = gla_modes_continuous(snap, gen, dt);
    REQUIRE(modes.size() == 2);
    // stage 1 (neutral mode) converges at 1/T; the decaying remainder only
    // pollutes at O(1/T)
    for (std::size_t q = 0; q < 2; ++q)
        CHECK(std::abs(modes[0].mode_at_p[q] - v1[q]) < 0.1);
    CHECK_THROWS_AS(gla_modes_continuous(snap, {cdouble(-1.0), cdouble(0.0)}, dt),
                    input_error);
}
