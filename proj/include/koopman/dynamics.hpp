#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "koopman/core.hpp"
#include "koopman/errors.hpp"

namespace koopman {

enum class CoordKind { Torus, Unbounded };

struct CoordDomain {
    CoordKind kind = CoordKind::Unbounded;
    double period = 0.0;

    static CoordDomain torus(double period) { return {CoordKind::Torus, period}; }
    static CoordDomain real() { return {CoordKind::Unbounded, 0.0}; }
    bool periodic() const { return kind == CoordKind::Torus; }
};

// ---------------------------------------------------------------------------
// Flows
// ---------------------------------------------------------------------------

enum class FlowName { HarmonicOscillator, DoubleWell, HillVortex };

/// Continuous-time system dx/dt = f(x, t). Immutable after construction.
class FlowSystem {
  public:
    FlowName name;
    RVec params;
    std::size_t dim = 0;
    bool time_dependent = false;
    double forcing_period = 0.0;
    std::vector<CoordDomain> domain;

    /// p1' = p2, p2' = -omega^2 p1.
    static FlowSystem harmonic_oscillator(double omega) {
        FlowSystem f;
        f.name = FlowName::HarmonicOscillator;
        f.params = {omega};
        f.dim = 2;
        f.domain = {CoordDomain::real(), CoordDomain::real()};
        return f;
    }

    /// Planar Hamiltonian flow of H(q,p) = p^2/2 - k (q^2/2 - b q^4/4).
    static FlowSystem double_well(double k, double b) {
        FlowSystem f;
        f.name = FlowName::DoubleWell;
        f.params = {k, b};
        f.dim = 2;
        f.domain = {CoordDomain::real(), CoordDomain::real()};
        return f;
    }

    /// Periodically forced Hill vortex flow on (R, z, theta), forcing period 1.
    /// States with R <= 0 are outside the domain (1/R and sqrt(2R) terms).
    static FlowSystem hill_vortex(double c, double eps) {
        FlowSystem f;
        f.name = FlowName::HillVortex;
        f.params = {c, eps};
        f.dim = 3;
        f.time_dependent = true;
        f.forcing_period = 1.0;
        f.domain = {CoordDomain::real(), CoordDomain::real(), CoordDomain::torus(two_pi)};
        return f;
    }

    void rhs(double t, const double* x, double* dx) const {
        switch (name) {
            case FlowName::HarmonicOscillator: {
                const double omega = params[0];
                dx[0] = x[1];
                dx[1] = -omega * omega * x[0];
                return;
            }
            case FlowName::DoubleWell: {
                const double k = params[0], b = params[1];
                dx[0] = x[1];
                dx[1] = k * x[0] - k * b * x[0] * x[0] * x[0];
                return;
            }
            case FlowName::HillVortex: {
                const double c = params[0], eps = params[1];
                const double R = x[0], z = x[1], th = x[2];
                if (R <= 0.0) {
                    dx[0] = dx[1] = dx[2] = std::numeric_limits<double>::quiet_NaN();
                    return;
                }
                const double force = eps * std::sin(two_pi * t);
                const double sq = std::sqrt(2.0 * R);
                dx[0] = 2.0 * R * z + force * sq * std::sin(th);
                dx[1] = 1.0 - 4.0 * R - z * z + force * z / sq * std::sin(th);
                dx[2] = c / (2.0 * R) + force * 2.0 * std::cos(th);
                return;
            }
        }
    }

    std::string id() const {
        switch (name) {
            case FlowName::HarmonicOscillator:
                return "harmonic_oscillator(omega=" + std::to_string(params[0]) + ")";
            case FlowName::DoubleWell:
                return "double_well(k=" + std::to_string(params[0]) +
                       ",b=" + std::to_string(params[1]) + ")";
            case FlowName::HillVortex:
                return "hill_vortex(c=" + std::to_string(params[0]) +
                       ",eps=" + std::to_string(params[1]) + ")";
        }
        return "flow";
    }
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct Trajectory {
    std::vector<RVec> states;
    double dt = 1.0;  // sampling interval; 1 for maps
    RVec x0;
    std::string system_id;
    std::vector<CoordDomain> domain;

    std::size_t length() const { return states.size(); }
};

namespace detail {

inline void wrap_state(RVec& x, const std::vector<CoordDomain>& domain) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (domain[i].periodic()) x[i] = wrap_coord(x[i], domain[i].period);
}

inline bool all_finite(const RVec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

/// One classical RK4 step; torus coordinates are wrapped afterwards.
inline void rk4_step(const FlowSystem& f, double t, double h, RVec& x) {
    const std::size_t d = x.size();
    RVec k1(d), k2(d), k3(d), k4(d), tmp(d);
    f.rhs(t, x.data(), k1.data());
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f.rhs(t + 0.5 * h, tmp.data(), k2.data());
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f.rhs(t + 0.5 * h, tmp.data(), k3.data());
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    f.rhs(t + h, tmp.data(), k4.data());
    for (std::size_t i = 0; i < d; ++i)
        x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    wrap_state(x, f.domain);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Maps
// ---------------------------------------------------------------------------

enum class MapName {
    StandardMap,
    CircleRotation,
    DiagonalLinear,
    Cyclic3,
    HeatGalerkin,
    MixedTorusGroup,
    PoincareSection,
    SampledFlow,
    TorusChart
};

/// Discrete-time system on a fixed state domain. Immutable after
/// construction; step evaluation is pure.
class MapSystem {
  public:
    MapName name;
    RVec params;
    std::size_t dim = 0;
    std::vector<CoordDomain> domain;

    /// Chirikov standard map on [0,1)^2:
    ///   x' = x + p + eps sin(2 pi x),  p' = p + eps sin(2 pi x).
    static MapSystem standard_map(double eps) {
        MapSystem m;
        m.name = MapName::StandardMap;
        m.params = {eps};
        m.dim = 2;
        m.domain = {CoordDomain::torus(1.0), CoordDomain::torus(1.0)};
        return m;
    }

    /// x' = x + omega mod 1.
    static MapSystem circle_rotation(double omega) {
        MapSystem m;
        m.name = MapName::CircleRotation;
        m.params = {omega};
        m.dim = 1;
        m.domain = {CoordDomain::torus(1.0)};
        return m;
    }

    /// x_i' = mu_i x_i on R^d.
    static MapSystem diagonal_linear(RVec mu) {
        if (mu.empty()) throw input_error("diagonal_linear: needs at least one multiplier");
        MapSystem m;
        m.name = MapName::DiagonalLinear;
        m.dim = mu.size();
        m.domain.assign(m.dim, CoordDomain::real());
        m.params = std::move(mu);
        return m;
    }

    /// Order-3 cyclic group: s' = s + 1 mod 3 on states {0, 1, 2}.
    static MapSystem cyclic3() {
        MapSystem m;
        m.name = MapName::Cyclic3;
        m.dim = 1;
        m.domain = {CoordDomain::torus(3.0)};
        return m;
    }

    /// Galerkin-truncated heat map: each retained Fourier coefficient decays
    /// by exp(-4 pi^2 c^2 |j|^2 h) per step. One state coordinate per
    /// wavevector, in the order given.
    static MapSystem heat_galerkin(double c, double h,
                                   std::vector<std::array<int, 2>> waves) {
        if (h <= 0.0) throw input_error("heat_galerkin: time step must be positive");
        if (waves.empty()) throw input_error("heat_galerkin: empty wavevector set");
        MapSystem m;
        m.name = MapName::HeatGalerkin;
        m.dim = waves.size();
        m.domain.assign(m.dim, CoordDomain::real());
        m.params = {c, h};
        m.waves_ = std::move(waves);
        m.factors_.reserve(m.waves_.size());
        for (const auto& j : m.waves_) {
            double j2 = static_cast<double>(j[0]) * j[0] + static_cast<double>(j[1]) * j[1];
            m.factors_.push_back(std::exp(-4.0 * 3.14159265358979323846 *
                                          3.14159265358979323846 * c * c * j2 * h));
        }
        return m;
    }

    /// All wavevectors with |j|_inf <= kmax in lexicographic order.
    static MapSystem heat_galerkin_grid(double c, double h, int kmax) {
        std::vector<std::array<int, 2>> waves;
        for (int j0 = -kmax; j0 <= kmax; ++j0)
            for (int j1 = -kmax; j1 <= kmax; ++j1) waves.push_back({j0, j1});
        return heat_galerkin(c, h, std::move(waves));
    }

    /// Standard map driven by a period-3 group action; coordinates (I, theta)
    /// in [0, 2 pi) and group element s in {0, 1, 2}.
    static MapSystem mixed_torus_group(double K) {
        MapSystem m;
        m.name = MapName::MixedTorusGroup;
        m.params = {K};
        m.dim = 3;
        m.domain = {CoordDomain::torus(two_pi), CoordDomain::torus(two_pi),
                    CoordDomain::torus(3.0)};
        return m;
    }

    const std::vector<std::array<int, 2>>& heat_waves() const { return waves_; }
    const FlowSystem& flow() const { return flow_; }
    const MapSystem& chart_inner() const { return *inner_; }
    const RVec& chart_lo() const { return lo_; }
    const RVec& chart_hi() const { return hi_; }

    std::string id() const;
    RVec step(std::span<const double> state) const;

    friend MapSystem poincare_section(const FlowSystem&, double, int);
    friend MapSystem sampled_flow(const FlowSystem&, double, int);
    friend MapSystem torus_chart(MapSystem, RVec, RVec);

  private:
    // section / sampled-flow payload
    FlowSystem flow_;
    double flow_time_ = 0.0;
    int substeps_ = 0;
    // chart payload
    std::shared_ptr<const MapSystem> inner_;
    RVec lo_, hi_;
    // heat payload
    std::vector<std::array<int, 2>> waves_;
    RVec factors_;
};

/// One forward application of the map, torus coordinates wrapped into range.
inline RVec step_map(const MapSystem& m, std::span<const double> state) {
    return m.step(state);
}

inline RVec MapSystem::step(std::span<const double> state) const {
    if (state.size() != dim)
        throw input_error("step_map: state has dimension " + std::to_string(state.size()) +
                          ", system expects " + std::to_string(dim));
    RVec out(state.begin(), state.end());
    switch (name) {
        case MapName::StandardMap: {
            const double eps = params[0];
            const double kick = eps * std::sin(two_pi * out[0]);
            const double x = out[0], p = out[1];
            out[0] = wrap_coord(x + p + kick, 1.0);
            out[1] = wrap_coord(p + kick, 1.0);
            return out;
        }
        case MapName::CircleRotation:
            out[0] = wrap_coord(out[0] + params[0], 1.0);
            return out;
        case MapName::DiagonalLinear:
            for (std::size_t i = 0; i < dim; ++i) out[i] *= params[i];
            return out;
        case MapName::Cyclic3:
            out[0] = wrap_coord(out[0] + 1.0, 3.0);
            return out;
        case MapName::HeatGalerkin:
            for (std::size_t i = 0; i < dim; ++i) out[i] *= factors_[i];
            return out;
        case MapName::MixedTorusGroup: {
            const double K = params[0];
            const double s = out[2];
            double I = wrap_coord(out[0] + 0.5 * s * K * std::sin(out[1]), two_pi);
            double th = wrap_coord(out[1] + I, two_pi);
            out[0] = I;
            out[1] = th;
            out[2] = wrap_coord(s + 1.0, 3.0);
            return out;
        }
        case MapName::PoincareSection:
        case MapName::SampledFlow: {
            const double h = flow_time_ / substeps_;
            for (int k = 0; k < substeps_; ++k) {
                detail::rk4_step(flow_, k * h, h, out);
                if (!detail::all_finite(out))
                    throw divergence_error("flow state became non-finite", k);
            }
            return out;
        }
        case MapName::TorusChart: {
            RVec x(dim);
            for (std::size_t i = 0; i < dim; ++i)
                x[i] = lo_[i] + out[i] * (hi_[i] - lo_[i]);
            RVec y = inner_->step(x);
            for (std::size_t i = 0; i < dim; ++i)
                out[i] = wrap_coord((y[i] - lo_[i]) / (hi_[i] - lo_[i]), 1.0);
            return out;
        }
    }
    throw input_error("step_map: unknown map");
}

inline std::string MapSystem::id() const {
    switch (name) {
        case MapName::StandardMap:
            return "standard_map(eps=" + std::to_string(params[0]) + ")";
        case MapName::CircleRotation:
            return "circle_rotation(omega=" + std::to_string(params[0]) + ")";
        case MapName::DiagonalLinear:
            return "diagonal_linear(d=" + std::to_string(dim) + ")";
        case MapName::Cyclic3:
            return "cyclic3";
        case MapName::HeatGalerkin:
            return "heat_galerkin(c=" + std::to_string(params[0]) +
                   ",h=" + std::to_string(params[1]) + ",n=" + std::to_string(dim) + ")";
        case MapName::MixedTorusGroup:
            return "mixed_torus_group(K=" + std::to_string(params[0]) + ")";
        case MapName::PoincareSection:
            return "poincare_section(" + flow_.id() + ",T=" + std::to_string(flow_time_) + ")";
        case MapName::SampledFlow:
            return "sampled_flow(" + flow_.id() + ",dt=" + std::to_string(flow_time_) + ")";
        case MapName::TorusChart:
            return "torus_chart(" + inner_->id() + ")";
    }
    return "map";
}

/// Time-T return map of a periodically forced flow. The step integrates the
/// flow over exactly one period with fixed-step RK4 (substeps stages), so
/// n applications reproduce one integration over n periods exactly.
inline MapSystem poincare_section(const FlowSystem& flow, double period, int substeps = 256) {
    if (period <= 0.0) throw input_error("poincare_section: period must be positive");
    if (!flow.time_dependent)
        throw input_error("poincare_section: flow is autonomous; use sampled_flow");
    double ratio = period / flow.forcing_period;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw input_error("poincare_section: period must be a multiple of the forcing period");
    MapSystem m;
    m.name = MapName::PoincareSection;
    m.dim = flow.dim;
    m.domain = flow.domain;
    m.params = flow.params;
    m.flow_ = flow;
    m.flow_time_ = period;
    m.substeps_ = std::max(1, substeps);
    return m;
}

/// Time-dt map of an autonomous flow.
inline MapSystem sampled_flow(const FlowSystem& flow, double dt, int substeps = 1) {
    if (dt <= 0.0) throw input_error("sampled_flow: dt must be positive");
    if (flow.time_dependent)
        throw input_error("sampled_flow: flow is time dependent; use poincare_section");
    MapSystem m;
    m.name = MapName::SampledFlow;
    m.dim = flow.dim;
    m.domain = flow.domain;
    m.params = flow.params;
    m.flow_ = flow;
    m.flow_time_ = dt;
    m.substeps_ = std::max(1, substeps);
    return m;
}

/// Affine chart mapping the box [lo, hi] onto the unit torus, so that
/// harmonic averaging applies to bounded non-periodic systems. The caller
/// picks a box containing the orbits of interest; anything escaping the box
/// wraps around.
inline MapSystem torus_chart(MapSystem inner, RVec lo, RVec hi) {
    if (lo.size() != inner.dim || hi.size() != inner.dim)
        throw input_error("torus_chart: box dimension mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(hi[i] > lo[i])) throw input_error("torus_chart: empty box");
    MapSystem m;
    m.name = MapName::TorusChart;
    m.dim = inner.dim;
    m.domain.assign(m.dim, CoordDomain::torus(1.0));
    m.params = inner.params;
    m.inner_ = std::make_shared<const MapSystem>(std::move(inner));
    m.lo_ = std::move(lo);
    m.hi_ = std::move(hi);
    return m;
}

/// Map a point of the chart box to unit-torus chart coordinates.
inline RVec chart_point(const MapSystem& chart, std::span<const double> x) {
    if (chart.name != MapName::TorusChart) throw input_error("chart_point: not a chart map");
    RVec y(chart.dim);
    for (std::size_t i = 0; i < chart.dim; ++i)
        y[i] = wrap_coord((x[i] - chart.chart_lo()[i]) /
                              (chart.chart_hi()[i] - chart.chart_lo()[i]),
                          1.0);
    return y;
}

/// Iterate a map n_steps times from x0; the trajectory has n_steps + 1 states.
inline Trajectory iterate_map(const MapSystem& m, RVec x0, long n_steps) {
    if (n_steps < 0) throw input_error("iterate_map: negative step count");
    if (x0.size() != m.dim) throw input_error("iterate_map: x0 dimension mismatch");
    Trajectory traj;
    traj.dt = 1.0;
    traj.x0 = x0;
    traj.system_id = m.id();
    traj.domain = m.domain;
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    detail::wrap_state(x0, m.domain);
    traj.states.push_back(x0);
    RVec x = std::move(x0);
    for (long k = 0; k < n_steps; ++k) {
        x = m.step(x);
        if (!detail::all_finite(x)) throw divergence_error("map state became non-finite", k);
        traj.states.push_back(x);
    }
    return traj;
}

/// Fixed-step RK4 sampling of a flow: n_steps + 1 states, deterministic for
/// fixed inputs.
inline Trajectory integrate_flow(const FlowSystem& f, RVec x0, double dt, long n_steps) {
    if (dt <= 0.0) throw input_error("integrate_flow: dt must be positive");
    if (n_steps < 1) throw input_error("integrate_flow: n_steps must be at least 1");
    if (x0.size() != f.dim) throw input_error("integrate_flow: x0 dimension mismatch");
    Trajectory traj;
    traj.dt = dt;
    traj.x0 = x0;
    traj.system_id = f.id();
    traj.domain = f.domain;
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    detail::wrap_state(x0, f.domain);
    traj.states.push_back(x0);
    RVec x = std::move(x0);
    for (long k = 0; k < n_steps; ++k) {
        detail::rk4_step(f, k * dt, dt, x);
        if (!detail::all_finite(x))
            throw divergence_error("flow state became non-finite", k);
        traj.states.push_back(x);
    }
    return traj;
}

/// H(q,p) of the double-well flow; conserved along trajectories.
inline double double_well_energy(double k, double b, double q, double p) {
    return 0.5 * p * p - k * (0.5 * q * q - 0.25 * b * q * q * q * q);
}

/// Streamfunction R (1 - 2R - z^2) of the unforced Hill vortex; the R-z
/// motion follows its level sets when eps = 0.
inline double hill_streamfunction(double R, double z) {
    return R * (1.0 - 2.0 * R - z * z);
}

}  // namespace koopman
