#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "koopman/core.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"

namespace koopman {

/// Scalar or vector-valued observable on a state space.
///
/// Kinds:
///  - harmonic(k):  e^{i 2 pi k . x} on torus coordinates (x rescaled by the
///    coordinate period). Wavevector entries are real so that half-period
///    trigonometric observables reduce to harmonics: sin(pi x - pi/4), say,
///    is a weighted pair of k = +-1/2 harmonics.
///  - coordinate(i): projection onto state coordinate i.
///  - ball_indicator(center, r): 1 inside the euclidean ball of radius r,
///    with wrap-around distance on periodic coordinates.
///  - composite(parts): scalar parts stacked into a vector observable.
class Observable {
  public:
    struct Harmonic {
        std::vector<double> k;
    };
    struct Coordinate {
        std::size_t index;
    };
    struct BallIndicator {
        RVec center;
        double radius;
    };
    struct Composite {
        std::vector<Observable> parts;
    };

    static Observable harmonic(std::vector<double> k) {
        Observable o;
        o.kind_ = Harmonic{std::move(k)};
        return o;
    }
    static Observable harmonic(std::vector<int> k) {
        std::vector<double> kd(k.begin(), k.end());
        return harmonic(std::move(kd));
    }
    static Observable coordinate(std::size_t index) {
        Observable o;
        o.kind_ = Coordinate{index};
        return o;
    }
    static Observable ball_indicator(RVec center, double radius) {
        if (radius <= 0.0) throw input_error("ball_indicator: radius must be positive");
        Observable o;
        o.kind_ = BallIndicator{std::move(center), radius};
        return o;
    }
    static Observable composite(std::vector<Observable> parts) {
        for (const auto& p : parts)
            if (p.codomain_dim() != 1)
                throw input_error("composite: parts must be scalar observables");
        Observable o;
        o.kind_ = Composite{std::move(parts)};
        return o;
    }

    std::size_t codomain_dim() const {
        if (const auto* c = std::get_if<Composite>(&kind_)) return c->parts.size();
        return 1;
    }

    template <class T>
    const T* as() const {
        return std::get_if<T>(&kind_);
    }

  private:
    std::variant<Harmonic, Coordinate, BallIndicator, Composite> kind_;
};

namespace detail {

inline cdouble eval_scalar(const Observable& obs, std::span<const double> x,
                           std::span<const CoordDomain> domain) {
    if (const auto* h = obs.as<Observable::Harmonic>()) {
        if (h->k.size() != x.size())
            throw input_error("harmonic: wavevector dimension mismatch");
        double phase = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (h->k[i] == 0.0) continue;
            if (!domain[i].periodic())
                throw input_error("harmonic: coordinate " + std::to_string(i) +
                                  " is not torus-periodic");
            phase += h->k[i] * x[i] / domain[i].period;
        }
        return std::polar(1.0, two_pi * phase);
    }
    if (const auto* c = obs.as<Observable::Coordinate>()) {
        if (c->index >= x.size()) throw input_error("coordinate: index out of range");
        return cdouble(x[c->index], 0.0);
    }
    if (const auto* b = obs.as<Observable::BallIndicator>()) {
        if (b->center.size() != x.size())
            throw input_error("ball_indicator: center dimension mismatch");
        double d2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double di = std::abs(x[i] - b->center[i]);
            if (domain[i].periodic()) {
                double L = domain[i].period;
                di = std::fmod(di, L);
                di = std::min(di, L - di);
            }
            d2 += di * di;
        }
        return cdouble(d2 < b->radius * b->radius ? 1.0 : 0.0, 0.0);
    }
    throw input_error("eval: composite observable is not scalar");
}

}  // namespace detail

/// Evaluate an observable at a state. Domain descriptors supply the periods
/// of torus coordinates.
inline CVec eval(const Observable& obs, std::span<const double> x,
                 std::span<const CoordDomain> domain) {
    if (domain.size() != x.size()) throw input_error("eval: domain descriptor mismatch");
    if (const auto* c = obs.as<Observable::Composite>()) {
        CVec out;
        out.reserve(c->parts.size());
        for (const auto& p : c->parts) out.push_back(detail::eval_scalar(p, x, domain));
        return out;
    }
    return {detail::eval_scalar(obs, x, domain)};
}

/// Evaluate on the unit torus [0,1)^D.
inline CVec eval(const Observable& obs, std::span<const double> x) {
    std::vector<CoordDomain> domain(x.size(), CoordDomain::torus(1.0));
    return eval(obs, x, domain);
}

// ---------------------------------------------------------------------------
// Snapshot sequences
// ---------------------------------------------------------------------------

/// Ordered snapshot vectors b_k, the only input DMD and GLA need.
struct SnapshotMatrix {
    std::vector<CVec> columns;
    std::size_t m = 0;  // output dimension (rows)
    std::string source;

    std::size_t count() const { return columns.size(); }

    static SnapshotMatrix from_columns(std::vector<CVec> cols, std::string src = "") {
        if (cols.size() < 2) throw input_error("snapshot matrix needs at least 2 columns");
        SnapshotMatrix s;
        s.m = cols.front().size();
        for (const auto& c : cols)
            if (c.size() != s.m) throw input_error("snapshot columns have unequal length");
        s.columns = std::move(cols);
        s.source = std::move(src);
        return s;
    }

    /// Columns [first, last) of this matrix; the transient-skipping slice.
    SnapshotMatrix slice(std::size_t first, std::size_t last) const {
        if (first >= last || last > columns.size())
            throw input_error("snapshot slice out of range");
        std::vector<CVec> cols(columns.begin() + static_cast<long>(first),
                               columns.begin() + static_cast<long>(last));
        return from_columns(std::move(cols), source);
    }
};

/// Track an observable along a trajectory: column n is eval at state n.
inline SnapshotMatrix trace(const Observable& obs, const Trajectory& traj) {
    if (traj.states.size() < 2)
        throw input_error("trace: trajectory must have at least 2 states");
    std::vector<CVec> cols;
    cols.reserve(traj.states.size());
    for (std::size_t n = 0; n < traj.states.size(); ++n) {
        try {
            cols.push_back(eval(obs, traj.states[n], traj.domain));
        } catch (const input_error& e) {
            throw input_error(std::string(e.what()) + " (trajectory step " +
                              std::to_string(n) + ")");
        }
    }
    return SnapshotMatrix::from_columns(std::move(cols), traj.system_id);
}

// ---------------------------------------------------------------------------
// Wavevector grids
// ---------------------------------------------------------------------------

/// All integer wavevectors with |k|_inf <= kmax, lexicographic. This ordering
/// is the canonical coefficient-vector layout throughout the library.
inline std::vector<std::vector<int>> wavevector_grid(int dims, int kmax) {
    if (dims < 1) throw input_error("wavevector_grid: dims must be positive");
    if (kmax < 0) throw input_error("wavevector_grid: kmax must be nonnegative");
    std::vector<std::vector<int>> out;
    std::vector<int> k(static_cast<std::size_t>(dims), -kmax);
    const std::size_t total = [&] {
        std::size_t t = 1;
        for (int i = 0; i < dims; ++i) t *= static_cast<std::size_t>(2 * kmax + 1);
        return t;
    }();
    out.reserve(total);
    while (true) {
        out.push_back(k);
        int i = dims - 1;
        while (i >= 0 && k[static_cast<std::size_t>(i)] == kmax) {
            k[static_cast<std::size_t>(i)] = -kmax;
            --i;
        }
        if (i < 0) break;
        ++k[static_cast<std::size_t>(i)];
    }
    return out;
}

/// Harmonic observables over the canonical wavevector grid.
inline std::vector<Observable> harmonic_grid(int dims, int kmax) {
    std::vector<Observable> out;
    for (const auto& k : wavevector_grid(dims, kmax)) out.push_back(Observable::harmonic(k));
    return out;
}

/// Index of wavevector k in the canonical grid layout.
inline std::size_t wavevector_index(std::span<const int> k, int kmax) {
    std::size_t idx = 0;
    const std::size_t width = static_cast<std::size_t>(2 * kmax + 1);
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] < -kmax || k[i] > kmax) throw input_error("wavevector out of grid");
        idx = idx * width + static_cast<std::size_t>(k[i] + kmax);
    }
    return idx;
}

}  // namespace koopman
