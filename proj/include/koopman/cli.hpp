#pragma once

#include <chrono>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "koopman/averaging.hpp"
#include "koopman/dmd.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/gla.hpp"
#include "koopman/indicators.hpp"
#include "koopman/io.hpp"
#include "koopman/quotient.hpp"

namespace koopman::cli {

inline constexpr const char* tool_version = "0.1.0";

/// One CLI invocation: command, a single input source (built-in system or
/// file), algorithm parameters, output sink.
struct RunConfig {
    std::string command;
    std::string system;                         // built-in name, or empty
    std::string input;                          // file path, or empty
    std::map<std::string, std::string> params;  // k=v pairs
    std::string out;                            // empty writes to stdout
    io::Format format = io::Format::Csv;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    return io::detail::split(s, sep);
}

inline double to_double(const std::string& s, const std::string& what) {
    double v;
    if (!io::detail::parse_double(s, v))
        throw input_error("cannot parse number '" + s + "' for " + what);
    return v;
}

inline long to_long(const std::string& s, const std::string& what) {
    double v = to_double(s, what);
    long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw input_error(what + " must be an integer, got '" + s + "'");
    return l;
}

/// Validated access to the --params map.
class Params {
  public:
    Params(const std::map<std::string, std::string>& kv,
           const std::set<std::string>& allowed, const std::string& command)
        : kv_(kv) {
        for (const auto& [k, v] : kv)
            if (!allowed.count(k))
                throw input_error("unknown parameter '" + k + "' for command " + command);
    }

    bool has(const std::string& k) const { return kv_.count(k) > 0; }

    std::string str(const std::string& k, const std::string& def = "") const {
        auto it = kv_.find(k);
        return it == kv_.end() ? def : it->second;
    }

    std::string require(const std::string& k) const {
        auto it = kv_.find(k);
        if (it == kv_.end()) throw input_error("missing required parameter '" + k + "'");
        return it->second;
    }

    double num(const std::string& k, double def) const {
        auto it = kv_.find(k);
        return it == kv_.end() ? def : to_double(it->second, k);
    }

    long integer(const std::string& k, long def) const {
        auto it = kv_.find(k);
        return it == kv_.end() ? def : to_long(it->second, k);
    }

    /// Flat numeric list "a:b:c".
    RVec list(const std::string& k) const {
        RVec out;
        for (const auto& tok : split(require(k), ':')) out.push_back(to_double(tok, k));
        return out;
    }

    /// Grouped numeric lists "a:b;c:d" -> {{a,b},{c,d}}.
    std::vector<RVec> groups(const std::string& k) const {
        std::vector<RVec> out;
        for (const auto& grp : split(require(k), ';')) {
            RVec g;
            for (const auto& tok : split(grp, ':')) g.push_back(to_double(tok, k));
            out.push_back(std::move(g));
        }
        return out;
    }

  private:
    const std::map<std::string, std::string>& kv_;
};

// ---- built-in system construction -----------------------------------------

inline bool is_flow_name(const std::string& name) {
    return name == "harmonic_oscillator" || name == "double_well" || name == "hill_vortex";
}

inline FlowSystem make_flow(const std::string& name, const Params& p) {
    if (name == "harmonic_oscillator")
        return FlowSystem::harmonic_oscillator(p.num("omega0", 1.0));
    if (name == "double_well") return FlowSystem::double_well(p.num("k", 1.0), p.num("b", 2.0));
    if (name == "hill_vortex")
        return FlowSystem::hill_vortex(p.num("c", 0.3495), p.num("eps", 0.3495));
    throw input_error("unknown flow system '" + name + "'");
}

inline MapSystem make_map(const std::string& name, const Params& p) {
    if (name == "standard_map") return MapSystem::standard_map(p.num("eps", 0.15));
    if (name == "circle_rotation") return MapSystem::circle_rotation(p.num("omega0", 0.25));
    if (name == "diagonal") return MapSystem::diagonal_linear(p.list("mu"));
    if (name == "cyclic3") return MapSystem::cyclic3();
    if (name == "heat_galerkin")
        return MapSystem::heat_galerkin_grid(p.num("c", 1.0), p.num("h", 0.01),
                                             static_cast<int>(p.integer("kmax_heat", 2)));
    if (name == "mixed_torus_group") return MapSystem::mixed_torus_group(p.num("K", 1.0));
    if (is_flow_name(name)) {
        // sample the flow; bounded systems get a torus chart for averaging
        FlowSystem flow = make_flow(name, p);
        double dt = p.num("dt", 0.05);
        int substeps = static_cast<int>(p.integer("substeps", 5));
        MapSystem sampled = flow.time_dependent
                                ? poincare_section(flow, flow.forcing_period, substeps)
                                : sampled_flow(flow, dt, substeps);
        if (p.has("window")) {
            auto win = p.groups("window");
            if (win.size() != sampled.dim)
                throw input_error("window needs one lo:hi group per coordinate");
            RVec lo, hi;
            for (const auto& g : win) {
                if (g.size() != 2) throw input_error("window groups are lo:hi");
                lo.push_back(g[0]);
                hi.push_back(g[1]);
            }
            return torus_chart(std::move(sampled), std::move(lo), std::move(hi));
        }
        return sampled;
    }
    throw input_error("unknown map system '" + name + "'");
}

/// Seeds for charted (bounded) systems arrive in original coordinates and
/// must enter the map through the chart.
inline RVec to_system_coords(const MapSystem& m, RVec x) {
    if (m.name == MapName::TorusChart) return chart_point(m, x);
    return x;
}

// ---- observable specs ------------------------------------------------------

struct ObsSpec {
    Observable obs = Observable::harmonic(std::vector<int>{0});
    CVec weights;  // nonempty: collapse the composite to sum_j w_j part_j
};

inline ObsSpec make_observable(const Params& p, std::size_t dim) {
    std::string kind = p.str("obs", "coordinates");
    ObsSpec spec;
    if (kind == "coordinates") {
        std::vector<Observable> parts;
        for (std::size_t i = 0; i < dim; ++i) parts.push_back(Observable::coordinate(i));
        spec.obs = Observable::composite(std::move(parts));
        return spec;
    }
    if (kind == "harmonic") {
        RVec k = p.list("k");
        if (k.size() != dim) throw input_error("harmonic wavevector dimension mismatch");
        spec.obs = Observable::harmonic(std::vector<double>(k.begin(), k.end()));
        return spec;
    }
    if (kind == "harmonics") {
        std::vector<Observable> parts;
        for (const auto& k : p.groups("klist")) {
            if (k.size() != dim) throw input_error("harmonics wavevector dimension mismatch");
            parts.push_back(Observable::harmonic(std::vector<double>(k.begin(), k.end())));
        }
        spec.obs = Observable::composite(std::move(parts));
        return spec;
    }
    if (kind == "harmonic_grid") {
        int kmax = static_cast<int>(p.integer("kmax", 5));
        spec.obs = Observable::composite(harmonic_grid(static_cast<int>(dim), kmax));
        return spec;
    }
    if (kind == "trigpoly") {
        // terms w_re:w_im:k_1:...:k_D per group; evaluates sum_j w_j e^{i2pi k_j.x}
        std::vector<Observable> parts;
        CVec weights;
        for (const auto& t : p.groups("terms")) {
            if (t.size() != 2 + dim)
                throw input_error("trigpoly terms are w_re:w_im:k_1:...:k_D");
            weights.push_back(cdouble(t[0], t[1]));
            parts.push_back(
                Observable::harmonic(std::vector<double>(t.begin() + 2, t.end())));
        }
        spec.obs = Observable::composite(std::move(parts));
        spec.weights = std::move(weights);
        return spec;
    }
    throw input_error("unknown observable kind '" + kind + "'");
}

// ---- targets ----------------------------------------------------------------

inline TargetMeasure make_target(const std::string& s, int dims, int kmax) {
    auto toks = split(s, ':');
    if (toks[0] == "uniform") return uniform_target(dims, kmax);
    if (toks[0] == "gaussian") {
        if (toks.size() != 1 + 2 * static_cast<std::size_t>(dims))
            throw input_error("gaussian target is gaussian:c_1:..:c_D:s_1:..:s_D");
        RVec center, sigma;
        for (int d = 0; d < dims; ++d)
            center.push_back(to_double(toks[1 + static_cast<std::size_t>(d)], "target"));
        for (int d = 0; d < dims; ++d)
            sigma.push_back(
                to_double(toks[1 + static_cast<std::size_t>(dims + d)], "target"));
        return gaussian_target(center, sigma, kmax);
    }
    if (toks[0] == "grid") {
        if (toks.size() != 2) throw input_error("grid target is grid:PATH");
        std::ifstream in(toks[1]);
        if (!in) throw input_error("cannot open '" + toks[1] + "'");
        std::vector<double> vals;
        std::vector<std::size_t> shape;
        std::string line;
        std::size_t width = 0, height = 0;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            auto fields = split(line, ',');
            if (width == 0) width = fields.size();
            if (fields.size() != width)
                throw input_error(toks[1] + ": ragged row at line " + std::to_string(lineno));
            for (const auto& f : fields) vals.push_back(to_double(f, "density"));
            ++height;
        }
        if (dims == 2)
            shape = {height, width};
        else if (dims == 1 && height == 1)
            shape = {width};
        else
            throw input_error("grid target shape does not match dimension");
        return target_from_grid(vals, shape, kmax);
    }
    throw input_error("unknown target '" + toks[0] + "'");
}

// ---- seed grids --------------------------------------------------------------

/// Row-major seed grid: "lo:hi:n" per coordinate, first coordinate slowest.
inline std::vector<RVec> seed_grid(const Params& p, std::size_t dim) {
    if (p.has("x0")) return {p.list("x0")};
    auto gspec = p.groups("grid");
    if (gspec.size() != dim) throw input_error("grid needs one lo:hi:n group per coordinate");
    std::vector<long> counts;
    for (const auto& g : gspec) {
        if (g.size() != 3 || g[2] < 1) throw input_error("grid groups are lo:hi:n");
        counts.push_back(static_cast<long>(g[2]));
    }
    std::vector<RVec> seeds;
    std::vector<long> idx(dim, 0);
    while (true) {
        RVec x(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            const auto& g = gspec[d];
            x[d] = (counts[d] == 1) ? g[0]
                                    : g[0] + (g[1] - g[0]) * static_cast<double>(idx[d]) /
                                                 static_cast<double>(counts[d] - 1);
        }
        seeds.push_back(std::move(x));
        std::size_t d = dim;
        while (d-- > 0) {
            if (++idx[d] < counts[d]) break;
            idx[d] = 0;
            if (d == 0) return seeds;
        }
        if (d == static_cast<std::size_t>(-1)) break;
    }
    return seeds;
}

inline nlohmann::json echo_config(const RunConfig& cfg) {
    nlohmann::json j;
    j["version"] = tool_version;
    j["command"] = cfg.command;
    if (!cfg.system.empty()) j["system"] = cfg.system;
    if (!cfg.input.empty()) j["input"] = cfg.input;
    std::string joined;
    for (const auto& [k, v] : cfg.params) {
        if (!joined.empty()) joined += ",";
        joined += k + "=" + v;
    }
    j["params"] = joined;
    j["format"] = (cfg.format == io::Format::Csv) ? "csv" : "json";
    return j;
}

inline SnapshotMatrix obtain_snapshots(const RunConfig& cfg, const Params& p) {
    SnapshotMatrix snap;
    if (!cfg.input.empty()) {
        snap = io::ingest_snapshots(cfg.input);
    } else if (!cfg.system.empty()) {
        MapSystem m = make_map(cfg.system, p);
        long n = p.integer("n", 100);
        auto spec = make_observable(p, m.dim);
        auto traj = iterate_map(m, to_system_coords(m, p.list("x0")), n);
        snap = trace(spec.obs, traj);
    } else {
        throw input_error("need --system or --input");
    }
    long col0 = p.integer("col0", 0);
    long col1 = p.integer("col1", static_cast<long>(snap.count()));
    if (col0 != 0 || col1 != static_cast<long>(snap.count()))
        snap = snap.slice(static_cast<std::size_t>(col0), static_cast<std::size_t>(col1));
    return snap;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Command pipelines
// ---------------------------------------------------------------------------

inline io::ResultBundle run(const RunConfig& cfg);

namespace detail {

inline io::ResultBundle run_simulate(const RunConfig& cfg, const Params& p) {
    io::ResultBundle b;
    Trajectory traj;
    if (is_flow_name(cfg.system) && !p.has("window")) {
        FlowSystem f = make_flow(cfg.system, p);
        traj = integrate_flow(f, p.list("x0"), p.num("dt", 0.01), p.integer("n", 1000));
    } else {
        MapSystem m = make_map(cfg.system, p);
        traj = iterate_map(m, to_system_coords(m, p.list("x0")), p.integer("n", 1000));
    }
    io::Table t;
    t.name = "trajectory";
    t.columns = {"step", "t"};
    for (std::size_t d = 0; d < traj.states.front().size(); ++d)
        t.columns.push_back("x" + std::to_string(d));
    for (std::size_t k = 0; k < traj.length(); ++k) {
        RVec row = {static_cast<double>(k), static_cast<double>(k) * traj.dt};
        for (double v : traj.states[k]) row.push_back(v);
        t.rows.push_back(std::move(row));
    }
    b.tables.push_back(std::move(t));
    b.diagnostics["system_id"] = traj.system_id;
    return b;
}

inline io::ResultBundle run_dmd(const RunConfig& cfg, const Params& p) {
    SnapshotMatrix snap = obtain_snapshots(cfg, p);
    std::string variant = p.str("variant", "companion");
    DmdResult result;
    if (variant == "companion")
        result = companion_dmd(snap);
    else if (variant == "svd")
        result = svd_dmd(snap, p.num("rank_tol", 1e-10));
    else
        throw input_error("variant must be companion or svd");

    io::ResultBundle b;
    io::Table ritz;
    ritz.name = "ritz";
    ritz.columns = {"mode_index", "re_value", "im_value", "modulus", "energy"};
    for (std::size_t i = 0; i < result.pairs.size(); ++i)
        ritz.rows.push_back({static_cast<double>(i), result.pairs[i].value.real(),
                             result.pairs[i].value.imag(), std::abs(result.pairs[i].value),
                             result.pairs[i].energy});
    io::Table modes;
    modes.name = "modes";
    modes.columns = {"mode_index", "component", "re", "im"};
    for (std::size_t i = 0; i < result.pairs.size(); ++i)
        for (std::size_t q = 0; q < result.pairs[i].mode.size(); ++q)
            modes.rows.push_back({static_cast<double>(i), static_cast<double>(q),
                                  result.pairs[i].mode[q].real(),
                                  result.pairs[i].mode[q].imag()});
    b.tables.push_back(std::move(ritz));
    b.tables.push_back(std::move(modes));
    b.diagnostics["residual_norm"] = result.residual_norm;
    b.diagnostics["variant"] = variant;
    b.diagnostics["m"] = snap.m;
    b.diagnostics["r"] = snap.count() - 1;
    return b;
}

inline io::ResultBundle run_gla(const RunConfig& cfg, const Params& p) {
    SnapshotMatrix snap = obtain_snapshots(cfg, p);
    io::ResultBundle b;
    io::Table t;
    t.name = "modes";
    t.columns = {"mode_index", "component", "re_eigenvalue", "im_eigenvalue", "re", "im"};

    std::vector<ProjectedMode> modes;
    if (p.has("eigs")) {
        CVec eigs;
        for (const auto& g : p.groups("eigs")) {
            if (g.size() != 2) throw input_error("eigs groups are re:im");
            eigs.push_back(cdouble(g[0], g[1]));
        }
        modes = gla_modes(snap, EigenvalueList::make(std::move(eigs)));
        b.diagnostics["reconstruction_residual"] = gla_reconstruction_residual(snap, modes);
    } else {
        double omega = p.num("omega", 0.0);
        if (p.num("dt", 0.0) > 0.0)
            modes = {fourier_projection_continuous(snap, omega, p.num("dt", 0.0))};
        else
            modes = {fourier_projection(snap, omega)};
    }
    for (std::size_t i = 0; i < modes.size(); ++i)
        for (std::size_t q = 0; q < modes[i].mode_at_p.size(); ++q)
            t.rows.push_back({static_cast<double>(i), static_cast<double>(q),
                              modes[i].eigenvalue.real(), modes[i].eigenvalue.imag(),
                              modes[i].mode_at_p[q].real(), modes[i].mode_at_p[q].imag()});
    b.tables.push_back(std::move(t));
    b.diagnostics["horizon"] = modes.empty() ? 0 : modes.front().horizon;
    return b;
}

inline io::ResultBundle run_average(const RunConfig& cfg, const Params& p) {
    MapSystem m = make_map(cfg.system, p);
    auto spec = make_observable(p, m.dim);
    double omega = p.num("omega", 0.0);
    long n = p.integer("n", 10000);
    auto seeds = seed_grid(p, m.dim);

    io::Table t;
    t.name = "averages";
    for (std::size_t d = 0; d < m.dim; ++d) t.columns.push_back("x" + std::to_string(d));
    t.columns.push_back("re");
    t.columns.push_back("im");
    t.columns.push_back("abs");
    t.rows.resize(seeds.size());

    parallel_for(seeds.size(), [&](std::size_t i) {
        CVec avg = fourier_average(m, spec.obs, to_system_coords(m, seeds[i]), n, omega);
        cdouble v;
        if (!spec.weights.empty()) {
            v = 0.0;
            for (std::size_t j = 0; j < spec.weights.size(); ++j)
                v += spec.weights[j] * avg[j];
        } else {
            if (avg.size() != 1)
                throw input_error("average needs a scalar observable (or trigpoly weights)");
            v = avg[0];
        }
        RVec row = seeds[i];
        row.push_back(v.real());
        row.push_back(v.imag());
        row.push_back(std::abs(v));
        t.rows[i] = std::move(row);
    });

    io::ResultBundle b;
    b.tables.push_back(std::move(t));
    b.diagnostics["omega"] = omega;
    b.diagnostics["N"] = n;
    return b;
}

inline io::ResultBundle run_quotient(const RunConfig& cfg, const Params& p) {
    MapSystem m = make_map(cfg.system, p);
    for (const auto& d : m.domain)
        if (!d.periodic())
            throw input_error(
                "quotient needs a torus state space; pass window=lo:hi;... to chart "
                "a bounded system");
    int kmax = static_cast<int>(p.integer("kmax", 5));
    double omega = p.num("omega", 0.0);
    double s = p.num("s", SobolevIndex::quotient_default(static_cast<int>(m.dim)).s);
    auto seeds = seed_grid(p, m.dim);
    const bool adaptive = p.has("tol");

    std::vector<EmpiricalMeasureCoeffs> coeffs(seeds.size());
    std::vector<long> n_used(seeds.size(), 0);
    long n_unconverged = 0;
    if (adaptive) {
        double tol = p.num("tol", 1e-3);
        long checkpoint = p.integer("checkpoint", 100);
        long n_max = p.integer("n_max", 1000000);
        std::vector<char> conv(seeds.size(), 1);
        parallel_for(seeds.size(), [&](std::size_t i) {
            auto [c, rep] = adaptive_empirical_coeffs(m, to_system_coords(m, seeds[i]), kmax,
                                                      tol, checkpoint, n_max);
            coeffs[i] = std::move(c);
            n_used[i] = rep.N_used;
            conv[i] = rep.converged ? 1 : 0;
        });
        for (char c : conv)
            if (!c) ++n_unconverged;
    } else {
        long n = p.integer("n", 10000);
        parallel_for(seeds.size(), [&](std::size_t i) {
            coeffs[i] = fourier_coeffs(m, to_system_coords(m, seeds[i]), n, kmax, omega);
            n_used[i] = n;
        });
    }

    auto dm = distance_matrix(coeffs, SobolevIndex{s});
    int n_coords = static_cast<int>(p.integer("n_coords", 2));
    auto emb = diffusion_maps(dm, p.num("bandwidth", 0.0), n_coords);
    int k_clusters = static_cast<int>(p.integer("k_clusters", 2));
    auto labels = extract_components(emb, k_clusters);

    io::ResultBundle b;
    io::Table t;
    t.name = "embedding";
    for (std::size_t d = 0; d < m.dim; ++d) t.columns.push_back("x" + std::to_string(d));
    for (int k = 0; k < n_coords; ++k) t.columns.push_back("chi" + std::to_string(k + 1));
    t.columns.push_back("label");
    t.columns.push_back("N_used");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        RVec row = seeds[i];
        for (int k = 0; k < n_coords; ++k) row.push_back(emb.chi(i, k));
        row.push_back(static_cast<double>(labels[i]));
        row.push_back(static_cast<double>(n_used[i]));
        t.rows.push_back(std::move(row));
    }
    b.tables.push_back(std::move(t));

    if (p.integer("distances", 0) != 0) {
        io::Table dt;
        dt.name = "distances";
        dt.columns = {"i", "j", "d"};
        for (std::size_t i = 0; i < dm.n; ++i)
            for (std::size_t j = i + 1; j < dm.n; ++j)
                dt.rows.push_back(
                    {static_cast<double>(i), static_cast<double>(j), dm(i, j)});
        b.tables.push_back(std::move(dt));
    }

    b.diagnostics["bandwidth"] = emb.bandwidth;
    b.diagnostics["kernel_eigenvalues"] = emb.eigenvalues;
    b.diagnostics["s"] = s;
    b.diagnostics["kmax"] = kmax;
    b.diagnostics["omega"] = omega;
    if (adaptive) {
        b.diagnostics["unconverged_seeds"] = n_unconverged;
        b.diagnostics["converged"] = (n_unconverged == 0);
    }
    return b;
}

inline io::ResultBundle run_indicator(const RunConfig& cfg, const Params& p) {
    std::string kind = p.str("kind", "sobolev");
    int kmax = static_cast<int>(p.integer("kmax", 5));
    io::ResultBundle b;
    io::Table t;
    t.name = "series";
    t.columns = {"n", "value"};

    if (kind == "mixing") {
        if (cfg.input.empty()) throw input_error("indicator kind=mixing needs --input history");
        SnapshotMatrix hist = io::ingest_snapshots(cfg.input);
        int dims = static_cast<int>(p.integer("dims", 2));
        auto target = make_target(p.str("target", "uniform"), dims, kmax);
        if (target.coeffs.size() != hist.m)
            throw input_error("history rows do not match the (dims, kmax) grid size");
        auto series = mixing_norm(hist.columns, target);
        for (const auto& [n, v] : series.values)
            t.rows.push_back({static_cast<double>(n), v});
        b.diagnostics["s"] = series.s;
    } else if (kind == "sobolev" || kind == "ball") {
        MapSystem m = make_map(cfg.system, p);
        long n = p.integer("n", 100000);
        long stride = p.integer("stride", 100);
        RVec x0 = to_system_coords(m, p.list("x0"));
        if (kind == "sobolev") {
            auto target =
                make_target(p.str("target", "uniform"), static_cast<int>(m.dim), kmax);
            double s =
                p.num("s", SobolevIndex::quotient_default(static_cast<int>(m.dim)).s);
            auto series = ergodicity_sobolev(m, x0, target, s, n, stride);
            for (const auto& [nn, v] : series.values)
                t.rows.push_back({static_cast<double>(nn), v});
            b.diagnostics["s"] = s;
        } else {
            auto traj = iterate_map(m, x0, n - 1);
            std::vector<long> cps;
            for (long c = stride; c <= n; c += stride) cps.push_back(c);
            std::function<double(std::span<const double>)> density;  // uniform
            std::string tspec = p.str("target", "uniform");
            if (tspec.rfind("gaussian", 0) == 0) {
                auto toks = split(tspec, ':');
                if (toks.size() != 1 + 2 * m.dim)
                    throw input_error("gaussian target is gaussian:c_1:..:c_D:s_1:..:s_D");
                RVec center, sigma;
                for (std::size_t d = 0; d < m.dim; ++d)
                    center.push_back(to_double(toks[1 + d], "target"));
                for (std::size_t d = 0; d < m.dim; ++d)
                    sigma.push_back(to_double(toks[1 + m.dim + d], "target"));
                density = [center, sigma](std::span<const double> x) {
                    return wrapped_gaussian_density(x, center, sigma);
                };
            } else if (tspec != "uniform") {
                throw input_error("ball oracle targets: uniform or gaussian");
            }
            auto series = ergodicity_ball_oracle(traj, density, cps);
            for (const auto& [nn, v] : series.values)
                t.rows.push_back({static_cast<double>(nn), v});
        }
    } else {
        throw input_error("indicator kind must be sobolev, ball, or mixing");
    }
    b.tables.push_back(std::move(t));
    b.diagnostics["kind"] = kind;
    return b;
}

inline io::ResultBundle run_search(const RunConfig& cfg, const Params& p) {
    (void)cfg;
    int kmax = static_cast<int>(p.integer("kmax", 5));
    auto target = make_target(p.str("target", "uniform"), 2, kmax);
    long steps = p.integer("steps", 100);
    double dt = p.num("dt", 0.02);
    long n_headings = p.integer("headings", 8);
    if (n_headings < 1) throw input_error("headings must be positive");
    std::vector<double> control;
    for (long c = 0; c < n_headings; ++c)
        control.push_back(two_pi * static_cast<double>(c) / static_cast<double>(n_headings));

    std::vector<Agent> agents;
    for (const auto& g : p.groups("agents")) {
        if (g.size() != 3) throw input_error("agents groups are x:y:speed");
        agents.push_back(
            Agent{{wrap_coord(g[0], 1.0), wrap_coord(g[1], 1.0)}, g[2]});
    }
    if (agents.empty()) throw input_error("need at least one agent");

    // pooled history starts from the initial positions
    EmpiricalMeasureCoeffs pooled;
    pooled.dims = 2;
    pooled.kmax = kmax;
    pooled.N = 0;
    pooled.coeffs.assign(wavevector_grid(2, kmax).size(), cdouble(0.0));
    for (const auto& a : agents) pooled = pooled_add_point(pooled, a.position);

    RVec w = sobolev_weights(2, kmax, SobolevIndex::quotient_default(2).s);
    io::Table t;
    t.name = "search";
    t.columns = {"step", "agent", "x", "y", "heading", "proxy"};
    for (long s = 0; s < steps; ++s) {
        auto res = greedy_coverage_step(agents, pooled, target, control, dt);
        agents = std::move(res.agents);
        pooled = std::move(res.pooled);
        double proxy = weighted_l2_distance(pooled.coeffs, target.coeffs, w);
        for (std::size_t a = 0; a < agents.size(); ++a)
            t.rows.push_back({static_cast<double>(s + 1), static_cast<double>(a),
                              agents[a].position[0], agents[a].position[1],
                              res.headings[a], proxy});
    }
    io::ResultBundle b;
    b.diagnostics["final_proxy"] = t.rows.empty() ? 0.0 : t.rows.back().back();
    b.diagnostics["kmax"] = kmax;
    b.tables.push_back(std::move(t));
    return b;
}

}  // namespace detail

/// Dispatch a validated run configuration to its pipeline. The returned
/// bundle's metadata echoes the full configuration.
inline io::ResultBundle run(const RunConfig& cfg) {
    using detail::Params;
    static const std::set<std::string> sysp = {"eps",  "omega0",   "mu", "c", "h",
                                               "kmax_heat", "K",  "k",  "b", "dt",
                                               "substeps",  "window"};
    auto with = [&](std::initializer_list<std::string> extra) {
        std::set<std::string> allowed = sysp;
        for (const auto& e : extra) allowed.insert(e);
        return allowed;
    };

    io::ResultBundle b;
    if (cfg.command == "simulate") {
        Params p(cfg.params, with({"x0", "n"}), cfg.command);
        b = detail::run_simulate(cfg, p);
    } else if (cfg.command == "dmd") {
        Params p(cfg.params,
                 with({"x0", "n", "obs", "k", "klist", "kmax", "terms", "variant",
                       "rank_tol", "col0", "col1"}),
                 cfg.command);
        b = detail::run_dmd(cfg, p);
    } else if (cfg.command == "gla") {
        Params p(cfg.params,
                 with({"x0", "n", "obs", "k", "klist", "kmax", "terms", "eigs", "omega",
                       "col0", "col1"}),
                 cfg.command);
        b = detail::run_gla(cfg, p);
    } else if (cfg.command == "average") {
        Params p(cfg.params,
                 with({"x0", "grid", "n", "obs", "k", "klist", "kmax", "terms", "omega"}),
                 cfg.command);
        b = detail::run_average(cfg, p);
    } else if (cfg.command == "quotient") {
        Params p(cfg.params,
                 with({"grid", "x0", "n", "tol", "checkpoint", "n_max", "kmax", "s",
                       "omega", "bandwidth", "n_coords", "k_clusters", "distances"}),
                 cfg.command);
        b = detail::run_quotient(cfg, p);
    } else if (cfg.command == "indicator") {
        Params p(cfg.params,
                 with({"kind", "x0", "n", "stride", "s", "kmax", "target", "dims"}),
                 cfg.command);
        b = detail::run_indicator(cfg, p);
    } else if (cfg.command == "search") {
        Params p(cfg.params, with({"agents", "target", "kmax", "headings", "steps"}),
                 cfg.command);
        b = detail::run_search(cfg, p);
    } else {
        throw input_error("unknown command '" + cfg.command + "'");
    }

    b.metadata = detail::echo_config(cfg);
    auto now = std::chrono::system_clock::now();
    b.metadata["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    return b;
}

/// Emit a bundle to the configured sink. Returns the process exit code:
/// 0 on success, 3 when a pipeline reports non-convergence (results are
/// still written).
inline int finish(const RunConfig& cfg, const io::ResultBundle& b) {
    if (cfg.out.empty()) {
        if (cfg.format == io::Format::Json)
            std::cout << io::bundle_to_json(b).dump(2) << "\n";
        else
            for (const auto& t : b.tables) std::cout << io::render_table_csv(b, t);
    } else {
        io::write_bundle(cfg.out, b, cfg.format);
    }
    if (b.diagnostics.contains("converged") && !b.diagnostics["converged"].get<bool>())
        return 3;
    return 0;
}

}  // namespace koopman::cli
