// cli.hpp - JSON scenario configs, the scenario runners and the manifest.
//
// A run parses and validates the whole config, computes every output in
// memory and only then creates the output directory, so a failed run leaves
// no files behind.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qbm/gaussian.hpp"
#include "qbm/langevin.hpp"
#include "qbm/master.hpp"

#ifndef QBM_VERSION
#define QBM_VERSION "0.0.0"
#endif

namespace qbm::cli {

using json = nlohmann::json;

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_numerical = 3 };

inline std::string fnv1a64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_ + " must be a JSON object");
    }

    const std::string& path() const noexcept { return path_; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ValidationError(where(key) + " must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ValidationError(where(key) + " must be finite");
        return x;
    }

    std::optional<double> maybe_number(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return number(key, 0.0);
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            throw ValidationError(where(key) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ValidationError(where(key) + " must be true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed = {}) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ValidationError(where(key) + " must be a string");
        std::string s = v.get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ValidationError(where(key) + " = \"" + s + "\" is not one of: " + list);
        }
        return s;
    }

    std::optional<Section> child(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return Section(j_.at(key), where(key));
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ValidationError("unknown key " + where(item.key()));
    }

private:
    std::string where(const std::string& key) const { return path_ + "." + key; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

struct ScenarioConfig {
    std::string scenario;
    PhysicalParams params{};
    SpectralModel model = SpectralModel::ohmic(0.1, 10.0);
    std::optional<double> delta_mass;
    std::string beta{"classical"};
    std::size_t modes{512};
    std::optional<GridScheme> scheme;
    double omega_max{0.0};
    double dt{0.0};
    double horizon{10.0};
    std::size_t samples{2001};
    std::size_t trajectories{1};
    std::uint64_t seed{1};
    unsigned threads{1};
    double tolerance{1e-6};
    double history_window_tol{0.0};
    bool slip_term{true};
    std::string initial_kind{"coherent"};
    double initial_q{1.0};
    double initial_p{0.0};
    double squeeze{0.5};
    std::optional<Impulse> impulse;
    double settle{0.0};
    double separation_squared{20.0};
    Eq10Options eq10{};
    std::optional<WignerGridSpec> grid;
    std::string output;
    json raw;

    BetaSchedule beta_schedule() const {
        return beta == "quantum" ? BetaSchedule::quantum(params) : BetaSchedule::classical(params);
    }

    GaussianState initial_state() const {
        if (initial_kind == "thermal") return GaussianState::thermal(params);
        if (initial_kind == "squeezed") return GaussianState::squeezed(params, squeeze, initial_q, initial_p);
        return GaussianState::coherent(params, initial_q, initial_p);
    }

    BathGrid bath_grid() const {
        return discretize(model, params, modes, scheme.value_or(default_scheme(model)), omega_max);
    }

    GLEConfig gle() const {
        GLEConfig g;
        g.params = params;
        g.model = model;
        g.dt = dt;
        g.horizon = horizon;
        g.slip_term = slip_term;
        g.history_window_tol = history_window_tol;
        return g;
    }
};

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"kernel", "simulate", "extract", "locality", "decohere",
                                                "counterpunch", "eq10"};
    return names;
}

inline WignerGridSpec parse_grid(Section s) {
    WignerGridSpec g;
    g.q_min = s.number("q_min", -5.0);
    g.q_max = s.number("q_max", 5.0);
    g.q_points = s.integer("q_points", 101);
    g.p_min = s.number("p_min", -5.0);
    g.p_max = s.number("p_max", 5.0);
    g.p_points = s.integer("p_points", 101);
    g.max_points = s.integer("max_points", g.max_points);
    s.finish();
    if (g.q_points == 0 || g.p_points == 0) throw ValidationError(s.path() + ": grid needs at least one point per axis");
    if (g.q_points * g.p_points > g.max_points)
        throw ValidationError(s.path() + ": grid of " + std::to_string(g.q_points * g.p_points) +
                              " points exceeds max_points = " + std::to_string(g.max_points));
    if (!(g.q_max >= g.q_min) || !(g.p_max >= g.p_min)) throw ValidationError(s.path() + ": grid range is reversed");
    return g;
}

// base_dir resolves relative table paths.
inline ScenarioConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
    ScenarioConfig c;
    c.raw = j;
    Section root(j, "config");
    if (!root.has("scenario")) throw ValidationError("config.scenario is required");
    c.scenario = root.text("scenario", "", scenario_names());

    if (auto s = root.child("params")) {
        c.params.mass = s->number("mass", c.params.mass);
        c.params.omega = s->number("omega", c.params.omega);
        c.params.hbar = s->number("hbar", c.params.hbar);
        c.params.kB = s->number("kB", c.params.kB);
        c.params.temperature = s->number("temperature", c.params.temperature);
        s->finish();
    }
    c.params.validate();

    if (auto s = root.child("spectrum")) {
        const std::string kind = s->text("kind", "ohmic", {"ohmic", "supra_ohmic", "tabulated"});
        const double gamma = s->number("gamma", 0.1);
        const double cutoff = s->number("cutoff", 10.0);
        const auto shape = s->text("shape", "exponential", {"exponential", "sharp"}) == "sharp" ? CutoffShape::sharp
                                                                                              : CutoffShape::exponential;
        const double exponent = s->number("exponent", 3.0);
        const double ref = s->number("reference_frequency", 0.0);
        c.delta_mass = s->maybe_number("delta_mass");
        const std::string table = s->text("table", "");
        s->finish();
        if (kind == "ohmic") {
            c.model = SpectralModel::ohmic(gamma, cutoff, shape);
        } else if (kind == "supra_ohmic") {
            if (c.delta_mass) {
                detail::require(*c.delta_mass > 0, "config.spectrum.delta_mass must be positive");
                c.model = supra_ohmic_with_mass_shift(exponent, cutoff, *c.delta_mass, c.params, shape, ref);
            } else {
                c.model = SpectralModel::supra_ohmic(exponent, gamma, cutoff, shape, ref);
            }
        } else {
            if (table.empty()) throw ValidationError("config.spectrum.table is required for a tabulated spectrum");
            std::filesystem::path path(table);
            if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
            c.model = load_spectrum_csv(path.string());
        }
        if (c.delta_mass && kind != "supra_ohmic")
            throw ValidationError("config.spectrum.delta_mass applies to supra_ohmic spectra only");
    }

    c.beta = root.text("beta", "classical", {"classical", "quantum"});
    if (c.beta == "classical" && !(c.params.temperature > 0))
        throw ValidationError("config.beta = classical needs a positive temperature");

    if (auto s = root.child("bath")) {
        c.modes = s->integer("modes", c.modes);
        if (s->has("scheme"))
            c.scheme = s->text("scheme", "", {"uniform", "equal_weight"}) == "uniform" ? GridScheme::uniform
                                                                                       : GridScheme::equal_weight;
        c.omega_max = s->number("omega_max", 0.0);
        s->finish();
    }
    detail::require(c.modes >= 1, "config.bath.modes must be at least 1");
    detail::require(c.omega_max >= 0, "config.bath.omega_max must be non-negative (0 selects the default)");

    if (auto s = root.child("numerics")) {
        c.dt = s->number("dt", 0.0);
        c.horizon = s->number("horizon", c.horizon);
        c.samples = s->integer("samples", c.samples);
        c.trajectories = s->integer("trajectories", c.trajectories);
        c.seed = s->integer("seed", c.seed);
        c.threads = static_cast<unsigned>(s->integer("threads", c.threads));
        c.tolerance = s->number("tolerance", c.tolerance);
        c.history_window_tol = s->number("history_window_tol", 0.0);
        c.slip_term = s->flag("slip_term", true);
        s->finish();
    }
    detail::require(c.dt >= 0, "config.numerics.dt must be non-negative (0 selects the default)");
    detail::require(c.horizon > 0, "config.numerics.horizon must be positive");
    detail::require(c.samples >= 3, "config.numerics.samples must be at least 3");
    detail::require(c.trajectories >= 1, "config.numerics.trajectories must be at least 1");
    detail::require(c.threads >= 1, "config.numerics.threads must be at least 1");
    detail::require(c.tolerance > 0, "config.numerics.tolerance must be positive");

    if (auto s = root.child("initial")) {
        c.initial_kind = s->text("kind", "coherent", {"coherent", "squeezed", "thermal"});
        c.initial_q = s->number("q", c.initial_q);
        c.initial_p = s->number("p", c.initial_p);
        c.squeeze = s->number("squeeze", c.squeeze);
        s->finish();
    }

    if (auto s = root.child("impulse")) {
        Impulse imp;
        imp.t0 = s->number("t0", 20.0 / c.model.cutoff);
        imp.width = s->number("width", 20.0 / c.model.cutoff);
        imp.amplitude = s->number("amplitude", 1.0);
        c.settle = s->number("settle", 0.0);
        s->finish();
        detail::require(imp.width > 0 && imp.t0 >= 0, "config.impulse needs width > 0 and t0 >= 0");
        c.impulse = imp;
    }

    if (auto s = root.child("cat")) {
        c.separation_squared = s->number("separation_squared", c.separation_squared);
        s->finish();
    }
    detail::require(c.separation_squared > 0, "config.cat.separation_squared must be positive");

    if (auto s = root.child("eq10")) {
        c.eq10.separation = s->number("separation", c.eq10.separation);
        c.eq10.cross_coupling = s->number("cross_coupling", c.eq10.cross_coupling);
        c.eq10.omega_bar = s->maybe_number("omega_bar");
        c.eq10.literal_correlated_form = s->flag("literal_correlated_form", false);
        s->finish();
    }

    if (auto s = root.child("grid")) c.grid = parse_grid(*s);
    c.output = root.text("output", "");
    root.finish();
    return c;
}

// ---------------------------------------------------------------------------
// Scenario runners
// ---------------------------------------------------------------------------

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;
    json results = json::object();
    std::vector<std::string> warnings;

    void add(const std::string& name, const std::string& body) { files.emplace_back(name, body); }
};

namespace detail {

template <class T>
std::string csv_text(const T& table) {
    std::ostringstream out;
    write_csv(table, out);
    return out.str();
}

inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline void check_recurrence(const ScenarioConfig& c, const BathGrid& grid, Artifacts& a) {
    if (grid.total_coupling_sq() == 0.0) return;
    const double half = 0.5 * grid.recurrence_time();
    if (c.horizon > half)
        a.warnings.push_back("horizon " + io::number(c.horizon) + " exceeds half the bath recurrence time " +
                             io::number(half) + "; increase bath.modes for continuum behaviour");
}

inline void run_kernel(const ScenarioConfig& c, Artifacts& a) {
    const MemoryKernel kernel(c.model, c.params);
    const auto beta = c.beta_schedule();
    const auto times = linspace(0.0, c.horizon, c.samples);
    std::ostringstream out;
    io::CsvWriter csv(out, "qbm.kernel.v1", {"t", "K", "nu"});
    for (double t : times) csv.row({t, kernel(t), noise_correlation_at(c.model, beta, t)});
    a.add("kernel.csv", out.str());
    a.results["K0"] = kernel(0.0);
    a.results["nu0"] = noise_correlation_at(c.model, beta, 0.0);
}

inline void run_simulate(const ScenarioConfig& c, Artifacts& a) {
    const BathGrid grid = c.bath_grid();
    check_recurrence(c, grid, a);
    GLEConfig cfg = c.gle();
    cfg.grid = grid;
    const GleSolver solver(cfg);
    const auto beta = c.beta_schedule();
    const std::uint64_t key = derive_key(c.seed, 0);
    const auto bath = sample_initial(grid, beta, key);
    const auto tr = solver.solve(c.initial_q, c.initial_p, ForceSynthesizer(grid, solver.times())(bath), key);
    const double gamma_local = c.model.kind == SpectrumKind::ohmic ? c.model.gamma : 0.0;
    const auto br = decompose_backreaction(tr, c.params.omega * c.params.omega, gamma_local);
    std::ostringstream out;
    write_csv(tr, out, br.force_br);
    a.add("trajectory.csv", out.str());
    a.results["dt"] = solver.config().dt;
    a.results["steps"] = tr.size() - 1;
    a.results["backreaction_identity_residual"] = br.identity_residual;
    if (c.trajectories >= 2) {
        EnsembleOptions opt;
        opt.trajectories = c.trajectories;
        opt.seed = c.seed;
        opt.threads = c.threads;
        const auto st = run_ensemble(c.gle(), grid, c.initial_state(), beta, opt);
        a.add("ensemble.csv", csv_text(st));
        a.results["trajectories"] = st.trajectories;
    }
}

inline void run_extract(const ScenarioConfig& c, Artifacts& a) {
    const BathGrid grid = c.bath_grid();
    check_recurrence(c, grid, a);
    const auto times = linspace(0.0, c.horizon, c.samples);
    const auto samples = reduced_samples(grid, c.params, c.beta_schedule(), times);
    const auto init = c.initial_state();
    const auto coeffs = extract_coefficients(samples, c.params, init);
    a.add("coefficients.csv", csv_text(coeffs));
    a.results["singular_count"] = coeffs.singular_count();
    if (coeffs.singular_count() < coeffs.size()) {
        const auto fc = forward_check(coeffs, init, samples, c.params);
        a.add("forward_check.csv", csv_text(fc));
        a.results["forward_max_deviation"] = fc.max_deviation;
    }
    const std::size_t last = coeffs.size() - 1;
    a.results["final"] = {{"t", coeffs.times[last]},
                          {"OmegaBar2", finite_or_null(coeffs.omega_bar_sq[last])},
                          {"gammaBar", finite_or_null(coeffs.gamma_bar[last])},
                          {"d", finite_or_null(coeffs.d[last])},
                          {"D", finite_or_null(coeffs.D[last])}};
}

inline void run_locality(const ScenarioConfig& c, Artifacts& a) {
    const BathGrid grid = c.bath_grid();
    check_recurrence(c, grid, a);
    const auto times = linspace(0.0, c.horizon, c.samples);
    const auto samples = reduced_samples(grid, c.params, c.beta_schedule(), times);
    const auto states = default_locality_states(c.params);
    std::vector<MomentTrack> tracks;
    for (const auto& s : states) tracks.push_back(moment_track(samples, s));
    const auto r = verify_locality(samples, tracks, c.params, c.tolerance);
    for (std::size_t k = 0; k < r.coefficients.size(); ++k)
        a.add("coefficients_state" + std::to_string(k) + ".csv", csv_text(r.coefficients[k]));
    a.results["max_deviation"] = r.max_deviation;
    a.results["tolerance"] = r.tolerance;
    a.results["local"] = r.local;
    a.results["states"] = json::array({"coherent", "squeezed", "thermal"});
    a.results["coefficient_deviation"] = {{"OmegaBar2", r.coefficient_deviation[0]},
                                          {"gammaBar", r.coefficient_deviation[1]},
                                          {"d", r.coefficient_deviation[2]},
                                          {"D", r.coefficient_deviation[3]}};
}

// First time the series drops to half its initial value, linearly interpolated.
inline std::optional<double> half_life(const std::vector<double>& t, const std::vector<double>& v) {
    const double target = 0.5 * v.front();
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] <= target) return t[i - 1] + (t[i] - t[i - 1]) * (v[i - 1] - target) / (v[i - 1] - v[i]);
    return std::nullopt;
}

// Largest single-step increase of the visibility after t_start.
inline double visibility_rebound(const std::vector<double>& t, const std::vector<double>& v, double t_start) {
    double worst = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (t[i - 1] >= t_start) worst = std::max(worst, v[i] - v[i - 1]);
    return worst;
}

inline void run_decohere(const ScenarioConfig& c, Artifacts& a) {
    const BathGrid grid = c.bath_grid();
    check_recurrence(c, grid, a);
    const auto times = linspace(0.0, c.horizon, c.samples);
    const auto samples = reduced_samples(grid, c.params, c.beta_schedule(), times);
    const CatState cat = make_cat(c.params, std::sqrt(c.separation_squared));
    std::vector<double> vis(samples.size()), pur(samples.size());
    std::ostringstream out;
    io::CsvWriter csv(out, "qbm.decoherence.v1", {"t", "visibility", "purity"});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const CatState s = transport_cat(ReducedMap::from(samples[i]), cat);
        vis[i] = fringe_visibility(s);
        pur[i] = purity(s, c.params);
        csv.row({times[i], vis[i], pur[i]});
    }
    a.add("decoherence.csv", out.str());
    if (c.grid) {
        const CatState last = transport_cat(ReducedMap::from(samples.back()), cat);
        std::ostringstream w;
        emit_grid([&](double q, double p) { return wigner_eval(last, q, p); }, *c.grid, w);
        a.add("wigner_final.csv", w.str());
    }
    const auto hl = half_life(times, vis);
    const double relax = c.model.gamma > 0 ? 1.0 / (2.0 * c.model.gamma) : std::numeric_limits<double>::infinity();
    // Rebounds below 1e-9 V(0) are ignored: the exact dynamics wiggles at that
    // level once the fringes have collapsed onto the lump-width floor.
    const auto rebound = visibility_rebound(times, vis, 5.0 / c.model.cutoff);
    const bool monotone = rebound <= 1e-9 * vis.front();
    a.results["visibility_half_life"] = hl ? json(*hl) : json(nullptr);
    a.results["relaxation_time"] = finite_or_null(relax);
    a.results["half_life_ratio"] = hl && std::isfinite(relax) ? json(relax / *hl) : json(nullptr);
    a.results["monotone_after_5_over_cutoff"] = monotone;
    a.results["max_rebound"] = rebound;
    a.results["final_visibility"] = vis.back();
    a.results["final_purity"] = pur.back();
    if (!hl) a.warnings.push_back("visibility did not halve within the horizon");
}

inline void run_counterpunch(const ScenarioConfig& c, Artifacts& a) {
    GLEConfig cfg = c.gle();
    const double lam = c.model.cutoff;
    const Impulse imp = c.impulse.value_or(Impulse{20.0 / lam, 20.0 / lam, 1.0});
    const auto r = impulse_response(cfg, imp, c.settle);
    const auto br = decompose_backreaction(r.coupled, c.params.omega * c.params.omega, 0.0);
    std::ostringstream out;
    write_csv(r.coupled, out, br.force_br);
    a.add("impulse.csv", out.str());
    a.results["ratio"] = r.ratio;
    a.results["momentum_transfer"] = r.momentum_transfer;
    a.results["free_momentum_transfer"] = r.free_momentum_transfer;
    a.results["t_end"] = r.t_end;
    try {
        const double dm = renormalized_mass(c.model, c.params);
        a.results["delta_mass"] = dm;
        a.results["expected_ratio"] = c.params.mass / (c.params.mass + dm);
    } catch (const DivergentIntegral&) {
        a.results["delta_mass"] = nullptr;
        a.results["expected_ratio"] = nullptr;
    }
    for (const auto& w : r.warnings) a.warnings.push_back(w);
}

inline void run_eq10(const ScenarioConfig& c, Artifacts& a) {
    const auto r = eq10_demo(c.params, c.eq10);
    std::ostringstream out;
    io::CsvWriter csv(out, "qbm.eq10.v1",
                      {"separation", "cross_coupling", "omega_bar", "correlated_global_purity",
                       "correlated_reduced_purity", "entangled_global_purity", "entangled_reduced_purity",
                       "entangled_admissible"});
    csv.row({r.separation, r.cross_coupling, r.omega_bar, r.correlated_global_purity, r.correlated_reduced_purity,
             r.entangled_global_purity, r.entangled_reduced_purity, r.entangled_admissible ? 1.0 : 0.0});
    a.add("eq10.csv", out.str());
    a.results = {{"separation", r.separation},
                 {"cross_coupling", r.cross_coupling},
                 {"omega_bar", r.omega_bar},
                 {"correlated_normalization", r.correlated_normalization},
                 {"entangled_normalization", r.entangled_normalization},
                 {"correlated_global_purity", r.correlated_global_purity},
                 {"correlated_reduced_purity", r.correlated_reduced_purity},
                 {"entangled_global_purity", r.entangled_global_purity},
                 {"entangled_reduced_purity", r.entangled_reduced_purity},
                 {"entangled_admissible", r.entangled_admissible}};
    for (const auto& w : r.warnings) a.warnings.push_back(w);
}

} // namespace detail

inline Artifacts run_scenario(const ScenarioConfig& c) {
    Artifacts a;
    if (c.scenario == "kernel") detail::run_kernel(c, a);
    else if (c.scenario == "simulate") detail::run_simulate(c, a);
    else if (c.scenario == "extract") detail::run_extract(c, a);
    else if (c.scenario == "locality") detail::run_locality(c, a);
    else if (c.scenario == "decohere") detail::run_decohere(c, a);
    else if (c.scenario == "counterpunch") detail::run_counterpunch(c, a);
    else if (c.scenario == "eq10") detail::run_eq10(c, a);
    else throw ValidationError("unknown scenario " + c.scenario);
    return a;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

struct RunOptions {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

struct RunResult {
    int exit_code{exit_ok};
    json diagnostic;
    std::filesystem::path out_dir;
    json manifest;
};

inline json diagnostic(int code, const std::string& kind, const std::string& message) {
    return {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", message}};
}

// Precedence: --out, then the config's "output", then QBM_OUT_DIR, then ./qbm_out.
inline std::filesystem::path output_dir(const ScenarioConfig& c, const RunOptions& opt) {
    if (opt.out) return *opt.out;
    if (!c.output.empty()) return c.output;
    if (const char* env = std::getenv("QBM_OUT_DIR"); env && *env) return env;
    return "qbm_out";
}

inline RunResult run_json(const json& config, const std::filesystem::path& base_dir, const RunOptions& opt) {
    RunResult res;
    const auto start = std::chrono::steady_clock::now();
    try {
        ScenarioConfig c = parse_config(config, base_dir);
        if (opt.seed) c.seed = *opt.seed;
        if (opt.threads) {
            if (*opt.threads == 0) throw ValidationError("--threads must be at least 1");
            c.threads = *opt.threads;
        }
        Artifacts art = run_scenario(c);
        res.out_dir = output_dir(c, opt);
        const std::string hash = "fnv1a64:" + fnv1a64(config.dump());
        json outputs = json::array();
        for (const auto& f : art.files) outputs.push_back({{"file", f.first}, {"config_hash", hash}});
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.manifest = {{"tool", "qbm"},
                        {"version", QBM_VERSION},
                        {"scenario", c.scenario},
                        {"config_hash", hash},
                        {"config", config},
                        {"seed", c.seed},
                        {"threads", c.threads},
                        {"outputs", outputs},
                        {"results", art.results},
                        {"warnings", art.warnings},
                        {"wall_clock_seconds", wall}};
        std::filesystem::create_directories(res.out_dir);
        for (const auto& f : art.files) {
            std::ofstream out(res.out_dir / f.first, std::ios::binary);
            out << f.second;
            if (!out) throw NumericalFailure("could not write " + (res.out_dir / f.first).string());
        }
        std::ofstream m(res.out_dir / "manifest.json", std::ios::binary);
        m << std::setw(2) << res.manifest << '\n';
    } catch (const ValidationError& e) {
        res.exit_code = exit_validation;
        res.diagnostic = diagnostic(exit_validation, "validation", e.what());
    } catch (const DivergentIntegral& e) {
        res.exit_code = exit_validation;
        res.diagnostic = diagnostic(exit_validation, "divergent_integral", e.what());
    } catch (const json::exception& e) {
        res.exit_code = exit_validation;
        res.diagnostic = diagnostic(exit_validation, "validation", e.what());
    } catch (const std::exception& e) {
        res.exit_code = exit_numerical;
        res.diagnostic = diagnostic(exit_numerical, "numerical", e.what());
    }
    return res;
}

inline RunResult run_file(const std::filesystem::path& path, const RunOptions& opt) {
    std::ifstream in(path);
    if (!in) {
        RunResult r;
        r.exit_code = exit_validation;
        r.diagnostic = diagnostic(exit_validation, "validation", "cannot read config " + path.string());
        return r;
    }
    json config;
    try {
        config = json::parse(in);
    } catch (const json::parse_error& e) {
        RunResult r;
        r.exit_code = exit_validation;
        r.diagnostic = diagnostic(exit_validation, "validation", std::string("config is not valid JSON: ") + e.what());
        return r;
    }
    return run_json(config, path.parent_path(), opt);
}

} // namespace qbm::cli
