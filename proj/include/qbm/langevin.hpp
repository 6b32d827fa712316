// langevin.hpp - generalized Langevin equation for the system coordinate,
// noise-driven ensembles, back-reaction decomposition and impulse response.
//
// Integrates
//   Qdd + Omega^2 Q + K(t) Q_I + int_0^t K(t - s) Qd(s) ds = (F(t) + drive(t)) / m
// with the implicit trapezoid rule for (Q, Qd) and a trapezoid history sum.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qbm/bath.hpp"
#include "qbm/errors.hpp"
#include "qbm/gaussian.hpp"
#include "qbm/io.hpp"
#include "qbm/model.hpp"
#include "qbm/quadrature.hpp"
#include "qbm/rng.hpp"

namespace qbm {

struct GLEConfig {
    PhysicalParams params{};
    SpectralModel model{};
    // When set, the memory kernel is the finite sum over these modes instead
    // of the continuum integral; this is the kernel the full-bath system obeys.
    std::optional<BathGrid> grid;
    // 0 selects default_step().
    double dt{0.0};
    double horizon{10.0};
    bool slip_term{true};
    // Drop history terms once |K| stays below tol * |K(0)|; 0 keeps the full history.
    double history_window_tol{0.0};
    // Refuse steps larger than 0.1 min(1/Lambda, 1/Omega).
    bool enforce_step_limit{true};
    std::function<double(double)> external_drive;
    // Use the exact kernel where the frequency integral is elementary.
    bool analytic_kernel{true};
    QuadratureOptions quadrature{};

    double cutoff_frequency() const {
        if (grid && model.kind == SpectrumKind::tabulated) return grid->omegas.back();
        if (model.kind == SpectrumKind::tabulated) return model.table.back().omega;
        return model.cutoff;
    }

    double max_step() const {
        double fastest = params.omega;
        if (!model.is_uncoupled() || grid) fastest = std::max(fastest, cutoff_frequency());
        return 0.1 / fastest;
    }

    // A fifth of the largest allowed step; keeps the trapezoid error near 1e-6 of |Q|.
    double default_step() const { return 0.2 * max_step(); }
    double step() const { return dt > 0 ? dt : default_step(); }

    std::size_t steps() const { return static_cast<std::size_t>(std::ceil(horizon / step() - 1e-9)); }

    void validate() const {
        params.validate();
        model.validate();
        if (grid) grid->validate();
        detail::require(dt >= 0 && std::isfinite(dt), "GLE step dt must be positive (or 0 for the default)");
        detail::require(horizon > 0 && std::isfinite(horizon), "GLE horizon must be positive");
        detail::require(history_window_tol >= 0 && history_window_tol < 1, "history_window_tol must lie in [0, 1)");
        if (enforce_step_limit && step() > max_step() * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "GLE step dt = " << step() << " exceeds 0.1 min(1/Lambda, 1/Omega) = " << max_step()
                << "; reduce dt or disable the step limit";
            throw ValidationError(msg.str());
        }
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> Q;
    std::vector<double> Qdot;
    std::vector<double> Qddot;
    // Total applied force F(t) + drive(t).
    std::vector<double> force;
    // -m [K(t) Q_I + int_0^t K(t-s) Qd(s) ds] from the solver's own quadrature.
    std::vector<double> memory_force;
    double mass{1.0};
    double omega{1.0};
    std::uint64_t seed{0};

    std::size_t size() const noexcept { return times.size(); }
    double P(std::size_t n) const { return mass * Qdot[n]; }
};

class GleSolver {
public:
    explicit GleSolver(GLEConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        cfg_.dt = cfg_.step();
        const std::size_t n = cfg_.steps();
        times_.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) times_[i] = cfg_.dt * static_cast<double>(i);
        kernel_.assign(n + 1, 0.0);
        if (cfg_.grid) {
            for (std::size_t i = 0; i <= n; ++i) kernel_[i] = cfg_.grid->kernel(times_[i], cfg_.params);
        } else if (!cfg_.model.is_uncoupled()) {
            if (cfg_.analytic_kernel && closed_form_kernel(cfg_.model, cfg_.params, 0.0)) {
                for (std::size_t i = 0; i <= n; ++i) kernel_[i] = *closed_form_kernel(cfg_.model, cfg_.params, times_[i]);
            } else {
                const MemoryKernel k(cfg_.model, cfg_.params, cfg_.quadrature);
                for (std::size_t i = 0; i <= n; ++i) kernel_[i] = k(times_[i]);
            }
        }
        const bool silent = std::all_of(kernel_.begin(), kernel_.end(), [](double k) { return k == 0.0; });
        window_ = silent ? 0 : n + 1;
        if (cfg_.history_window_tol > 0 && kernel_[0] != 0.0) {
            const double floor = cfg_.history_window_tol * std::abs(kernel_[0]);
            std::size_t last = 0;
            for (std::size_t i = 0; i <= n; ++i)
                if (std::abs(kernel_[i]) >= floor) last = i;
            window_ = last + 1;
        }
    }

    const GLEConfig& config() const noexcept { return cfg_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& kernel() const noexcept { return kernel_; }
    // Number of kernel lags kept in the history sum.
    std::size_t history_window() const noexcept { return window_; }

    // force holds F at every solver time; empty means no noise.
    Trajectory solve(double q0, double p0, std::span<const double> force = {}, std::uint64_t seed = 0) const {
        const std::size_t n = times_.size();
        if (!force.empty() && force.size() != n)
            throw ValidationError("solve_gle: force record has " + std::to_string(force.size()) +
                                  " samples, expected " + std::to_string(n));
        if (!std::isfinite(q0) || !std::isfinite(p0)) throw ValidationError("solve_gle: non-finite initial state");
        const double m = cfg_.params.mass;
        const double w2 = cfg_.params.omega * cfg_.params.omega;
        const double h = cfg_.dt;
        const double slip = cfg_.slip_term ? q0 : 0.0;

        Trajectory tr;
        tr.times = times_;
        tr.mass = m;
        tr.omega = cfg_.params.omega;
        tr.seed = seed;
        tr.memory_force.resize(n);
        tr.Q.resize(n);
        tr.Qdot.resize(n);
        tr.Qddot.resize(n);
        tr.force.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double f = force.empty() ? 0.0 : force[i];
            if (cfg_.external_drive) f += cfg_.external_drive(times_[i]);
            tr.force[i] = f;
        }

        const double k0 = kernel_[0];
        const double denom = 1.0 + 0.5 * h * (0.5 * h * w2 + 0.5 * h * k0);
        tr.Q[0] = q0;
        tr.Qdot[0] = p0 / m;
        tr.Qddot[0] = -w2 * q0 - k0 * slip + tr.force[0] / m;
        tr.memory_force[0] = -m * k0 * slip;
        for (std::size_t s = 0; s + 1 < n; ++s) {
            const std::size_t next = s + 1;
            // Known part of the history integral at t_{s+1}.
            double hist = 0.0;
            const std::size_t lo = next >= window_ ? next - window_ + 1 : 0;
            for (std::size_t j = std::max<std::size_t>(lo, 1); j <= s; ++j) hist += kernel_[next - j] * tr.Qdot[j];
            if (lo == 0) hist += 0.5 * kernel_[next] * tr.Qdot[0];
            hist *= h;
            const double r = -w2 * (tr.Q[s] + 0.5 * h * tr.Qdot[s]) - kernel_[next] * slip - hist + tr.force[next] / m;
            const double v = (tr.Qdot[s] + 0.5 * h * (tr.Qddot[s] + r)) / denom;
            tr.Qdot[next] = v;
            tr.Q[next] = tr.Q[s] + 0.5 * h * (tr.Qdot[s] + v);
            tr.Qddot[next] = r - (0.5 * h * w2 + 0.5 * h * k0) * v;
            tr.memory_force[next] = -m * (kernel_[next] * slip + hist + 0.5 * h * k0 * v);
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(tr.Q[i]) || !std::isfinite(tr.Qdot[i]))
                throw NumericalFailure("solve_gle: solution became non-finite at t = " + io::number(times_[i]));
        return tr;
    }

private:
    GLEConfig cfg_;
    std::vector<double> times_;
    std::vector<double> kernel_;
    std::size_t window_{0};
};

inline Trajectory solve_gle(const GLEConfig& cfg, double q0, double p0, std::span<const double> force = {}) {
    return GleSolver(cfg).solve(q0, p0, force);
}

inline void write_csv(const Trajectory& tr, std::ostream& out, std::span<const double> backreaction = {}) {
    if (!backreaction.empty() && backreaction.size() != tr.size())
        throw ValidationError("write_csv: back-reaction series does not match the trajectory");
    if (backreaction.empty()) {
        io::CsvWriter csv(out, "qbm.trajectory.v1", {"t", "Q", "P", "F"});
        for (std::size_t i = 0; i < tr.size(); ++i) csv.row({tr.times[i], tr.Q[i], tr.P(i), tr.force[i]});
    } else {
        io::CsvWriter csv(out, "qbm.trajectory_br.v1", {"t", "Q", "P", "F", "F_BR"});
        for (std::size_t i = 0; i < tr.size(); ++i)
            csv.row({tr.times[i], tr.Q[i], tr.P(i), tr.force[i], backreaction[i]});
    }
}

// ---------------------------------------------------------------------------
// Back-reaction
// ---------------------------------------------------------------------------

struct BackreactionDecomposition {
    std::vector<double> omega_tilde_sq;
    double gamma_local{0.0};
    // Memory force minus the local terms moved to the left-hand side.
    std::vector<double> force_br;
    // max |m(Qdd + W^2 Q + 2 g Qd) - F - F_BR| / max |m Qdd, F, F_BR|.
    double identity_residual{0.0};
};

inline BackreactionDecomposition decompose_backreaction(const Trajectory& tr, std::span<const double> omega_tilde_sq,
                                                        double gamma_local) {
    const std::size_t n = tr.size();
    if (tr.force.size() != n || tr.Qddot.size() != n || tr.memory_force.size() != n)
        throw ValidationError("decompose_backreaction: trajectory lacks force records");
    if (omega_tilde_sq.size() != 1 && omega_tilde_sq.size() != n)
        throw ValidationError("decompose_backreaction: Omega_tilde^2 must be a constant or a series on the trajectory");
    BackreactionDecomposition d;
    d.omega_tilde_sq.assign(omega_tilde_sq.begin(), omega_tilde_sq.end());
    d.gamma_local = gamma_local;
    d.force_br.resize(n);
    const double m = tr.mass;
    const double w2 = tr.omega * tr.omega;
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wt2 = omega_tilde_sq.size() == 1 ? omega_tilde_sq[0] : omega_tilde_sq[i];
        d.force_br[i] = tr.memory_force[i] + m * (wt2 - w2) * tr.Q[i] + 2.0 * m * gamma_local * tr.Qdot[i];
        const double lhs = m * (tr.Qddot[i] + wt2 * tr.Q[i] + 2.0 * gamma_local * tr.Qdot[i]);
        worst = std::max(worst, std::abs(lhs - tr.force[i] - d.force_br[i]));
        scale = std::max({scale, std::abs(m * tr.Qddot[i]), std::abs(tr.force[i]), std::abs(d.force_br[i])});
    }
    d.identity_residual = scale > 0 ? worst / scale : 0.0;
    return d;
}

inline BackreactionDecomposition decompose_backreaction(const Trajectory& tr, double omega_tilde_sq, double gamma_local) {
    const double w[1] = {omega_tilde_sq};
    return decompose_backreaction(tr, std::span<const double>(w), gamma_local);
}

// ---------------------------------------------------------------------------
// Impulse response
// ---------------------------------------------------------------------------

// Hann pulse amplitude sin^2(pi (t - t0) / width) on [t0, t0 + width].
struct Impulse {
    double t0{0.0};
    double width{1.0};
    double amplitude{1.0};

    double operator()(double t) const {
        if (t < t0 || t > t0 + width) return 0.0;
        const double s = std::sin(pi * (t - t0) / width);
        return amplitude * s * s;
    }
};

struct ImpulseResponse {
    double ratio{1.0};
    double momentum_transfer{0.0};
    double free_momentum_transfer{0.0};
    double t_end{0.0};
    std::vector<std::string> warnings;
    Trajectory coupled;
    Trajectory free;
};

// Drives the oscillator from rest with the pulse and no bath noise, and
// compares P at t_end = t0 + width + settle with the uncoupled oscillator.
// config.horizon is replaced by t_end; settle <= 0 selects 10 / Lambda.
inline ImpulseResponse impulse_response(GLEConfig config, const Impulse& impulse, double settle = 0.0) {
    detail::require(impulse.width > 0 && impulse.t0 >= 0 && std::isfinite(impulse.amplitude),
                    "impulse needs width > 0, t0 >= 0 and a finite amplitude");
    ImpulseResponse out;
    const double lambda = config.model.is_uncoupled() ? config.params.omega : config.cutoff_frequency();
    if (impulse.width < 10.0 / lambda)
        out.warnings.push_back("impulse width is below 10 / Lambda: the bath cannot follow adiabatically and no mass suppression is expected");
    if (impulse.t0 < 10.0 / lambda)
        out.warnings.push_back("impulse starts within 10 / Lambda of t = 0, inside the initial inertial epoch");
    if (settle <= 0) settle = 10.0 / lambda;
    out.t_end = impulse.t0 + impulse.width + settle;
    config.horizon = out.t_end;
    config.external_drive = impulse;
    out.coupled = GleSolver(config).solve(0.0, 0.0);
    GLEConfig bare = config;
    bare.model = SpectralModel::uncoupled();
    bare.grid.reset();
    out.free = GleSolver(bare).solve(0.0, 0.0);
    out.momentum_transfer = out.coupled.P(out.coupled.size() - 1);
    out.free_momentum_transfer = out.free.P(out.free.size() - 1);
    if (out.free_momentum_transfer == 0.0) throw ValidationError("impulse_response: pulse transfers no momentum");
    out.ratio = out.momentum_transfer / out.free_momentum_transfer;
    return out;
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleOptions {
    std::size_t trajectories{1000};
    std::uint64_t seed{1};
    // Times at which statistics are recorded (snapped to the solver grid);
    // empty selects 101 evenly spaced times.
    std::vector<double> record_times;
    unsigned threads{1};
};

struct MomentSeries {
    std::vector<double> value;
    std::vector<double> stderr_;
};

struct EnsembleStats {
    std::vector<double> times;
    std::size_t trajectories{0};
    std::uint64_t seed{0};
    MomentSeries mean_Q, mean_P, cov_QQ, cov_QP, cov_PP, energy;
};

namespace detail {

// Mean with jackknife standard error.
inline void jackknife_mean(const std::vector<double>& x, double& value, double& se) {
    const auto n = static_cast<double>(x.size());
    value = pairwise_sum(x) / n;
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (x[i] - value) * (x[i] - value);
    // Leave-one-out means differ from the full mean by (x_i - mean)/(n - 1).
    se = std::sqrt((n - 1.0) / n * pairwise_sum(dev) / ((n - 1.0) * (n - 1.0)));
}

// Unbiased covariance with delete-one jackknife standard error.
inline void jackknife_cov(const std::vector<double>& x, const std::vector<double>& y, double& value, double& se) {
    const std::size_t n = x.size();
    const auto nd = static_cast<double>(n);
    const double mx = pairwise_sum(x) / nd;
    const double my = pairwise_sum(y) / nd;
    std::vector<double> cx(n), cy(n), cxy(n);
    for (std::size_t i = 0; i < n; ++i) {
        cx[i] = x[i] - mx;
        cy[i] = y[i] - my;
        cxy[i] = cx[i] * cy[i];
    }
    const double sxy = pairwise_sum(cxy);
    value = sxy / (nd - 1.0);
    if (n < 3) {
        se = 0.0;
        return;
    }
    // Centred sums of cx, cy are zero, so leaving out i gives
    // (sxy - cx cy - cx cy / (n - 1)) / (n - 2).
    std::vector<double> loo(n), dev(n);
    for (std::size_t i = 0; i < n; ++i) loo[i] = (sxy - cxy[i] * nd / (nd - 1.0)) / (nd - 2.0);
    const double avg = pairwise_sum(loo) / nd;
    for (std::size_t i = 0; i < n; ++i) dev[i] = (loo[i] - avg) * (loo[i] - avg);
    se = std::sqrt((nd - 1.0) / nd * pairwise_sum(dev));
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, const F& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace detail

// Each trajectory j draws its bath from streams keyed by derive_key(seed, j)
// and its system initial condition from the stream after the last mode, so
// results do not depend on thread count or scheduling. The GLE uses the
// discrete kernel of the sampled grid.
inline EnsembleStats run_ensemble(GLEConfig config, const BathGrid& grid, const GaussianState& initial,
                                  const BetaSchedule& beta, const EnsembleOptions& opt) {
    if (opt.trajectories < 2) throw ValidationError("run_ensemble: need at least 2 trajectories");
    initial.validate();
    beta.validate();
    config.grid = grid;
    const GleSolver solver(config);
    const auto& times = solver.times();
    const ForceSynthesizer synth(grid, times);

    std::vector<std::size_t> idx;
    if (opt.record_times.empty()) {
        for (std::size_t k = 0; k <= 100; ++k) idx.push_back(k * (times.size() - 1) / 100);
    } else {
        for (double t : opt.record_times) {
            if (t < 0 || t > times.back() + 0.5 * solver.config().dt)
                throw ValidationError("run_ensemble: record time " + io::number(t) + " outside the horizon");
            idx.push_back(std::min(times.size() - 1, static_cast<std::size_t>(std::llround(t / solver.config().dt))));
        }
    }
    const Eigen::LLT<Eigen::Matrix2d> chol(initial.cov);
    Eigen::Matrix2d factor = Eigen::Matrix2d::Zero();
    if (chol.info() == Eigen::Success) {
        factor = chol.matrixL();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(initial.cov);
        factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    const std::size_t n = opt.trajectories;
    const std::size_t r = idx.size();
    std::vector<double> qs(n * r), ps(n * r);
    detail::parallel_for(n, opt.threads, [&](std::size_t j) {
        const std::uint64_t key = derive_key(opt.seed, j);
        const BathSample bath = sample_initial(grid, beta, key);
        CounterRng rng(key, grid.size());
        const Eigen::Vector2d z = initial.mean + factor * Eigen::Vector2d(rng.normal(), rng.normal());
        const auto force = synth(bath);
        const Trajectory tr = solver.solve(z(0), z(1), force, key);
        for (std::size_t k = 0; k < r; ++k) {
            qs[k * n + j] = tr.Q[idx[k]];
            ps[k * n + j] = tr.P(idx[k]);
        }
    });

    EnsembleStats st;
    st.trajectories = n;
    st.seed = opt.seed;
    for (auto* s : {&st.mean_Q, &st.mean_P, &st.cov_QQ, &st.cov_QP, &st.cov_PP, &st.energy}) {
        s->value.resize(r);
        s->stderr_.resize(r);
    }
    const double m = config.params.mass;
    const double w2 = config.params.omega * config.params.omega;
    std::vector<double> q(n), p(n), e(n);
    for (std::size_t k = 0; k < r; ++k) {
        st.times.push_back(times[idx[k]]);
        std::copy_n(qs.begin() + static_cast<std::ptrdiff_t>(k * n), n, q.begin());
        std::copy_n(ps.begin() + static_cast<std::ptrdiff_t>(k * n), n, p.begin());
        for (std::size_t j = 0; j < n; ++j) e[j] = p[j] * p[j] / (2.0 * m) + 0.5 * m * w2 * q[j] * q[j];
        detail::jackknife_mean(q, st.mean_Q.value[k], st.mean_Q.stderr_[k]);
        detail::jackknife_mean(p, st.mean_P.value[k], st.mean_P.stderr_[k]);
        detail::jackknife_mean(e, st.energy.value[k], st.energy.stderr_[k]);
        detail::jackknife_cov(q, q, st.cov_QQ.value[k], st.cov_QQ.stderr_[k]);
        detail::jackknife_cov(q, p, st.cov_QP.value[k], st.cov_QP.stderr_[k]);
        detail::jackknife_cov(p, p, st.cov_PP.value[k], st.cov_PP.stderr_[k]);
    }
    return st;
}

inline void write_csv(const EnsembleStats& st, std::ostream& out) {
    io::CsvWriter csv(out, "qbm.ensemble.v1",
                      {"t", "mean_Q", "se_mean_Q", "mean_P", "se_mean_P", "cov_QQ", "se_cov_QQ", "cov_QP", "se_cov_QP",
                       "cov_PP", "se_cov_PP", "energy", "se_energy"});
    for (std::size_t k = 0; k < st.times.size(); ++k)
        csv.row({st.times[k], st.mean_Q.value[k], st.mean_Q.stderr_[k], st.mean_P.value[k], st.mean_P.stderr_[k],
                 st.cov_QQ.value[k], st.cov_QQ.stderr_[k], st.cov_QP.value[k], st.cov_QP.stderr_[k],
                 st.cov_PP.value[k], st.cov_PP.stderr_[k], st.energy.value[k], st.energy.stderr_[k]});
}

} // namespace qbm
