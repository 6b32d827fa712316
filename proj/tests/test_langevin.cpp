#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qbm/langevin.hpp"
#include "qbm/propagator.hpp"

using namespace qbm;

namespace {

GLEConfig free_config(double dt, double horizon) {
    GLEConfig c;
    c.model = SpectralModel::uncoupled();
    c.dt = dt;
    c.horizon = horizon;
    return c;
}

double free_error(double dt) {
    const auto tr = solve_gle(free_config(dt, 10.0), 1.0, 0.3);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i)
        worst = std::max(worst, std::abs(tr.Q[i] - (std::cos(tr.times[i]) + 0.3 * std::sin(tr.times[i]))));
    return worst;
}

double rms(const std::vector<double>& x, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < x.size(); ++i) s += x[i] * x[i];
    return std::sqrt(s / static_cast<double>(x.size() - from));
}

} // namespace

TEST(Langevin, FreeOscillatorExact) {
    PhysicalParams p;
    p.mass = 2.0;
    auto cfg = free_config(5e-5, 5.0);
    cfg.params = p;
    const GleSolver solver(cfg);
    EXPECT_EQ(solver.history_window(), 0u);
    const auto tr = solver.solve(1.0, 0.6);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double t = tr.times[i];
        worst = std::max(worst, std::abs(tr.Q[i] - (std::cos(t) + 0.3 * std::sin(t))));
        EXPECT_NEAR(tr.P(i), p.mass * (0.3 * std::cos(t) - std::sin(t)), 1e-7);
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Langevin, SecondOrderConvergence) {
    const double e1 = free_error(0.02), e2 = free_error(0.01), e3 = free_error(0.005);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
    EXPECT_NEAR(e2 / e3, 4.0, 0.4);
}

TEST(Langevin, RefusesOversizedStep) {
    GLEConfig c;
    c.model = SpectralModel::ohmic(0.1, 50.0);
    c.dt = 0.05;
    try {
        GleSolver s(c);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("0.002"), std::string::npos) << e.what();
    }
    c.dt = 0.0;
    EXPECT_NO_THROW(GleSolver{c});
    EXPECT_NEAR(c.step(), 4e-4, 1e-15);
    c.horizon = -1.0;
    EXPECT_THROW(GleSolver{c}, ValidationError);
}

TEST(Langevin, RejectsBadForceRecord) {
    const GleSolver s(free_config(0.01, 1.0));
    const std::vector<double> f(5, 0.0);
    EXPECT_THROW(s.solve(1.0, 0.0, f), ValidationError);
    EXPECT_THROW(s.solve(std::nan(""), 0.0), ValidationError);
}

TEST(Langevin, AnalyticKernelMatchesQuadrature) {
    PhysicalParams p;
    for (const auto& m : {SpectralModel::ohmic(0.1, 20.0), SpectralModel::ohmic(0.1, 20.0, CutoffShape::sharp),
                          SpectralModel::supra_ohmic(3.0, 0.1, 20.0), SpectralModel::supra_ohmic(4.0, 0.1, 20.0, CutoffShape::exponential, 2.0)}) {
        GLEConfig a;
        a.params = p;
        a.model = m;
        a.horizon = 1.0;
        GLEConfig b = a;
        b.analytic_kernel = false;
        const auto ka = GleSolver(a).kernel(), kb = GleSolver(b).kernel();
        ASSERT_EQ(ka.size(), kb.size());
        const double k0 = std::abs(kb[0]);
        for (std::size_t i = 0; i < ka.size(); ++i) EXPECT_LE(std::abs(ka[i] - kb[i]), 1e-9 * k0) << "i=" << i;
    }
    EXPECT_FALSE(closed_form_kernel(SpectralModel::supra_ohmic(2.5, 0.1, 20.0), p, 0.0).has_value());
    EXPECT_FALSE(closed_form_kernel(SpectralModel::supra_ohmic(3.0, 0.1, 20.0, CutoffShape::sharp), p, 0.0).has_value());
}

TEST(Langevin, MatchesFullBathSample) {
    PhysicalParams p;
    const auto model = SpectralModel::ohmic(0.1, 10.0);
    const auto grid = discretize(model, p, 256);
    const NormalModes nm(build_system(grid, p));
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = model;
    cfg.grid = grid;
    cfg.dt = 0.0005;
    cfg.horizon = 10.0;
    const GleSolver solver(cfg);
    const auto bath = sample_initial(grid, BetaSchedule::classical(p), 77);
    const auto tr = solver.solve(1.0, 0.3, force_history(grid, bath, solver.times()));
    const auto z0 = phase_point(1.0, 0.3, bath);
    double dev = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < tr.size(); i += 25) {
        const double q = nm.propagate(z0, tr.times[i])(0);
        dev = std::max(dev, std::abs(q - tr.Q[i]));
        scale = std::max(scale, std::abs(q));
    }
    EXPECT_LE(dev / scale, 1e-6);
}

TEST(Langevin, MarkovianLimit) {
    PhysicalParams p;
    const double gamma = 0.1, lambda = 200.0, q0 = 1.0, p0 = 0.5;
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = SpectralModel::ohmic(gamma, lambda);
    cfg.horizon = 2.0;
    const auto tr = solve_gle(cfg, q0, p0);
    // Damped oscillator after the slip kick -2 gamma Q_I.
    const double wd = std::sqrt(1.0 - gamma * gamma);
    const double v0 = p0 - 2.0 * gamma * q0;
    double dev = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double t = tr.times[i];
        if (t <= 5.0 / lambda) continue;
        const double q = std::exp(-gamma * t) * (q0 * std::cos(wd * t) + (v0 + gamma * q0) / wd * std::sin(wd * t));
        dev = std::max(dev, std::abs(q - tr.Q[i]));
    }
    EXPECT_LE(dev / q0, 0.01);

    // Without the slip term the kick is absent and the mismatch is visible.
    cfg.slip_term = false;
    const auto no_slip = solve_gle(cfg, q0, p0);
    EXPECT_GT(std::abs(no_slip.Q.back() - tr.Q.back()), 0.05);
}

TEST(Langevin, HistoryWindowTruncation) {
    GLEConfig cfg;
    cfg.model = SpectralModel::ohmic(0.1, 20.0);
    cfg.horizon = 5.0;
    const auto full = solve_gle(cfg, 1.0, 0.0);
    cfg.history_window_tol = 1e-3;
    const GleSolver cut(cfg);
    EXPECT_LT(cut.history_window(), cut.times().size());
    const auto tr = cut.solve(1.0, 0.0);
    double dev = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) dev = std::max(dev, std::abs(tr.Q[i] - full.Q[i]));
    EXPECT_LE(dev, 5e-3);
}

TEST(Langevin, BackreactionIdentity) {
    PhysicalParams p;
    const auto model = SpectralModel::ohmic(0.1, 20.0);
    // Recurrence time well past the horizon, so the finite bath still looks Markovian.
    const auto grid = discretize(model, p, 2048);
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = model;
    cfg.grid = grid;
    cfg.horizon = 10.0;
    const GleSolver solver(cfg);
    const auto bath = sample_initial(grid, BetaSchedule::classical(p), 5);
    const auto tr = solver.solve(1.0, 0.0, force_history(grid, bath, solver.times()));
    const auto d = decompose_backreaction(tr, 1.0, 0.1);
    EXPECT_LE(d.identity_residual, 1e-8);
    // With matched local terms the remainder is small next to the noise.
    const auto first = static_cast<std::size_t>(std::ceil(5.0 / 20.0 / solver.config().dt));
    EXPECT_LT(rms(d.force_br, first), 0.1 * rms(tr.force, first));
    const auto bare = decompose_backreaction(tr, 1.0, 0.0);
    EXPECT_GT(rms(bare.force_br, first), rms(d.force_br, first));

    const std::vector<double> wrong(3, 1.0);
    EXPECT_THROW(decompose_backreaction(tr, std::span<const double>(wrong), 0.0), ValidationError);
}

TEST(Langevin, BackreactionVanishesWithoutBath) {
    auto cfg = free_config(0.01, 5.0);
    cfg.external_drive = [](double t) { return std::sin(3.0 * t); };
    const auto tr = solve_gle(cfg, 0.5, -0.2);
    const auto d = decompose_backreaction(tr, 1.0, 0.0);
    for (double f : d.force_br) EXPECT_LE(std::abs(f), 1e-12);
    EXPECT_LE(d.identity_residual, 1e-12);
}

TEST(Langevin, SupraOhmicBackreactionOpposesSlowForce) {
    PhysicalParams p;
    const double lambda = 100.0;
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = supra_ohmic_with_mass_shift(3.0, lambda, 1.0, p);
    const Impulse pulse{20.0 / lambda, 20.0 / lambda, 1.0};
    const auto r = impulse_response(cfg, pulse);
    const auto d = decompose_backreaction(r.coupled, 1.0, 0.0);
    const auto peak = static_cast<std::size_t>(std::llround(30.0 / lambda / r.coupled.times[1]));
    ASSERT_GT(r.coupled.force[peak], 0.99);
    // Adiabatic response -dm/(m + dm) F.
    EXPECT_NEAR(d.force_br[peak] / r.coupled.force[peak], -0.5, 0.05);
}

TEST(Langevin, ImpulseWithoutBathIsUnsuppressed) {
    GLEConfig cfg;
    cfg.model = SpectralModel::uncoupled();
    const auto r = impulse_response(cfg, Impulse{10.0, 20.0, 1.0});
    EXPECT_DOUBLE_EQ(r.ratio, 1.0);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Langevin, ImpulseWarnings) {
    GLEConfig cfg;
    cfg.model = SpectralModel::ohmic(0.1, 10.0);
    const auto fast = impulse_response(cfg, Impulse{2.0, 0.2, 1.0});
    ASSERT_EQ(fast.warnings.size(), 1u);
    EXPECT_NE(fast.warnings[0].find("10 / Lambda"), std::string::npos);
    const auto early = impulse_response(cfg, Impulse{0.1, 2.0, 1.0});
    EXPECT_EQ(early.warnings.size(), 1u);
    EXPECT_THROW(impulse_response(cfg, Impulse{1.0, 0.0, 1.0}), ValidationError);
}

TEST(Langevin, TrajectoryCsv) {
    const auto tr = solve_gle(free_config(0.1, 0.3), 1.0, 0.0);
    std::ostringstream a, b;
    write_csv(tr, a);
    EXPECT_EQ(a.str().rfind("# schema: qbm.trajectory.v1\nt,Q,P,F\n", 0), 0u);
    const std::vector<double> br(tr.size(), 0.0);
    write_csv(tr, b, br);
    EXPECT_EQ(b.str().rfind("# schema: qbm.trajectory_br.v1\nt,Q,P,F,F_BR\n", 0), 0u);
    EXPECT_THROW(write_csv(tr, b, std::vector<double>(1, 0.0)), ValidationError);
}

TEST(Langevin, EnsembleWithoutCouplingConservesEnergy) {
    PhysicalParams p;
    const auto model = SpectralModel::ohmic(0.0, 5.0);
    const auto grid = discretize(model, p, 16, GridScheme::uniform);
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = model;
    cfg.horizon = 10.0;
    EnsembleOptions opt;
    opt.trajectories = 500;
    const auto st = run_ensemble(cfg, grid, GaussianState::thermal(p), BetaSchedule::classical(p), opt);
    ASSERT_EQ(st.times.size(), 101u);
    for (std::size_t k = 0; k < st.times.size(); ++k)
        EXPECT_LE(std::abs(st.energy.value[k] - st.energy.value[0]), 3.0 * st.energy.stderr_[0]);
}

TEST(Langevin, EnsembleStandardErrorScaling) {
    PhysicalParams p;
    const auto model = SpectralModel::ohmic(0.2, 5.0);
    const auto grid = discretize(model, p, 64);
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = model;
    cfg.horizon = 3.0;
    EnsembleOptions opt;
    opt.record_times = {3.0};
    opt.trajectories = 400;
    const auto small = run_ensemble(cfg, grid, GaussianState::coherent(p, 1.0), BetaSchedule::classical(p), opt);
    opt.trajectories = 1600;
    const auto large = run_ensemble(cfg, grid, GaussianState::coherent(p, 1.0), BetaSchedule::classical(p), opt);
    EXPECT_NEAR(small.mean_Q.stderr_[0] / large.mean_Q.stderr_[0], 2.0, 0.4);
    EXPECT_NEAR(small.cov_QQ.stderr_[0] / large.cov_QQ.stderr_[0], 2.0, 0.4);
}

TEST(Langevin, EnsembleIndependentOfThreads) {
    PhysicalParams p;
    const auto model = SpectralModel::ohmic(0.2, 5.0);
    const auto grid = discretize(model, p, 32);
    GLEConfig cfg;
    cfg.params = p;
    cfg.model = model;
    cfg.horizon = 2.0;
    EnsembleOptions opt;
    opt.trajectories = 50;
    opt.seed = 9;
    const auto a = run_ensemble(cfg, grid, GaussianState::squeezed(p, 0.3), BetaSchedule::quantum(p), opt);
    opt.threads = 3;
    const auto b = run_ensemble(cfg, grid, GaussianState::squeezed(p, 0.3), BetaSchedule::quantum(p), opt);
    EXPECT_EQ(a.cov_QP.value, b.cov_QP.value);
    EXPECT_EQ(a.mean_P.value, b.mean_P.value);
    std::ostringstream sa, sb;
    write_csv(a, sa);
    write_csv(b, sb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(sa.str().rfind("# schema: qbm.ensemble.v1\n", 0), 0u);
    opt.trajectories = 1;
    EXPECT_THROW(run_ensemble(cfg, grid, GaussianState::thermal(p), BetaSchedule::quantum(p), opt), ValidationError);
}
