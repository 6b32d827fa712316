#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "qbm/model.hpp"

using namespace qbm;

namespace {

PhysicalParams unit_params(double kT = 1.0) {
    PhysicalParams p;
    p.temperature = kT;
    return p;
}

} // namespace

TEST(Model, ParamsValidation) {
    PhysicalParams p;
    EXPECT_NO_THROW(p.validate());
    p.mass = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = PhysicalParams{};
    p.temperature = -0.5;
    EXPECT_THROW(p.validate(), ValidationError);
    p.temperature = 0.0;
    EXPECT_NO_THROW(p.validate());
}

TEST(Model, SpectralModelValidation) {
    EXPECT_THROW(SpectralModel::ohmic(-0.1, 10.0), ValidationError);
    EXPECT_THROW(SpectralModel::ohmic(0.1, 0.0), ValidationError);
    EXPECT_THROW(SpectralModel::supra_ohmic(0.5, 0.1, 10.0), ValidationError);
    EXPECT_THROW(SpectralModel::tabulated({{1.0, 1.0}, {0.5, 1.0}}), ValidationError);
    EXPECT_THROW(SpectralModel::tabulated({{1.0, 1.0}}), ValidationError);
}

TEST(Model, OhmicCouplingNormalization) {
    const auto p = unit_params();
    const auto sharp = SpectralModel::ohmic(0.1, 50.0, CutoffShape::sharp);
    EXPECT_DOUBLE_EQ(pi * sharp.coupling_sq(10.0, p), 0.4);
    EXPECT_EQ(sharp.coupling_sq(50.5, p), 0.0);
    const auto expo = SpectralModel::ohmic(0.1, 50.0);
    EXPECT_NEAR(pi * expo.coupling_sq(50.0, p), 0.4 * std::exp(-1.0), 1e-15);
}

TEST(Model, SupraOhmicGrowsBelowCutoff) {
    const auto p = unit_params();
    const auto m = SpectralModel::supra_ohmic(3.0, 0.1, 20.0, CutoffShape::sharp);
    double prev = 0.0;
    for (double w = 0.5; w < 20.0; w += 0.5) {
        EXPECT_GT(m.coupling_sq(w, p), prev);
        prev = m.coupling_sq(w, p);
    }
    // matches the Ohmic coupling with the same gamma at the reference frequency
    EXPECT_NEAR(m.coupling_sq(p.omega, p), SpectralModel::ohmic(0.1, 20.0, CutoffShape::sharp).coupling_sq(p.omega, p),
                1e-15);
}

TEST(Model, UncoupledKernelIsZero) {
    const auto p = unit_params();
    for (double t : {0.0, 0.3, 7.0}) EXPECT_EQ(kernel_at(SpectralModel::uncoupled(), p, t), 0.0);
    EXPECT_EQ(noise_correlation_at(SpectralModel::uncoupled(), BetaSchedule::classical(p), 1.0), 0.0);
}

TEST(Model, OhmicSharpKernelClosedForm) {
    const auto p = unit_params();
    const double gamma = 0.1, lambda = 50.0;
    const auto m = SpectralModel::ohmic(gamma, lambda, CutoffShape::sharp);
    EXPECT_NEAR(kernel_at(m, p, 0.0), 4.0 * gamma * lambda / pi, 1e-9);
    EXPECT_NEAR(kernel_at(m, p, 1.0), 0.4 / pi * std::sin(50.0), 1e-9);
    for (double t : {0.01, 0.1, 0.77, 3.0, 12.5})
        EXPECT_NEAR(kernel_at(m, p, t), 4.0 * gamma / pi * std::sin(lambda * t) / t, 1e-9) << "t=" << t;
}

TEST(Model, OhmicExponentialKernelClosedForm) {
    const auto p = unit_params();
    const double gamma = 0.1, lambda = 50.0;
    const auto m = SpectralModel::ohmic(gamma, lambda);
    // The quadrature runs to 40 Lambda, so the e^-40 tail bounds the error.
    for (double t : {0.0, 0.005, 0.02, 0.3, 2.0, 10.0, 20.0}) {
        const double exact = 4.0 * gamma / pi * lambda / (1.0 + lambda * lambda * t * t);
        EXPECT_NEAR(kernel_at(m, p, t), exact, 1e-9 * (4.0 * gamma * lambda / pi)) << "t=" << t;
    }
}

TEST(Model, SupraOhmicCubicKernelClosedForm) {
    const auto p = unit_params();
    const double gamma = 0.05, lambda = 10.0;
    const auto m = SpectralModel::supra_ohmic(3.0, gamma, lambda);
    const double a = 1.0 / lambda;
    for (double t : {0.0, 0.05, 0.2, 1.0, 4.0}) {
        // int_0^inf w^2 e^{-a w} cos(w t) dw
        const double integral = 2.0 * (a * a * a - 3.0 * a * t * t) / std::pow(a * a + t * t, 3);
        const double exact = 4.0 * gamma / pi * integral;
        EXPECT_NEAR(kernel_at(m, p, t), exact, 1e-9 * std::abs(4.0 * gamma / pi * 2.0 / (a * a * a))) << "t=" << t;
    }
}

TEST(Model, KernelIsEven) {
    const auto p = unit_params();
    const auto m = SpectralModel::ohmic(0.2, 30.0);
    const double k0 = kernel_at(m, p, 0.0);
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int i = 0; i < 100; ++i) {
        const double t = u(gen);
        EXPECT_LE(std::abs(kernel_at(m, p, t) - kernel_at(m, p, -t)), 1e-12 * k0);
    }
}

TEST(Model, KernelQuadratureConverged) {
    const auto p = unit_params();
    for (const auto& m : {SpectralModel::ohmic(0.1, 20.0), SpectralModel::supra_ohmic(3.0, 0.1, 20.0)}) {
        QuadratureOptions coarse, fine;
        fine.base_panels = 2 * coarse.base_panels;
        const double k0 = std::abs(kernel_at(m, p, 0.0, coarse));
        for (double t = 0.0; t <= 20.0; t += 0.37) {
            const double a = kernel_at(m, p, t, coarse);
            const double b = kernel_at(m, p, t, fine);
            EXPECT_LE(std::abs(a - b), 1e-8 * k0) << "t=" << t;
        }
    }
}

TEST(Model, BetaSchedules) {
    auto p = unit_params(2.0);
    const auto classical = BetaSchedule::classical(p);
    const auto quantum = BetaSchedule::quantum(p);
    EXPECT_DOUBLE_EQ(classical.beta(3.0), 0.5);
    // (2/hw) tanh(hw/2kT)
    EXPECT_NEAR(quantum.beta(3.0), 2.0 / 3.0 * std::tanh(3.0 / 4.0), 1e-15);
    for (double w : {1e-6, 1e-5, 1e-4, 1.9e-3}) {
        EXPECT_LE(std::abs(quantum.inverse(w) - classical.inverse(w)) / classical.inverse(w), 1e-3);
        EXPECT_GT(quantum.beta(w), 0.0);
    }
    p.temperature = 0.0;
    EXPECT_THROW(BetaSchedule::classical(p), ValidationError);
    const auto zero = BetaSchedule::quantum(p);
    EXPECT_DOUBLE_EQ(zero.inverse(4.0), 2.0);
}

TEST(Model, ZeroTemperatureQuantumNoise) {
    auto p = unit_params(0.0);
    const double gamma = 0.1, lambda = 10.0;
    const auto m = SpectralModel::ohmic(gamma, lambda);
    // int (4 m gamma / pi) e^{-w/L} (hbar w / 2) dw = (4 m gamma / pi)(hbar / 2) L^2
    const double exact = 4.0 * gamma / pi * 0.5 * lambda * lambda;
    const double nu0 = noise_correlation_at(m, BetaSchedule::quantum(p), 0.0);
    EXPECT_GT(nu0, 0.0);
    EXPECT_NEAR(nu0, exact, 1e-8 * exact);
}

TEST(Model, OhmicNoiseSumRule) {
    const auto p = unit_params(1.5);
    const double gamma = 0.1, lambda = 100.0;
    const auto m = SpectralModel::ohmic(gamma, lambda);
    const auto beta = BetaSchedule::classical(p);
    const double target = 2.0 * p.mass * gamma * p.kT();
    for (double lt : {100.0, 400.0}) {
        const double integral = noise_time_integral(m, beta, lt / lambda);
        EXPECT_LE(std::abs(integral - target) / target, 0.01) << "Lambda t_max = " << lt;
    }
}

TEST(Model, RenormalizedMass) {
    const auto p = unit_params();
    EXPECT_EQ(renormalized_mass(SpectralModel::uncoupled(), p), 0.0);
    EXPECT_THROW(renormalized_mass(SpectralModel::ohmic(0.1, 10.0, CutoffShape::sharp), p), DivergentIntegral);
    EXPECT_THROW(renormalized_mass(SpectralModel::supra_ohmic(2.0, 0.1, 10.0), p), DivergentIntegral);
    const double gamma = 0.02, lambda = 30.0;
    // g^2 = c w^2 with c = 4 m gamma / (pi ref^2)
    const double c = 4.0 * gamma / pi;
    EXPECT_NEAR(renormalized_mass(SpectralModel::supra_ohmic(3.0, gamma, lambda, CutoffShape::sharp), p), c * lambda,
                1e-9 * c * lambda);
    EXPECT_NEAR(renormalized_mass(SpectralModel::supra_ohmic(3.0, gamma, lambda), p), c * lambda, 1e-9 * c * lambda);
    const auto tuned = supra_ohmic_with_mass_shift(3.0, 100.0, 1.0, p);
    EXPECT_NEAR(renormalized_mass(tuned, p), 1.0, 1e-9);
    EXPECT_NEAR(tuned.gamma, pi / 400.0, 1e-12);
}

TEST(Model, TabulatedSpectrum) {
    const auto p = unit_params();
    const auto path = std::filesystem::temp_directory_path() / "qbm_test_spectrum.csv";
    {
        std::ofstream out(path);
        out << "omega,g2\n0,0\n1,2\n2,1\n3,0\n";
    }
    const auto m = load_spectrum_csv(path.string());
    EXPECT_EQ(m.table.size(), 4u);
    EXPECT_DOUBLE_EQ(m.coupling_sq(0.5, p), 1.0);
    EXPECT_DOUBLE_EQ(m.coupling_sq(2.5, p), 0.5);
    EXPECT_EQ(m.coupling_sq(3.5, p), 0.0);
    // K(0) = (1/m) * area of the triangle pair = 3
    EXPECT_NEAR(kernel_at(m, p, 0.0), 3.0, 1e-10);
    {
        std::ofstream out(path);
        out << "1,2\n2,3\n";
    }
    EXPECT_THROW(load_spectrum_csv(path.string()), ValidationError);
    std::filesystem::remove(path);

    const auto flat = SpectralModel::tabulated({{0.0, 1.0}, {5.0, 1.0}});
    EXPECT_THROW(kernel_at(flat, p, 0.0), DivergentIntegral);
}

TEST(Model, MemoryKernelTabulates) {
    const auto p = unit_params();
    const MemoryKernel k(SpectralModel::ohmic(0.1, 5.0), p);
    const auto values = k.tabulate({0.0, 1.0});
    ASSERT_EQ(values.size(), 2u);
    EXPECT_NEAR(values[1], 0.4 / pi * 5.0 / 26.0, 1e-10);
}
