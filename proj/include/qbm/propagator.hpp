// propagator.hpp - exact classical evolution of the system + discretized bath.
//
// Phase-space ordering is fixed everywhere as z = (Q, P, q_1, p_1, ..., q_N, p_N):
// coordinate j sits at index 2j and its momentum at 2j + 1, with j = 0 the
// Brownian oscillator.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>

#include "qbm/bath.hpp"
#include "qbm/errors.hpp"
#include "qbm/io.hpp"
#include "qbm/model.hpp"

namespace qbm {

inline Eigen::Index coordinate_index(Eigen::Index j) noexcept { return 2 * j; }
inline Eigen::Index momentum_index(Eigen::Index j) noexcept { return 2 * j + 1; }

// Canonical form J with J(2j, 2j+1) = 1 and J(2j+1, 2j) = -1.
inline Eigen::MatrixXd symplectic_form(Eigen::Index dim) {
    detail::require(dim % 2 == 0, "symplectic_form: dimension must be even");
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index k = 0; k < dim / 2; ++k) {
        j(2 * k, 2 * k + 1) = 1.0;
        j(2 * k + 1, 2 * k) = -1.0;
    }
    return j;
}

// H = 1/2 p^T M^-1 p + 1/2 x^T V x with x = (Q, q_1, ..., q_N).
struct LinearSystem {
    PhysicalParams params;
    BathGrid grid;
    Eigen::VectorXd masses;    // diag(M): (m, 1, ..., 1)
    Eigen::MatrixXd stiffness; // V
    Eigen::MatrixXd drift;     // A in dz/dt = A z

    Eigen::Index degrees_of_freedom() const noexcept { return masses.size(); }
    Eigen::Index dim() const noexcept { return 2 * masses.size(); }
};

// Expands the quadratic form with the g^2 counter-term kept in the system
// potential: V_00 = m Omega^2 + sum g_i^2, V_0i = -g_i w_i, V_ii = w_i^2.
inline LinearSystem build_system(const BathGrid& grid, const PhysicalParams& params) {
    grid.validate();
    params.validate();
    LinearSystem sys;
    sys.params = params;
    sys.grid = grid;
    const auto n = static_cast<Eigen::Index>(grid.size()) + 1;
    sys.masses = Eigen::VectorXd::Ones(n);
    sys.masses(0) = params.mass;
    sys.stiffness = Eigen::MatrixXd::Zero(n, n);
    sys.stiffness(0, 0) = params.mass * params.omega * params.omega + grid.total_coupling_sq();
    for (Eigen::Index i = 1; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i - 1);
        const double w = grid.omegas[k];
        sys.stiffness(0, i) = sys.stiffness(i, 0) = -grid.coupling(k) * w;
        sys.stiffness(i, i) = w * w;
    }
    sys.drift = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sys.drift(coordinate_index(i), momentum_index(i)) = 1.0 / sys.masses(i);
        for (Eigen::Index j = 0; j < n; ++j)
            if (sys.stiffness(i, j) != 0.0) sys.drift(momentum_index(i), coordinate_index(j)) = -sys.stiffness(i, j);
    }
    return sys;
}

inline double energy(const LinearSystem& sys, const Eigen::VectorXd& z) {
    detail::require(z.size() == sys.dim(), "energy: dimension mismatch");
    const Eigen::Index n = sys.degrees_of_freedom();
    Eigen::VectorXd x(n), p(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        x(j) = z(coordinate_index(j));
        p(j) = z(momentum_index(j));
    }
    return 0.5 * p.cwiseProduct(sys.masses.cwiseInverse()).dot(p) + 0.5 * x.dot(sys.stiffness * x);
}

struct TransitionMatrix {
    double time{0.0};
    Eigen::MatrixXd matrix;

    Eigen::Index dim() const noexcept { return matrix.rows(); }
};

namespace detail {

// (x-block, p-block) layout -> interleaved layout.
inline Eigen::MatrixXd interleave(const Eigen::MatrixXd& xx, const Eigen::MatrixXd& xp,
                                  const Eigen::MatrixXd& px, const Eigen::MatrixXd& pp) {
    const Eigen::Index n = xx.rows();
    Eigen::MatrixXd t(2 * n, 2 * n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) {
            t(2 * r, 2 * c) = xx(r, c);
            t(2 * r, 2 * c + 1) = xp(r, c);
            t(2 * r + 1, 2 * c) = px(r, c);
            t(2 * r + 1, 2 * c + 1) = pp(r, c);
        }
    return t;
}

} // namespace detail

// Eigen-decomposition of the mass-weighted stiffness M^-1/2 V M^-1/2 = U nu^2 U^T.
// Each normal mode then rotates independently in its own phase plane.
class NormalModes {
public:
    explicit NormalModes(const LinearSystem& sys) : masses_(sys.masses) {
        const Eigen::VectorXd inv_sqrt = sys.masses.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd w = inv_sqrt.asDiagonal() * sys.stiffness * inv_sqrt.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w);
        if (solver.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "normal-mode eigendecomposition failed (dimension " << w.rows()
                << ", max |entry| " << w.cwiseAbs().maxCoeff() << ")";
            throw NumericalFailure(msg.str());
        }
        const Eigen::VectorXd& ev = solver.eigenvalues();
        if (!(ev.minCoeff() > 0)) {
            std::ostringstream msg;
            msg << "quadratic form is not positive definite: eigenvalue range [" << ev.minCoeff() << ", "
                << ev.maxCoeff() << "], condition " << ev.maxCoeff() / std::abs(ev.minCoeff());
            throw NumericalFailure(msg.str());
        }
        freqs_ = ev.cwiseSqrt();
        modes_ = solver.eigenvectors();
    }

    const Eigen::VectorXd& frequencies() const noexcept { return freqs_; }
    const Eigen::MatrixXd& modes() const noexcept { return modes_; }
    const Eigen::VectorXd& masses() const noexcept { return masses_; }

    TransitionMatrix transition(double t) const {
        const Eigen::VectorXd sqrt_m = masses_.cwiseSqrt();
        const Eigen::VectorXd inv_sqrt_m = sqrt_m.cwiseInverse();
        Eigen::VectorXd c(freqs_.size()), s(freqs_.size());
        for (Eigen::Index k = 0; k < freqs_.size(); ++k) {
            c(k) = std::cos(freqs_(k) * t);
            s(k) = std::sin(freqs_(k) * t);
        }
        const Eigen::MatrixXd left_x = inv_sqrt_m.asDiagonal() * modes_;
        const Eigen::MatrixXd left_p = sqrt_m.asDiagonal() * modes_;
        const Eigen::MatrixXd right_x = modes_.transpose() * sqrt_m.asDiagonal();
        const Eigen::MatrixXd right_p = modes_.transpose() * inv_sqrt_m.asDiagonal();
        const Eigen::MatrixXd xx = left_x * c.asDiagonal() * right_x;
        const Eigen::MatrixXd xp = left_x * s.cwiseQuotient(freqs_).asDiagonal() * right_p;
        const Eigen::MatrixXd px = -left_p * s.cwiseProduct(freqs_).asDiagonal() * right_x;
        const Eigen::MatrixXd pp = left_p * c.asDiagonal() * right_p;
        return {t, detail::interleave(xx, xp, px, pp)};
    }

    // T(t) z0 without forming T(t).
    Eigen::VectorXd propagate(const Eigen::VectorXd& z0, double t) const {
        const Eigen::Index n = freqs_.size();
        if (z0.size() != 2 * n)
            throw ValidationError("propagate: phase-space vector has dimension " + std::to_string(z0.size()) +
                                  ", system " + std::to_string(2 * n));
        Eigen::VectorXd x(n), p(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            x(j) = z0(coordinate_index(j));
            p(j) = z0(momentum_index(j));
        }
        const Eigen::VectorXd a = modes_.transpose() * masses_.cwiseSqrt().cwiseProduct(x);
        const Eigen::VectorXd b = modes_.transpose() * p.cwiseQuotient(masses_.cwiseSqrt());
        Eigen::VectorXd a1(n), b1(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double c = std::cos(freqs_(k) * t);
            const double s = std::sin(freqs_(k) * t);
            a1(k) = a(k) * c + b(k) * s / freqs_(k);
            b1(k) = -a(k) * freqs_(k) * s + b(k) * c;
        }
        const Eigen::VectorXd xt = (modes_ * a1).cwiseQuotient(masses_.cwiseSqrt());
        const Eigen::VectorXd pt = (modes_ * b1).cwiseProduct(masses_.cwiseSqrt());
        Eigen::VectorXd z(2 * n);
        for (Eigen::Index j = 0; j < n; ++j) {
            z(coordinate_index(j)) = xt(j);
            z(momentum_index(j)) = pt(j);
        }
        return z;
    }

private:
    Eigen::VectorXd masses_;
    Eigen::VectorXd freqs_;
    Eigen::MatrixXd modes_;
};

enum class EvolutionMethod { normal_mode, symplectic_step };

namespace detail {

// One Stormer-Verlet (kick-drift-kick) step of size h as a matrix.
inline Eigen::MatrixXd verlet_step(const LinearSystem& sys, double h) {
    const Eigen::Index n = sys.degrees_of_freedom();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd kick_v = -0.5 * h * sys.stiffness;
    const Eigen::MatrixXd drift_m = h * Eigen::MatrixXd(sys.masses.cwiseInverse().asDiagonal());
    const Eigen::MatrixXd kick = interleave(id, zero, kick_v, id);
    const Eigen::MatrixXd drift = interleave(id, drift_m, zero, id);
    return kick * drift * kick;
}

inline Eigen::MatrixXd matrix_power(Eigen::MatrixXd base, std::uint64_t n) {
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(base.rows(), base.cols());
    while (n > 0) {
        if (n & 1U) result = result * base;
        n >>= 1U;
        if (n > 0) base = base * base;
    }
    return result;
}

} // namespace detail

// Fourth-order symmetric composition of Verlet steps (triple jump); symplectic.
inline Eigen::MatrixXd composed_step(const LinearSystem& sys, double h) {
    const double cbrt2 = std::cbrt(2.0);
    const double outer = 1.0 / (2.0 - cbrt2);
    const double inner = -cbrt2 / (2.0 - cbrt2);
    const Eigen::MatrixXd a = detail::verlet_step(sys, outer * h);
    return a * detail::verlet_step(sys, inner * h) * a;
}

// dt <= 0 selects the default 1e-3 * min(1/Lambda, 1/Omega) for the stepper.
inline TransitionMatrix evolve(const LinearSystem& sys, double t,
                               EvolutionMethod method = EvolutionMethod::normal_mode, double dt = 0.0) {
    if (!std::isfinite(t)) throw ValidationError("evolve: time must be finite");
    if (method == EvolutionMethod::normal_mode) return NormalModes(sys).transition(t);
    if (dt == 0.0) {
        const double fastest = sys.grid.omegas.empty() ? sys.params.omega
                                                       : std::max(sys.params.omega, sys.grid.omegas.back() / 10.0);
        dt = 1e-3 / fastest;
    }
    if (!(dt > 0)) throw ValidationError("evolve: symplectic step requires dt > 0");
    if (t == 0.0) return {0.0, Eigen::MatrixXd::Identity(sys.dim(), sys.dim())};
    const auto steps = static_cast<std::uint64_t>(std::ceil(std::abs(t) / dt));
    const double h = t / static_cast<double>(steps);
    return {t, detail::matrix_power(composed_step(sys, h), steps)};
}

inline Eigen::VectorXd propagate_point(const TransitionMatrix& tm, const Eigen::VectorXd& z0) {
    if (z0.size() != tm.dim())
        throw ValidationError("propagate_point: phase-space vector has dimension " + std::to_string(z0.size()) +
                              ", transition matrix " + std::to_string(tm.dim()));
    return tm.matrix * z0;
}

// Phase-space vector from system coordinates and a bath sample.
inline Eigen::VectorXd phase_point(double q, double p, const BathSample& bath) {
    Eigen::VectorXd z(2 * static_cast<Eigen::Index>(bath.q.size()) + 2);
    z(0) = q;
    z(1) = p;
    for (std::size_t i = 0; i < bath.q.size(); ++i) {
        z(coordinate_index(static_cast<Eigen::Index>(i) + 1)) = bath.q[i];
        z(momentum_index(static_cast<Eigen::Index>(i) + 1)) = bath.p[i];
    }
    return z;
}

inline double symplectic_residual(const TransitionMatrix& tm) {
    const Eigen::MatrixXd j = symplectic_form(tm.dim());
    return (tm.matrix.transpose() * j * tm.matrix - j).cwiseAbs().maxCoeff();
}

inline void write_csv(const TransitionMatrix& tm, std::ostream& out) {
    io::CsvWriter csv(out, "qbm.transition_matrix.v1", {"row", "col", "value"});
    for (Eigen::Index r = 0; r < tm.matrix.rows(); ++r)
        for (Eigen::Index c = 0; c < tm.matrix.cols(); ++c)
            csv.row({static_cast<double>(r), static_cast<double>(c), tm.matrix(r, c)});
}

} // namespace qbm
