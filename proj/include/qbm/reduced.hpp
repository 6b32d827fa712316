// reduced.hpp - exact system-sector dynamics after integrating out the bath.
//
// For a factorized initial ensemble the reduced Gaussian moments are
//   mean(t) = M(t) mean0,   cov(t) = M(t) cov0 M(t)^T + N(t),
// where M(t) is the (Q, P) block of the transition matrix and N(t) is the
// covariance the thermal bath injects into the system sector. Both (and their
// exact time derivatives) are computed here from the normal modes, in blocks
// of sample times, without forming the full transition matrix.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qbm/model.hpp"
#include "qbm/propagator.hpp"

namespace qbm {

struct ReducedSample {
    double time{0.0};
    Eigen::Matrix2d map{Eigen::Matrix2d::Identity()};
    Eigen::Matrix2d map_rate{Eigen::Matrix2d::Zero()};
    Eigen::Matrix2d noise{Eigen::Matrix2d::Zero()};
    Eigen::Matrix2d noise_rate{Eigen::Matrix2d::Zero()};
};

// Bath variances in (x, p) layout, indexed by degree of freedom (entry 0 is
// the system and carries no bath variance).
struct BathVariances {
    Eigen::VectorXd coordinate;
    Eigen::VectorXd momentum;
};

inline BathVariances bath_variances(const BathGrid& grid, const BetaSchedule& beta) {
    const auto n = static_cast<Eigen::Index>(grid.size()) + 1;
    BathVariances v{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index j = 1; j < n; ++j) {
        const double w = grid.omegas[static_cast<std::size_t>(j - 1)];
        const double energy = beta.inverse(w);
        v.coordinate(j) = energy / (w * w);
        v.momentum(j) = energy;
    }
    return v;
}

class ReducedDynamics {
public:
    ReducedDynamics(const LinearSystem& sys, const BetaSchedule& beta)
        : params_(sys.params), modes_(sys), variances_(bath_variances(sys.grid, beta)) {
        beta.validate();
    }

    const NormalModes& modes() const noexcept { return modes_; }

    std::vector<ReducedSample> sample(std::span<const double> times, Eigen::Index block = 256) const {
        std::vector<ReducedSample> out(times.size());
        for (std::size_t start = 0; start < times.size(); start += static_cast<std::size_t>(block)) {
            const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(block), times.size() - start);
            sample_block(times.subspan(start, count), std::span<ReducedSample>(out).subspan(start, count));
        }
        return out;
    }

    ReducedSample at(double t) const {
        const double ts[1] = {t};
        return sample(ts).front();
    }

private:
    void sample_block(std::span<const double> times, std::span<ReducedSample> out) const {
        const Eigen::MatrixXd& u = modes_.modes();
        const Eigen::VectorXd& nu = modes_.frequencies();
        const Eigen::Index k = nu.size();
        const auto b = static_cast<Eigen::Index>(times.size());
        Eigen::MatrixXd c(b, k), s(b, k);
        for (Eigen::Index r = 0; r < b; ++r)
            for (Eigen::Index m = 0; m < k; ++m) {
                const double phase = nu(m) * times[static_cast<std::size_t>(r)];
                c(r, m) = u(0, m) * std::cos(phase);
                s(r, m) = u(0, m) * std::sin(phase);
            }
        const Eigen::MatrixXd ut = u.transpose();
        const Eigen::MatrixXd a1 = c * ut;
        const Eigen::MatrixXd a2 = s * nu.cwiseInverse().asDiagonal() * ut;
        const Eigen::MatrixXd a3 = s * nu.asDiagonal() * ut;
        const Eigen::MatrixXd a4 = c * nu.cwiseAbs2().asDiagonal() * ut;

        const double m = params_.mass;
        const double sm = std::sqrt(m);
        const Eigen::VectorXd sqrt_mu = modes_.masses().cwiseSqrt();
        const Eigen::VectorXd inv_sqrt_mu = sqrt_mu.cwiseInverse();
        const Eigen::VectorXd& vx = variances_.coordinate;
        const Eigen::VectorXd& vp = variances_.momentum;

        for (Eigen::Index r = 0; r < b; ++r) {
            // Rows of T(t) for Q, P and dP/dt, split into coefficients on the
            // initial coordinates (x) and momenta (p).
            const Eigen::ArrayXd qx = a1.row(r).transpose().array() * sqrt_mu.array() / sm;
            const Eigen::ArrayXd qp = a2.row(r).transpose().array() * inv_sqrt_mu.array() / sm;
            const Eigen::ArrayXd px = -sm * a3.row(r).transpose().array() * sqrt_mu.array();
            const Eigen::ArrayXd pp = sm * a1.row(r).transpose().array() * inv_sqrt_mu.array();
            const Eigen::ArrayXd fx = -sm * a4.row(r).transpose().array() * sqrt_mu.array();
            const Eigen::ArrayXd fp = -sm * a3.row(r).transpose().array() * inv_sqrt_mu.array();

            ReducedSample& smp = out[static_cast<std::size_t>(r)];
            smp.time = times[static_cast<std::size_t>(r)];
            smp.map << qx(0), qp(0), px(0), pp(0);
            smp.map_rate << px(0) / m, pp(0) / m, fx(0), fp(0);

            auto form = [&](const Eigen::ArrayXd& ax, const Eigen::ArrayXd& ap, const Eigen::ArrayXd& bx,
                            const Eigen::ArrayXd& bp) {
                return (ax * bx * vx.array()).sum() + (ap * bp * vp.array()).sum();
            };
            const double nqq = form(qx, qp, qx, qp);
            const double nqp = form(qx, qp, px, pp);
            const double npp = form(px, pp, px, pp);
            const double qf = form(qx, qp, fx, fp);
            const double pf = form(px, pp, fx, fp);
            smp.noise << nqq, nqp, nqp, npp;
            const double rqq = 2.0 * nqp / m;
            const double rqp = npp / m + qf;
            const double rpp = 2.0 * pf;
            smp.noise_rate << rqq, rqp, rqp, rpp;
        }
    }

    PhysicalParams params_;
    NormalModes modes_;
    BathVariances variances_;
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

} // namespace qbm
