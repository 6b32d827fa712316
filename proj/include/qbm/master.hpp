// master.hpp - time-dependent coefficients of the local master equation
//
//   df/dt = -P/m dQ f + m Wb^2 Q dP f + 2 gb dP(P f) + D dP^2 f + d dQ dP f
//
// extracted from exact reduced moments. Its moment equations are
//   <Q>' = <P>/m,             <P>' = -m Wb^2 <Q> - 2 gb <P>,
//   sQQ' = 2 sQP/m,           sQP' = sPP/m - m Wb^2 sQQ - 2 gb sQP + d,
//   sPP' = -2 m Wb^2 sQP - 4 gb sPP + 2 D.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qbm/bath.hpp"
#include "qbm/errors.hpp"
#include "qbm/gaussian.hpp"
#include "qbm/io.hpp"
#include "qbm/model.hpp"
#include "qbm/propagator.hpp"
#include "qbm/reduced.hpp"

namespace qbm {

struct MasterCoefficients {
    std::vector<double> times;
    std::vector<double> omega_bar_sq;
    std::vector<double> gamma_bar;
    std::vector<double> d;
    std::vector<double> D;
    // Nonzero where the fundamental pair is degenerate; values there are NaN.
    std::vector<std::uint8_t> singular;
    // Q1 P2 - Q2 P1 of the fundamental pair.
    std::vector<double> wronskian;

    std::size_t size() const noexcept { return times.size(); }

    std::size_t singular_count() const {
        return static_cast<std::size_t>(std::count(singular.begin(), singular.end(), std::uint8_t{1}));
    }
};

// Covariance and its exact time derivative along a trajectory.
struct MomentTrack {
    std::vector<Eigen::Matrix2d> cov;
    std::vector<Eigen::Matrix2d> cov_rate;
};

inline MomentTrack moment_track(std::span<const ReducedSample> samples, const GaussianState& initial) {
    MomentTrack tr;
    tr.cov.reserve(samples.size());
    tr.cov_rate.reserve(samples.size());
    for (const auto& s : samples) {
        tr.cov.push_back(moments_at(s, initial).cov);
        tr.cov_rate.push_back(moment_rates_at(s, initial).cov);
    }
    return tr;
}

struct ExtractionOptions {
    // A time is singular when |W| < tol (|Q1 P2| + |Q2 P1|).
    double wronskian_tol{1e-8};
};

// (Wb^2, gb) from the fundamental pair in the map and its rate, (d, D) from
// the covariance track.
inline MasterCoefficients extract_coefficients(std::span<const ReducedSample> samples, const MomentTrack& track,
                                               const PhysicalParams& p, const ExtractionOptions& opt = {}) {
    p.validate();
    if (track.cov.size() != samples.size() || track.cov_rate.size() != samples.size())
        throw ValidationError("extract_coefficients: moment track does not match the samples");
    const double m = p.mass;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MasterCoefficients c;
    const std::size_t n = samples.size();
    c.times.resize(n);
    c.omega_bar_sq.assign(n, nan);
    c.gamma_bar.assign(n, nan);
    c.d.assign(n, nan);
    c.D.assign(n, nan);
    c.singular.assign(n, 0);
    c.wronskian.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ReducedSample& s = samples[i];
        c.times[i] = s.time;
        const double q1 = s.map(0, 0), p1 = s.map(1, 0), q2 = s.map(0, 1), p2 = s.map(1, 1);
        const double f1 = s.map_rate(1, 0), f2 = s.map_rate(1, 1);
        const double w = q1 * p2 - q2 * p1;
        c.wronskian[i] = w;
        if (!(std::abs(w) >= opt.wronskian_tol * (std::abs(q1 * p2) + std::abs(q2 * p1))) || !std::isfinite(w)) {
            c.singular[i] = 1;
            continue;
        }
        // [-m Q1, -2 P1; -m Q2, -2 P2] (Wb^2, gb) = (P1', P2')
        const double det = 2.0 * m * w;
        const double wb2 = (-2.0 * p2 * f1 + 2.0 * p1 * f2) / det;
        const double gb = (m * q2 * f1 - m * q1 * f2) / det;
        const Eigen::Matrix2d& sg = track.cov[i];
        const Eigen::Matrix2d& sr = track.cov_rate[i];
        c.omega_bar_sq[i] = wb2;
        c.gamma_bar[i] = gb;
        c.d[i] = sr(0, 1) - sg(1, 1) / m + m * wb2 * sg(0, 0) + 2.0 * gb * sg(0, 1);
        c.D[i] = 0.5 * (sr(1, 1) + 2.0 * m * wb2 * sg(0, 1) + 4.0 * gb * sg(1, 1));
    }
    return c;
}

inline MasterCoefficients extract_coefficients(std::span<const ReducedSample> samples, const PhysicalParams& p,
                                               const GaussianState& initial, const ExtractionOptions& opt = {}) {
    return extract_coefficients(samples, moment_track(samples, initial), p, opt);
}

// Exact reduced samples for a bath grid at the given times.
inline std::vector<ReducedSample> reduced_samples(const BathGrid& grid, const PhysicalParams& p,
                                                  const BetaSchedule& beta, std::span<const double> times) {
    for (double t : times)
        if (!(t >= 0) || !std::isfinite(t)) throw ValidationError("sample times must be finite and non-negative");
    const LinearSystem sys = build_system(grid, p);
    return ReducedDynamics(sys, beta).sample(times);
}

// The initial state only enters through sigma0, which cancels; the coherent
// state is the default.
inline MasterCoefficients extract_coefficients(const BathGrid& grid, const PhysicalParams& p,
                                               const BetaSchedule& beta, std::span<const double> times,
                                               const std::optional<GaussianState>& initial = std::nullopt,
                                               const ExtractionOptions& opt = {}) {
    const auto samples = reduced_samples(grid, p, beta, times);
    return extract_coefficients(samples, p, initial.value_or(GaussianState::coherent(p)), opt);
}

// ---------------------------------------------------------------------------
// Locality
// ---------------------------------------------------------------------------

struct LocalityReport {
    // max over states, coefficients and times of |c_k - c_0| / max_t |c_0|.
    double max_deviation{0.0};
    std::vector<double> state_deviation;
    std::array<double, 4> coefficient_deviation{};
    std::vector<MasterCoefficients> coefficients;
    double tolerance{1e-6};
    bool local{true};
};

namespace detail {

inline std::array<const std::vector<double>*, 4> series(const MasterCoefficients& c) {
    return {&c.omega_bar_sq, &c.gamma_bar, &c.d, &c.D};
}

} // namespace detail

inline LocalityReport verify_locality(std::span<const ReducedSample> samples, const std::vector<MomentTrack>& tracks,
                                      const PhysicalParams& p, double tolerance = 1e-6,
                                      const ExtractionOptions& opt = {}) {
    if (tracks.size() < 2) throw ValidationError("verify_locality: need at least 2 initial states");
    LocalityReport r;
    r.tolerance = tolerance;
    for (const auto& t : tracks) r.coefficients.push_back(extract_coefficients(samples, t, p, opt));
    const MasterCoefficients& ref = r.coefficients.front();
    const auto ref_series = detail::series(ref);
    std::array<double, 4> scale{};
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (!ref.singular[i]) scale[k] = std::max(scale[k], std::abs((*ref_series[k])[i]));
    r.state_deviation.assign(tracks.size(), 0.0);
    for (std::size_t s = 1; s < tracks.size(); ++s) {
        const auto other = detail::series(r.coefficients[s]);
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < ref.size(); ++i) {
                if (ref.singular[i] || r.coefficients[s].singular[i]) continue;
                const double diff = std::abs((*other[k])[i] - (*ref_series[k])[i]);
                const double dev = scale[k] > 0 ? diff / scale[k] : diff;
                r.state_deviation[s] = std::max(r.state_deviation[s], dev);
                r.coefficient_deviation[k] = std::max(r.coefficient_deviation[k], dev);
            }
        r.max_deviation = std::max(r.max_deviation, r.state_deviation[s]);
    }
    r.local = r.max_deviation <= tolerance;
    return r;
}

inline LocalityReport verify_locality(const BathGrid& grid, const PhysicalParams& p, const BetaSchedule& beta,
                                      const std::vector<GaussianState>& states, std::span<const double> times,
                                      double tolerance = 1e-6, const ExtractionOptions& opt = {}) {
    if (states.size() < 2) throw ValidationError("verify_locality: need at least 2 initial states");
    for (const auto& s : states) s.validate();
    const auto samples = reduced_samples(grid, p, beta, times);
    std::vector<MomentTrack> tracks;
    for (const auto& s : states) tracks.push_back(moment_track(samples, s));
    return verify_locality(samples, tracks, p, tolerance, opt);
}

// Squeezed, thermal and minimum-uncertainty states with distinct covariances.
inline std::vector<GaussianState> default_locality_states(const PhysicalParams& p) {
    PhysicalParams warm = p;
    if (!(warm.temperature > 0)) warm.temperature = p.hbar * p.omega / p.kB;
    return {GaussianState::coherent(p), GaussianState::squeezed(p, 0.5), GaussianState::thermal(warm)};
}

// ---------------------------------------------------------------------------
// Forward integration of the extracted equation
// ---------------------------------------------------------------------------

struct ForwardCheck {
    std::vector<double> times;
    // Rows (<Q>, <P>, sQQ, sQP, sPP) from the extracted equation and exactly.
    std::vector<std::array<double, 5>> integrated;
    std::vector<std::array<double, 5>> exact;
    // Per component max |integrated - exact| / max |exact|.
    std::array<double, 5> component_deviation{};
    double max_deviation{0.0};
    std::vector<std::size_t> interpolated;
};

namespace detail {

using MomentVec = std::array<double, 5>;

struct CoefficientPoint {
    double wb2, gb, d, D;
};

inline MomentVec moment_rhs(const MomentVec& y, const CoefficientPoint& c, double m) {
    return {y[1] / m,
            -m * c.wb2 * y[0] - 2.0 * c.gb * y[1],
            2.0 * y[3] / m,
            y[4] / m - m * c.wb2 * y[2] - 2.0 * c.gb * y[3] + c.d,
            -2.0 * m * c.wb2 * y[3] - 4.0 * c.gb * y[4] + 2.0 * c.D};
}

inline MomentVec axpy(const MomentVec& y, double a, const MomentVec& k) {
    MomentVec out;
    for (std::size_t i = 0; i < 5; ++i) out[i] = y[i] + a * k[i];
    return out;
}

inline MomentVec moments_row(const GaussianState& g) {
    return {g.mean(0), g.mean(1), g.cov(0, 0), g.cov(0, 1), g.cov(1, 1)};
}

} // namespace detail

// Integrates the moment equations with RK4 at step 2 dt on a uniform sample
// grid of spacing dt (the middle sample supplies the midpoint coefficients),
// starting from the exact moments at the first sample. Masked samples are
// filled by linear interpolation. horizon <= 0 uses the full coverage.
inline ForwardCheck forward_check(const MasterCoefficients& coeffs, const GaussianState& initial,
                                  std::span<const ReducedSample> exact, const PhysicalParams& p, double horizon = 0.0) {
    const std::size_t n = coeffs.size();
    if (n < 3) throw ValidationError("forward_check: need at least 3 coefficient samples");
    if (exact.size() != n) throw ValidationError("forward_check: exact samples do not match the coefficients");
    const double t0 = coeffs.times.front();
    const double dt = coeffs.times[1] - t0;
    if (!(dt > 0)) throw ValidationError("forward_check: sample times must increase");
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(coeffs.times[i] - t0 - dt * static_cast<double>(i)) > 1e-9 * std::max(1.0, coeffs.times.back()))
            throw ValidationError("forward_check: coefficient samples must be uniformly spaced");
    if (horizon <= 0) horizon = coeffs.times.back() - t0;
    if (horizon > coeffs.times.back() - t0 + 1e-9 * dt)
        throw ValidationError("forward_check: horizon " + io::number(horizon) + " exceeds coefficient coverage " +
                              io::number(coeffs.times.back() - t0));
    const std::size_t last = std::min(n - 1, static_cast<std::size_t>(std::llround(horizon / dt)));

    ForwardCheck out;
    std::vector<detail::CoefficientPoint> pts(n);
    std::vector<std::size_t> good;
    for (std::size_t i = 0; i < n; ++i) {
        if (!coeffs.singular[i]) good.push_back(i);
        pts[i] = {coeffs.omega_bar_sq[i], coeffs.gamma_bar[i], coeffs.d[i], coeffs.D[i]};
    }
    if (good.empty()) throw NumericalFailure("forward_check: every coefficient sample is singular");
    for (std::size_t i = 0; i < n; ++i) {
        if (!coeffs.singular[i]) continue;
        out.interpolated.push_back(i);
        auto hi = std::upper_bound(good.begin(), good.end(), i);
        const std::size_t b = hi == good.end() ? good.back() : *hi;
        const std::size_t a = hi == good.begin() ? good.front() : *(hi - 1);
        const double f = a == b ? 0.0 : static_cast<double>(i - a) / static_cast<double>(b - a);
        pts[i] = {pts[a].wb2 + f * (pts[b].wb2 - pts[a].wb2), pts[a].gb + f * (pts[b].gb - pts[a].gb),
                  pts[a].d + f * (pts[b].d - pts[a].d), pts[a].D + f * (pts[b].D - pts[a].D)};
    }

    const double m = p.mass;
    detail::MomentVec y = detail::moments_row(moments_at(exact[0], initial));
    auto record = [&](std::size_t i) {
        out.times.push_back(coeffs.times[i]);
        out.integrated.push_back(y);
        out.exact.push_back(detail::moments_row(moments_at(exact[i], initial)));
    };
    record(0);
    std::size_t i = 0;
    while (i < last) {
        const bool full = i + 2 <= last;
        const double h = full ? 2.0 * dt : dt;
        const detail::CoefficientPoint& c0 = pts[i];
        const detail::CoefficientPoint& c2 = pts[full ? i + 2 : i + 1];
        const detail::CoefficientPoint c1 =
            full ? pts[i + 1]
                 : detail::CoefficientPoint{0.5 * (c0.wb2 + c2.wb2), 0.5 * (c0.gb + c2.gb), 0.5 * (c0.d + c2.d),
                                            0.5 * (c0.D + c2.D)};
        const auto k1 = detail::moment_rhs(y, c0, m);
        const auto k2 = detail::moment_rhs(detail::axpy(y, 0.5 * h, k1), c1, m);
        const auto k3 = detail::moment_rhs(detail::axpy(y, 0.5 * h, k2), c1, m);
        const auto k4 = detail::moment_rhs(detail::axpy(y, h, k3), c2, m);
        for (std::size_t j = 0; j < 5; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        i += full ? 2 : 1;
        record(i);
    }

    for (std::size_t j = 0; j < 5; ++j) {
        double scale = 0.0, diff = 0.0;
        for (std::size_t r = 0; r < out.times.size(); ++r) {
            scale = std::max(scale, std::abs(out.exact[r][j]));
            diff = std::max(diff, std::abs(out.integrated[r][j] - out.exact[r][j]));
        }
        out.component_deviation[j] = scale > 0 ? diff / scale : diff;
        out.max_deviation = std::max(out.max_deviation, out.component_deviation[j]);
    }
    return out;
}

inline void write_csv(const MasterCoefficients& c, std::ostream& out) {
    io::CsvWriter csv(out, "qbm.master_coefficients.v1", {"t", "OmegaBar2", "gammaBar", "d", "D", "flags"});
    for (std::size_t i = 0; i < c.size(); ++i)
        csv.row({c.times[i], c.omega_bar_sq[i], c.gamma_bar[i], c.d[i], c.D[i], static_cast<double>(c.singular[i])});
}

inline void write_csv(const ForwardCheck& f, std::ostream& out) {
    io::CsvWriter csv(out, "qbm.forward_check.v1",
                      {"t", "mean_Q", "mean_P", "cov_QQ", "cov_QP", "cov_PP", "exact_mean_Q", "exact_mean_P",
                       "exact_cov_QQ", "exact_cov_QP", "exact_cov_PP"});
    for (std::size_t r = 0; r < f.times.size(); ++r) {
        const auto& a = f.integrated[r];
        const auto& b = f.exact[r];
        csv.row({f.times[r], a[0], a[1], a[2], a[3], a[4], b[0], b[1], b[2], b[3], b[4]});
    }
}

} // namespace qbm
