// bath.hpp - finite renderings of the bath continuum and Gaussian sampling of
// its initial state.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "qbm/errors.hpp"
#include "qbm/io.hpp"
#include "qbm/model.hpp"
#include "qbm/rng.hpp"

namespace qbm {

enum class GridScheme { uniform, equal_weight };

inline GridScheme default_scheme(const SpectralModel& m) noexcept {
    return m.kind == SpectrumKind::supra_ohmic ? GridScheme::equal_weight : GridScheme::uniform;
}

inline double default_omega_max(const SpectralModel& m) noexcept {
    if (m.kind == SpectrumKind::tabulated) return m.table.back().omega;
    return m.shape == CutoffShape::sharp ? m.cutoff : 10.0 * m.cutoff;
}

// N discrete modes. couplings_sq[i] = g^2(omegas[i]) * weights[i] absorbs the
// quadrature weight, so sums over modes replace integrals over w.
struct BathGrid {
    std::vector<double> omegas;
    std::vector<double> couplings_sq;
    std::vector<double> weights;

    std::size_t size() const noexcept { return omegas.size(); }
    double coupling(std::size_t i) const { return std::sqrt(couplings_sq[i]); }

    double total_coupling_sq() const { return pairwise_sum(couplings_sq); }

    // 2 pi / (smallest mode spacing); dynamics past half of this are grid artifacts.
    double recurrence_time() const {
        if (omegas.size() < 2) return std::numeric_limits<double>::infinity();
        double spacing = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < omegas.size(); ++i) spacing = std::min(spacing, omegas[i] - omegas[i - 1]);
        return 2.0 * pi / spacing;
    }

    // K_N(t) = (1/m) sum_i g_i^2 cos(w_i t)
    double kernel(double t, const PhysicalParams& p) const {
        double k = 0.0;
        for (std::size_t i = 0; i < size(); ++i) k += couplings_sq[i] * std::cos(omegas[i] * t);
        return k / p.mass;
    }

    void validate() const {
        detail::require(!omegas.empty(), "bath grid has no modes");
        detail::require(couplings_sq.size() == omegas.size() && weights.size() == omegas.size(),
                        "bath grid arrays differ in length");
        for (std::size_t i = 0; i < size(); ++i) {
            detail::require(omegas[i] > 0 && std::isfinite(omegas[i]), "bath frequencies must be positive");
            detail::require(couplings_sq[i] >= 0 && std::isfinite(couplings_sq[i]),
                            "bath couplings must be non-negative");
            if (i > 0) detail::require(omegas[i] > omegas[i - 1], "bath frequencies must increase");
        }
    }
};

namespace detail {

inline BathGrid uniform_grid(const SpectralModel& model, const PhysicalParams& p, std::size_t n,
                             double omega_max) {
    BathGrid g;
    const double dw = omega_max / static_cast<double>(n);
    g.omegas.resize(n);
    g.couplings_sq.resize(n);
    g.weights.assign(n, dw);
    for (std::size_t i = 0; i < n; ++i) {
        g.omegas[i] = (static_cast<double>(i) + 0.5) * dw;
        g.couplings_sq[i] = model.coupling_sq(g.omegas[i], p) * dw;
    }
    return g;
}

// Modes placed at the centres (in cumulative weight) of N bins that each
// carry an equal share of int g^2 dw.
inline BathGrid equal_weight_grid(const SpectralModel& model, const PhysicalParams& p, std::size_t n,
                                  double omega_max, const QuadratureOptions& opt) {
    const std::size_t fine = std::max<std::size_t>(64 * n, 4096);
    const double h = omega_max / static_cast<double>(fine);
    auto g2 = [&](double w) { return model.coupling_sq(w, p); };
    std::vector<double> nodes(fine + 1), cumulative(fine + 1, 0.0);
    QuadratureOptions local = opt;
    local.base_panels = 1;
    local.abs_tol = opt.abs_tol / static_cast<double>(fine);
    for (std::size_t k = 0; k <= fine; ++k) nodes[k] = h * static_cast<double>(k);
    for (std::size_t k = 1; k <= fine; ++k)
        cumulative[k] = cumulative[k - 1] + integrate(g2, nodes[k - 1], nodes[k], local);
    const double total = cumulative.back();
    if (!(total > 0)) return uniform_grid(model, p, n, omega_max);

    auto invert = [&](double target) {
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
        std::size_t k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cumulative.begin(), 1,
                                                                             static_cast<std::ptrdiff_t>(fine)));
        const double lo = nodes[k - 1];
        const double c0 = cumulative[k - 1];
        double w = lo + h * (target - c0) / std::max(cumulative[k] - c0, 1e-300);
        // Newton polish against the exact partial integral of the bin.
        for (int iter = 0; iter < 4; ++iter) {
            const double gw = g2(w);
            if (!(gw > 0)) break;
            const double value = c0 + integrate(g2, lo, w, local);
            const double next = std::clamp(w - (value - target) / gw, lo, nodes[k]);
            if (std::abs(next - w) < 1e-15 * std::max(1.0, w)) break;
            w = next;
        }
        return w;
    };

    BathGrid g;
    g.omegas.resize(n);
    g.couplings_sq.assign(n, total / static_cast<double>(n));
    g.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.omegas[i] = invert((static_cast<double>(i) + 0.5) * total / static_cast<double>(n));
        const double density = g2(g.omegas[i]);
        g.weights[i] = density > 0 ? g.couplings_sq[i] / density : 0.0;
    }
    return g;
}

} // namespace detail

// omega_max <= 0 selects the default (10 Lambda exponential, Lambda sharp).
inline BathGrid discretize(const SpectralModel& model, const PhysicalParams& p, std::size_t n,
                           GridScheme scheme, double omega_max = 0.0, const QuadratureOptions& opt = {}) {
    model.validate();
    p.validate();
    if (n == 0) throw ValidationError("discretize: mode count must be at least 1");
    if (omega_max == 0.0) omega_max = default_omega_max(model);
    if (!(omega_max > 0) || !std::isfinite(omega_max))
        throw ValidationError("discretize: omega_max must be positive");
    BathGrid g = scheme == GridScheme::uniform ? detail::uniform_grid(model, p, n, omega_max)
                                               : detail::equal_weight_grid(model, p, n, omega_max, opt);
    g.validate();
    return g;
}

inline BathGrid discretize(const SpectralModel& model, const PhysicalParams& p, std::size_t n) {
    return discretize(model, p, n, default_scheme(model));
}

struct BathSample {
    std::vector<double> q;
    std::vector<double> p;
    std::uint64_t seed{0};
};

// Independent zero-mean Gaussians with Var(q_i) = 1/(beta_i w_i^2) and
// Var(p_i) = 1/beta_i; mode i uses its own stream keyed by (seed, i).
inline BathSample sample_initial(const BathGrid& grid, const BetaSchedule& beta, std::uint64_t seed) {
    grid.validate();
    beta.validate();
    BathSample s;
    s.seed = seed;
    s.q.resize(grid.size());
    s.p.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CounterRng rng(seed, i);
        const double energy = beta.inverse(grid.omegas[i]);
        s.q[i] = std::sqrt(energy) / grid.omegas[i] * rng.normal();
        s.p[i] = std::sqrt(energy) * rng.normal();
    }
    return s;
}

// F(t) = sum_i g_i [w_i q_i cos(w_i t) + p_i sin(w_i t)], summed directly.
inline double force_at(const BathGrid& grid, const BathSample& s, double t) {
    double f = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = grid.omegas[i];
        f += grid.coupling(i) * (w * s.q[i] * std::cos(w * t) + s.p[i] * std::sin(w * t));
    }
    return f;
}

inline std::vector<double> force_history(const BathGrid& grid, const BathSample& s,
                                         std::span<const double> times) {
    detail::require(s.q.size() == grid.size() && s.p.size() == grid.size(),
                    "force_history: sample does not match grid");
    std::vector<double> out(times.size());
    for (std::size_t n = 0; n < times.size(); ++n) out[n] = force_at(grid, s, times[n]);
    return out;
}

// Precomputed cos/sin tables for evaluating many force histories on one time
// grid: F = C a + S b with a_i = g_i w_i q_i and b_i = g_i p_i.
class ForceSynthesizer {
public:
    ForceSynthesizer(const BathGrid& grid, std::span<const double> times)
        : grid_(grid), cos_(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(grid.size())),
          sin_(cos_.rows(), cos_.cols()) {
        for (Eigen::Index n = 0; n < cos_.rows(); ++n)
            for (Eigen::Index i = 0; i < cos_.cols(); ++i) {
                const double phase = grid.omegas[static_cast<std::size_t>(i)] * times[static_cast<std::size_t>(n)];
                cos_(n, i) = std::cos(phase);
                sin_(n, i) = std::sin(phase);
            }
    }

    std::vector<double> operator()(const BathSample& s) const {
        const auto n = static_cast<Eigen::Index>(grid_.size());
        Eigen::VectorXd a(n), b(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            a(i) = grid_.coupling(k) * grid_.omegas[k] * s.q[k];
            b(i) = grid_.coupling(k) * s.p[k];
        }
        Eigen::VectorXd f = cos_ * a + sin_ * b;
        return {f.data(), f.data() + f.size()};
    }

private:
    BathGrid grid_;
    Eigen::MatrixXd cos_;
    Eigen::MatrixXd sin_;
};

inline void write_csv(const BathGrid& grid, std::ostream& out) {
    io::CsvWriter csv(out, "qbm.bath_grid.v1", {"omega", "g2", "weight"});
    for (std::size_t i = 0; i < grid.size(); ++i) csv.row({grid.omegas[i], grid.couplings_sq[i], grid.weights[i]});
}

} // namespace qbm
