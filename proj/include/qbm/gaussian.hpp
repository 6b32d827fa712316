// gaussian.hpp - reduced Wigner functions: Gaussian states, Gaussian-cosine
// mixtures (cat states), purity, fringe visibility and exact transport.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qbm/bath.hpp"
#include "qbm/errors.hpp"
#include "qbm/io.hpp"
#include "qbm/model.hpp"
#include "qbm/propagator.hpp"
#include "qbm/reduced.hpp"

namespace qbm {

// ---------------------------------------------------------------------------
// Single-oscillator Gaussian states
// ---------------------------------------------------------------------------

struct GaussianState {
    Eigen::Vector2d mean{Eigen::Vector2d::Zero()};
    Eigen::Matrix2d cov{Eigen::Matrix2d::Identity()};

    static GaussianState coherent(const PhysicalParams& p, double q = 0.0, double mom = 0.0) {
        GaussianState s;
        s.mean << q, mom;
        s.cov << p.hbar / (2.0 * p.mass * p.omega), 0.0, 0.0, p.hbar * p.mass * p.omega / 2.0;
        return s;
    }

    // Minimum-uncertainty state squeezed by e^{-2r} in Q.
    static GaussianState squeezed(const PhysicalParams& p, double r, double q = 0.0, double mom = 0.0) {
        GaussianState s = coherent(p, q, mom);
        s.cov(0, 0) *= std::exp(-2.0 * r);
        s.cov(1, 1) *= std::exp(2.0 * r);
        return s;
    }

    // Classical Maxwell-Boltzmann ensemble of the bare oscillator at temperature T.
    static GaussianState thermal(const PhysicalParams& p) {
        GaussianState s;
        s.cov << p.kT() / (p.mass * p.omega * p.omega), 0.0, 0.0, p.mass * p.kT();
        return s;
    }

    void validate() const {
        detail::require(cov.allFinite() && mean.allFinite(), "Gaussian state has non-finite entries");
        detail::require(std::abs(cov(0, 1) - cov(1, 0)) <= 1e-12 * cov.cwiseAbs().maxCoeff(),
                        "Gaussian covariance must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
        detail::require(es.eigenvalues().minCoeff() >= -1e-12 * cov.trace(),
                        "Gaussian covariance must be positive semidefinite");
    }

    // cov + (i hbar / 2) J >= 0, which for one degree of freedom is
    // cov > 0 together with det(cov) >= hbar^2 / 4.
    bool quantum_admissible(double hbar, double slack = 1e-12) const {
        return cov(0, 0) > 0 && cov(1, 1) > 0 && cov.determinant() >= 0.25 * hbar * hbar * (1.0 - slack);
    }
};

inline double wigner_eval(const GaussianState& s, double q, double p) {
    const double det = s.cov.determinant();
    if (!(det > 0)) throw ValidationError("wigner_eval: singular covariance");
    const Eigen::Vector2d d(q - s.mean(0), p - s.mean(1));
    return std::exp(-0.5 * d.dot(s.cov.inverse() * d)) / (2.0 * pi * std::sqrt(det));
}

// 2 pi hbar int f^2 = hbar / (2 sqrt(det cov)).
inline double purity(const GaussianState& s, const PhysicalParams& p) {
    const double det = s.cov.determinant();
    if (!(det > 0)) throw ValidationError("purity: state is not normalizable (singular covariance)");
    return p.hbar / (2.0 * std::sqrt(det));
}

// Exact reduced moments from a full transition matrix and the factorized
// initial ensemble sys0 (+) diag(1/(beta_i w_i^2), 1/beta_i).
inline GaussianState reduce_moments(const TransitionMatrix& tm, const GaussianState& sys0, const BathGrid& grid,
                                    const BetaSchedule& beta) {
    const auto dim = static_cast<Eigen::Index>(2 * grid.size() + 2);
    if (tm.dim() != dim)
        throw ValidationError("reduce_moments: transition matrix does not match the bath grid");
    const BathVariances v = bath_variances(grid, beta);
    const Eigen::MatrixXd rows = tm.matrix.topRows(2);
    GaussianState out;
    out.mean = rows.leftCols(2) * sys0.mean;
    out.cov = rows.leftCols(2) * sys0.cov * rows.leftCols(2).transpose();
    for (Eigen::Index j = 1; j < v.coordinate.size(); ++j) {
        const Eigen::Vector2d cx = rows.col(coordinate_index(j));
        const Eigen::Vector2d cp = rows.col(momentum_index(j));
        out.cov += v.coordinate(j) * cx * cx.transpose() + v.momentum(j) * cp * cp.transpose();
    }
    return out;
}

// Moments at a reduced sample for a given initial system state.
inline GaussianState moments_at(const ReducedSample& s, const GaussianState& sys0) {
    GaussianState out;
    out.mean = s.map * sys0.mean;
    out.cov = s.map * sys0.cov * s.map.transpose() + s.noise;
    return out;
}

// Exact time derivative of the moments at a reduced sample.
inline GaussianState moment_rates_at(const ReducedSample& s, const GaussianState& sys0) {
    GaussianState out;
    out.mean = s.map_rate * sys0.mean;
    const Eigen::Matrix2d x = s.map_rate * sys0.cov * s.map.transpose();
    out.cov = x + x.transpose() + s.noise_rate;
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian-cosine mixtures
// ---------------------------------------------------------------------------

// weight * N(z; center, cov) * cos(wavevector . (z - center) + phase)
template <int Dim>
struct WignerComponent {
    using Vec = Eigen::Matrix<double, Dim, 1>;
    using Mat = Eigen::Matrix<double, Dim, Dim>;

    double weight{1.0};
    Vec center{Vec::Zero()};
    Mat cov{Mat::Identity()};
    Vec wavevector{Vec::Zero()};
    double phase{0.0};

    bool fringed() const { return !wavevector.isZero(0.0); }

    // Height of the Gaussian envelope.
    double peak() const {
        return std::abs(weight) / (std::pow(2.0 * pi, 0.5 * Dim) * std::sqrt(cov.determinant()));
    }
};

template <int Dim>
class WignerMixture {
public:
    using Component = WignerComponent<Dim>;
    using Vec = typename Component::Vec;
    using Mat = typename Component::Mat;

    WignerMixture() = default;
    explicit WignerMixture(std::vector<Component> components) : components_(std::move(components)) {
        for (const auto& c : components_) {
            if (!(c.cov.determinant() > 0)) throw ValidationError("Wigner component has a singular covariance");
            if (!std::isfinite(c.weight)) throw ValidationError("Wigner component weight is not finite");
        }
    }

    const std::vector<Component>& components() const noexcept { return components_; }

    double operator()(const Vec& z) const {
        double f = 0.0;
        for (const auto& c : components_) {
            const Vec d = z - c.center;
            const double det = c.cov.determinant();
            if (!(det > 0)) throw ValidationError("wigner_eval: singular covariance");
            f += c.weight * std::exp(-0.5 * d.dot(c.cov.ldlt().solve(d))) /
                 (std::pow(2.0 * pi, 0.5 * Dim) * std::sqrt(det)) * std::cos(c.wavevector.dot(d) + c.phase);
        }
        return f;
    }

    double integral() const {
        double total = 0.0;
        for (const auto& c : components_)
            total += c.weight * std::exp(-0.5 * c.wavevector.dot(c.cov * c.wavevector)) * std::cos(c.phase);
        return total;
    }

    WignerMixture normalized() const {
        const double z = integral();
        if (!(std::abs(z) > 0) || !std::isfinite(z)) throw ValidationError("Wigner mixture is not normalizable");
        WignerMixture out = *this;
        for (auto& c : out.components_) c.weight /= z;
        return out;
    }

    // int f g dz, closed form from Gaussian-cosine product integrals.
    double overlap(const WignerMixture& other) const {
        double total = 0.0;
        for (const auto& a : components_)
            for (const auto& b : other.components_) total += component_overlap(a, b);
        return total;
    }

    // (2 pi hbar)^(Dim/2) int f^2
    double purity(double hbar) const { return std::pow(2.0 * pi * hbar, 0.5 * Dim) * overlap(*this); }

    // Pushes every component through z -> map z and convolves with a zero-mean
    // Gaussian of covariance added_noise.
    WignerMixture transported(const Mat& map, const Mat& added_noise) const {
        if (map.determinant() == 0.0 || !map.allFinite())
            throw NumericalFailure("transport: singular reduced map");
        WignerMixture out;
        out.components_.reserve(components_.size());
        for (const auto& c : components_) {
            Component t;
            t.center = map * c.center;
            const Mat spread = map * c.cov * map.transpose();
            t.cov = spread + added_noise;
            t.cov = 0.5 * (t.cov + t.cov.transpose()).eval();
            t.phase = c.phase;
            if (c.fringed()) {
                // Sigma' k' with k' = map^-T k equals map Sigma k.
                const Vec v = map * (c.cov * c.wavevector);
                const Vec sv = t.cov.ldlt().solve(v);
                t.wavevector = sv;
                t.weight = c.weight * std::exp(-0.5 * c.wavevector.dot(c.cov * c.wavevector) + 0.5 * v.dot(sv));
            } else {
                t.weight = c.weight;
            }
            out.components_.push_back(t);
        }
        return out;
    }

    // Marginal over the coordinates not listed in keep.
    template <int Keep>
    WignerMixture<Keep> marginal(const std::array<int, Keep>& keep) const {
        using KVec = Eigen::Matrix<double, Keep, 1>;
        std::vector<WignerComponent<Keep>> parts;
        for (const auto& c : components_) {
            WignerComponent<Keep> m;
            KVec v;
            const Vec sk = c.cov * c.wavevector;
            for (int a = 0; a < Keep; ++a) {
                m.center(a) = c.center(keep[a]);
                v(a) = sk(keep[a]);
                for (int b = 0; b < Keep; ++b) m.cov(a, b) = c.cov(keep[a], keep[b]);
            }
            const KVec kv = m.cov.ldlt().solve(v);
            m.wavevector = kv;
            m.phase = c.phase;
            m.weight = c.weight * std::exp(-0.5 * c.wavevector.dot(sk) + 0.5 * v.dot(kv));
            if (!c.fringed()) m.wavevector = KVec::Zero();
            parts.push_back(m);
        }
        return WignerMixture<Keep>(std::move(parts));
    }

private:
    static double component_overlap(const Component& a, const Component& b) {
        const Mat s = a.cov + b.cov;
        const auto ldlt = s.ldlt();
        const Vec d = a.center - b.center;
        const double gauss = std::exp(-0.5 * d.dot(ldlt.solve(d))) /
                             (std::pow(2.0 * pi, 0.5 * Dim) * std::sqrt(s.determinant()));
        // Product Gaussian N(z; mu_c, Sigma_c).
        const Mat sigma_c = a.cov * ldlt.solve(b.cov);
        const Vec mu_c = b.cov * ldlt.solve(a.center) + a.cov * ldlt.solve(b.center);
        auto term = [&](const Vec& kappa, double psi) {
            return std::exp(-0.5 * kappa.dot(sigma_c * kappa)) * std::cos(kappa.dot(mu_c) + psi);
        };
        const double base_a = a.phase - a.wavevector.dot(a.center);
        const double base_b = b.phase - b.wavevector.dot(b.center);
        return 0.5 * a.weight * b.weight * gauss *
               (term(a.wavevector + b.wavevector, base_a + base_b) + term(a.wavevector - b.wavevector, base_a - base_b));
    }

    std::vector<Component> components_;
};

using CatState = WignerMixture<2>;

inline double wigner_eval(const CatState& s, double q, double p) { return s(Eigen::Vector2d(q, p)); }

inline double purity(const CatState& s, const PhysicalParams& p) { return s.purity(p.hbar); }

// Coherent superposition of two coherent states centred at c1 and c2: two
// fringe-free lumps plus one interference component at the midpoint.
inline CatState make_cat(const PhysicalParams& p, const Eigen::Vector2d& c1, const Eigen::Vector2d& c2) {
    p.validate();
    const GaussianState coh = GaussianState::coherent(p);
    const Eigen::Vector2d delta = c1 - c2;
    WignerComponent<2> lump1{1.0, c1, coh.cov, Eigen::Vector2d::Zero(), 0.0};
    WignerComponent<2> lump2{1.0, c2, coh.cov, Eigen::Vector2d::Zero(), 0.0};
    WignerComponent<2> fringe{2.0, 0.5 * (c1 + c2), coh.cov, Eigen::Vector2d(-delta(1), delta(0)) / p.hbar, 0.0};
    return CatState({lump1, lump2, fringe}).normalized();
}

// Lumps at Q = +a and Q = -a; the fringes oscillate in P with wavevector 2a/hbar.
inline CatState make_cat(const PhysicalParams& p, double separation) {
    return make_cat(p, Eigen::Vector2d(separation, 0.0), Eigen::Vector2d(-separation, 0.0));
}

// Fringe envelope height over twice the geometric mean of the lump heights;
// 1 for a pure two-lump superposition.
inline double fringe_visibility(const CatState& cat) {
    double fringe = -1.0;
    double log_lumps = 0.0;
    int lumps = 0;
    for (const auto& c : cat.components()) {
        if (c.fringed()) {
            fringe = std::max(fringe, c.peak());
        } else if (c.weight > 0) {
            log_lumps += std::log(c.peak());
            ++lumps;
        }
    }
    if (fringe < 0) throw ValidationError("fringe_visibility: state has no interference component");
    if (lumps == 0) throw ValidationError("fringe_visibility: state has no lumps");
    return fringe / (2.0 * std::exp(log_lumps / lumps));
}

// Reduced evolution over one interval: z -> map z plus Gaussian noise.
struct ReducedMap {
    Eigen::Matrix2d map{Eigen::Matrix2d::Identity()};
    Eigen::Matrix2d added_noise{Eigen::Matrix2d::Zero()};

    static ReducedMap from(const ReducedSample& s) { return {s.map, s.noise}; }
};

inline CatState transport_cat(const ReducedMap& red, const CatState& cat) {
    return cat.transported(red.map, red.added_noise);
}

inline GaussianState transport(const ReducedMap& red, const GaussianState& s) {
    return {red.map * s.mean, red.map * s.cov * red.map.transpose() + red.added_noise};
}

// ---------------------------------------------------------------------------
// Two-oscillator correlation vs entanglement demo
// ---------------------------------------------------------------------------

using TwoModeState = WignerMixture<4>;

// Coordinates are ordered (Q1, P1, Q2, P2).
struct TwoModeGaussian {
    Eigen::Matrix4d cov{Eigen::Matrix4d::Identity()};
    Eigen::Vector4d mean{Eigen::Vector4d::Zero()};
    double cross_coupling{0.0};
    double omega_bar{1.0};
    double normalization{0.0};

    TwoModeState state() const { return TwoModeState({{1.0, mean, cov, Eigen::Vector4d::Zero(), 0.0}}); }
};

// Z2 exp(-(P1^2 + P2^2)/(m Omega hbar)) exp(-m omega_bar (Q1^2 + Q2^2)/hbar) exp(c Q1 Q2)
inline TwoModeGaussian make_entangled_pair(const PhysicalParams& p, double omega_bar, double c) {
    const double diag = 2.0 * p.mass * omega_bar / p.hbar;
    if (!(omega_bar > 0) || !(std::abs(c) < diag))
        throw ValidationError("cross coupling c must satisfy |c| < 2 m omega_bar / hbar for a normalizable state");
    Eigen::Matrix4d precision = Eigen::Matrix4d::Zero();
    precision(0, 0) = precision(2, 2) = diag;
    precision(0, 2) = precision(2, 0) = -c;
    precision(1, 1) = precision(3, 3) = 2.0 / (p.mass * p.omega * p.hbar);
    TwoModeGaussian g;
    g.cov = precision.inverse();
    g.cross_coupling = c;
    g.omega_bar = omega_bar;
    g.normalization = std::sqrt(precision.determinant()) / (4.0 * pi * pi);
    return g;
}

// Z1 exp(-(P1^2 + P2^2)/(m Omega hbar)) [lumps at (a, a) + lumps at (-a, -a)].
// literal = true keeps the printed second term, which repeats Q1 and leaves
// Q2 unconfined; that form is not normalizable and is rejected.
inline TwoModeState make_correlated_pair(const PhysicalParams& p, double a, bool literal = false) {
    if (literal)
        throw ValidationError("literal correlated-pair form is not normalizable: second term has no Q2 confinement");
    const GaussianState coh = GaussianState::coherent(p);
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    cov.block<2, 2>(0, 0) = coh.cov;
    cov.block<2, 2>(2, 2) = coh.cov;
    const Eigen::Vector4d plus(a, 0.0, a, 0.0);
    return TwoModeState({{0.5, plus, cov, Eigen::Vector4d::Zero(), 0.0}, {0.5, -plus, cov, Eigen::Vector4d::Zero(), 0.0}});
}

// Cross coupling giving unit global purity with omega_bar = Omega cosh^2(2r).
inline double entangling_coupling_for_squeezing(const PhysicalParams& p, double r) {
    const double ch = std::cosh(2.0 * r);
    return 2.0 * p.mass * p.omega / p.hbar * std::sqrt(ch * ch * ch * ch - 1.0);
}

struct Eq10Options {
    double separation{5.0};
    double cross_coupling{0.0};
    // When unset, omega_bar is tuned so the entangled pair has unit global purity.
    std::optional<double> omega_bar;
    bool literal_correlated_form{false};
};

struct Eq10Report {
    double separation{0.0};
    double cross_coupling{0.0};
    double omega_bar{0.0};
    double correlated_normalization{0.0};
    double entangled_normalization{0.0};
    double correlated_global_purity{0.0};
    double correlated_reduced_purity{0.0};
    double entangled_global_purity{0.0};
    double entangled_reduced_purity{0.0};
    // Whether the entangled pair satisfies cov + i hbar J / 2 >= 0.
    bool entangled_admissible{false};
    std::vector<std::string> warnings;
};

inline bool two_mode_admissible(const Eigen::Matrix4d& cov, double hbar) {
    Eigen::Matrix4cd m = cov.cast<std::complex<double>>();
    const std::complex<double> half_i(0.0, 0.5 * hbar);
    m(0, 1) += half_i;
    m(1, 0) -= half_i;
    m(2, 3) += half_i;
    m(3, 2) -= half_i;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m);
    return es.eigenvalues().minCoeff() >= -1e-12 * cov.trace();
}

inline Eq10Report eq10_demo(const PhysicalParams& p, const Eq10Options& opt) {
    p.validate();
    Eq10Report r;
    r.separation = opt.separation;
    r.cross_coupling = opt.cross_coupling;
    const double length_sq = p.hbar / (p.mass * p.omega);
    if (opt.separation * opt.separation < 10.0 * length_sq)
        r.warnings.push_back("separation a^2 < 10 hbar/(m Omega): lumps overlap, correlated pair is not a clean mixture");
    const TwoModeState f1 = make_correlated_pair(p, opt.separation, opt.literal_correlated_form);
    r.correlated_normalization = 1.0 / (2.0 * pi * pi * p.hbar * p.hbar);
    r.correlated_global_purity = f1.purity(p.hbar);
    r.correlated_reduced_purity = f1.marginal<2>({0, 1}).purity(p.hbar);

    const double c = opt.cross_coupling;
    r.omega_bar = opt.omega_bar ? *opt.omega_bar
                                : std::sqrt(p.omega * p.omega + std::pow(p.hbar * c / (2.0 * p.mass), 2));
    const TwoModeGaussian f2 = make_entangled_pair(p, r.omega_bar, c);
    r.entangled_normalization = f2.normalization;
    const TwoModeState s2 = f2.state();
    r.entangled_global_purity = s2.purity(p.hbar);
    r.entangled_reduced_purity = s2.marginal<2>({0, 1}).purity(p.hbar);
    r.entangled_admissible = two_mode_admissible(f2.cov, p.hbar);
    return r;
}

// ---------------------------------------------------------------------------
// Wigner grids
// ---------------------------------------------------------------------------

struct WignerGridSpec {
    double q_min{-1.0};
    double q_max{1.0};
    std::size_t q_points{64};
    double p_min{-1.0};
    double p_max{1.0};
    std::size_t p_points{64};
    // Upper bound on the number of emitted rows.
    std::size_t max_points{4'000'000};
};

// Row-major (Q outer, P inner) table of (Q, P, f).
inline void emit_grid(const std::function<double(double, double)>& f, const WignerGridSpec& g, std::ostream& out) {
    if (g.q_points == 0 || g.p_points == 0) throw ValidationError("emit_grid: grid has zero size");
    if (g.q_points > g.max_points / g.p_points)
        throw ValidationError("emit_grid: grid of " + std::to_string(g.q_points) + " x " + std::to_string(g.p_points) +
                              " points exceeds the configured cap of " + std::to_string(g.max_points));
    if (!(g.q_max >= g.q_min) || !(g.p_max >= g.p_min)) throw ValidationError("emit_grid: empty range");
    io::CsvWriter csv(out, "qbm.wigner_grid.v1", {"Q", "P", "f"});
    const auto qs = linspace(g.q_min, g.q_max, g.q_points);
    const auto ps = linspace(g.p_min, g.p_max, g.p_points);
    for (double q : qs)
        for (double pv : ps) csv.row({q, pv, f(q, pv)});
}

} // namespace qbm
