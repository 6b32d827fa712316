// model.hpp - physical parameters, spectral densities, inverse-temperature
// schedules and the continuum kernels they define.
//
// Conventions: the bath coupling is g_w^2 in the Hamiltonian
//   H = P^2/2m + m Omega^2 Q^2/2 + 1/2 int dw [p_w^2 + (w q_w - g_w Q)^2],
// the memory kernel is K(t) = (1/m) int g_w^2 cos(wt) dw and the noise
// correlation is nu(t) = int g_w^2 / beta_w cos(wt) dw.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qbm/errors.hpp"
#include "qbm/quadrature.hpp"

namespace qbm {

struct PhysicalParams {
    double mass{1.0};
    double omega{1.0};
    double hbar{1.0};
    double kB{1.0};
    double temperature{1.0};

    double kT() const noexcept { return kB * temperature; }

    void validate() const {
        detail::require(mass > 0 && std::isfinite(mass), "mass must be positive");
        detail::require(omega > 0 && std::isfinite(omega), "system frequency must be positive");
        detail::require(hbar > 0 && std::isfinite(hbar), "hbar must be positive");
        detail::require(kB > 0 && std::isfinite(kB), "kB must be positive");
        detail::require(temperature >= 0 && std::isfinite(temperature),
                        "temperature must be non-negative");
    }
};

enum class SpectrumKind { ohmic, supra_ohmic, tabulated };
enum class CutoffShape { sharp, exponential };

struct SpectralPoint {
    double omega;
    double coupling_sq;
};

// The coupling function g_w^2. gamma == 0 is the uncoupled model.
struct SpectralModel {
    SpectrumKind kind{SpectrumKind::ohmic};
    double gamma{0.1};
    double cutoff{50.0};
    CutoffShape shape{CutoffShape::exponential};
    double exponent{1.0};
    // Frequency at which a supra-Ohmic spectrum matches the Ohmic one with the
    // same gamma; 0 selects the system frequency.
    double reference_frequency{0.0};
    std::vector<SpectralPoint> table;

    static SpectralModel ohmic(double gamma, double cutoff,
                               CutoffShape shape = CutoffShape::exponential) {
        SpectralModel m;
        m.kind = SpectrumKind::ohmic;
        m.gamma = gamma;
        m.cutoff = cutoff;
        m.shape = shape;
        m.validate();
        return m;
    }

    static SpectralModel supra_ohmic(double exponent, double gamma, double cutoff,
                                     CutoffShape shape = CutoffShape::exponential,
                                     double reference_frequency = 0.0) {
        SpectralModel m;
        m.kind = SpectrumKind::supra_ohmic;
        m.exponent = exponent;
        m.gamma = gamma;
        m.cutoff = cutoff;
        m.shape = shape;
        m.reference_frequency = reference_frequency;
        m.validate();
        return m;
    }

    static SpectralModel tabulated(std::vector<SpectralPoint> rows) {
        SpectralModel m;
        m.kind = SpectrumKind::tabulated;
        m.table = std::move(rows);
        m.cutoff = m.table.empty() ? 1.0 : m.table.back().omega;
        m.validate();
        return m;
    }

    static SpectralModel uncoupled(double cutoff = 1.0) {
        return ohmic(0.0, cutoff, CutoffShape::exponential);
    }

    bool is_uncoupled() const noexcept {
        if (kind == SpectrumKind::tabulated)
            return std::all_of(table.begin(), table.end(),
                                [](const SpectralPoint& p) { return p.coupling_sq == 0.0; });
        return gamma == 0.0;
    }

    void validate() const {
        detail::require(std::isfinite(cutoff) && cutoff > 0, "cutoff frequency must be positive");
        if (kind == SpectrumKind::tabulated) {
            detail::require(table.size() >= 2, "tabulated spectrum needs at least two rows");
            for (std::size_t i = 0; i < table.size(); ++i) {
                detail::require(std::isfinite(table[i].omega) && table[i].omega >= 0,
                                "tabulated frequencies must be finite and non-negative");
                detail::require(std::isfinite(table[i].coupling_sq) && table[i].coupling_sq >= 0,
                                "tabulated couplings must be finite and non-negative");
                if (i > 0)
                    detail::require(table[i].omega > table[i - 1].omega,
                                    "tabulated frequencies must be strictly increasing");
            }
            return;
        }
        detail::require(std::isfinite(gamma) && gamma >= 0, "damping gamma must be non-negative");
        if (kind == SpectrumKind::supra_ohmic) {
            detail::require(std::isfinite(exponent) && exponent >= 1,
                            "supra-Ohmic exponent must be >= 1");
            detail::require(reference_frequency >= 0, "reference frequency must be non-negative");
        }
    }

    double cutoff_factor(double w) const noexcept {
        if (shape == CutoffShape::sharp) return w <= cutoff ? 1.0 : 0.0;
        return std::exp(-w / cutoff);
    }

    // g_w^2 for w >= 0.
    double coupling_sq(double w, const PhysicalParams& p) const {
        if (w < 0) return 0.0;
        switch (kind) {
        case SpectrumKind::ohmic:
            return 4.0 * p.mass * gamma / pi * cutoff_factor(w);
        case SpectrumKind::supra_ohmic: {
            const double ref = reference_frequency > 0 ? reference_frequency : p.omega;
            return 4.0 * p.mass * gamma / pi * std::pow(w / ref, exponent - 1.0) * cutoff_factor(w);
        }
        case SpectrumKind::tabulated:
            return interpolate_table(w);
        }
        return 0.0;
    }

    // Zero outside the tabulated range, piecewise linear inside.
    double interpolate_table(double w) const {
        if (table.empty() || w < table.front().omega || w > table.back().omega) return 0.0;
        auto hi = std::lower_bound(table.begin(), table.end(), w,
                                   [](const SpectralPoint& p, double x) { return p.omega < x; });
        if (hi == table.begin()) return hi->coupling_sq;
        auto lo = hi - 1;
        const double f = (w - lo->omega) / (hi->omega - lo->omega);
        return lo->coupling_sq + f * (hi->coupling_sq - lo->coupling_sq);
    }

    // Upper end of the frequency support used for continuum integrals.
    double support_end(const QuadratureOptions& opt = {}) const {
        if (kind == SpectrumKind::tabulated) return table.back().omega;
        return shape == CutoffShape::sharp ? cutoff : opt.exponential_span * cutoff;
    }
};

// Reads a two-column CSV (omega, g_w^2) with a mandatory header row.
inline SpectralModel load_spectrum_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open spectrum table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("spectrum table is empty: " + path);
    {
        std::istringstream header(line);
        double probe;
        char sep;
        if (header >> probe >> sep) throw ValidationError("spectrum table needs a header row: " + path);
    }
    std::vector<SpectralPoint> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        SpectralPoint p{};
        if (!(ss >> p.omega >> p.coupling_sq))
            throw ValidationError("malformed spectrum row: " + line);
        rows.push_back(p);
    }
    return SpectralModel::tabulated(std::move(rows));
}

enum class BetaKind { classical_constant, quantum_tanh };

// Per-frequency inverse temperature of the initial bath ensemble.
struct BetaSchedule {
    BetaKind kind{BetaKind::classical_constant};
    PhysicalParams params{};

    static BetaSchedule classical(const PhysicalParams& p) {
        BetaSchedule b{BetaKind::classical_constant, p};
        b.validate();
        return b;
    }
    static BetaSchedule quantum(const PhysicalParams& p) {
        BetaSchedule b{BetaKind::quantum_tanh, p};
        b.validate();
        return b;
    }

    void validate() const {
        params.validate();
        if (kind == BetaKind::classical_constant)
            detail::require(params.temperature > 0,
                            "classical beta schedule is undefined at zero temperature");
    }

    // 1/beta_w: the thermal energy per mode that sets the bath variances.
    double inverse(double w) const {
        const double kT = params.kT();
        if (kind == BetaKind::classical_constant) {
            if (!(kT > 0)) throw ValidationError("classical beta schedule is undefined at T = 0");
            return kT;
        }
        const double half_quantum = 0.5 * params.hbar * std::abs(w);
        if (kT == 0.0) return half_quantum;
        const double x = half_quantum / kT;
        if (x < 1e-4) return kT * (1.0 + x * x / 3.0);
        return half_quantum / std::tanh(x);
    }

    double beta(double w) const { return 1.0 / inverse(w); }
};

namespace detail {

// int_0^inf g_w^2 h(w) cos(w t) dw over the model support.
template <class H>
double spectral_integral(const SpectralModel& model, const PhysicalParams& p, double t, const H& h,
                         const QuadratureOptions& opt) {
    if (model.is_uncoupled()) return 0.0;
    auto integrand = [&](double w) { return model.coupling_sq(w, p) * h(w) * std::cos(w * t); };
    if (model.kind == SpectrumKind::tabulated) {
        if (model.table.back().coupling_sq > 1e-8 * std::max_element(model.table.begin(), model.table.end(),
                                                                      [](const auto& a, const auto& b) {
                                                                          return a.coupling_sq < b.coupling_sq;
                                                                      })->coupling_sq)
            throw DivergentIntegral("tabulated spectrum has a non-decaying tail");
        double total = 0.0;
        QuadratureOptions local = opt;
        local.abs_tol = opt.abs_tol / static_cast<double>(model.table.size());
        local.base_panels = 1;
        for (std::size_t i = 1; i < model.table.size(); ++i)
            total += integrate(integrand, model.table[i - 1].omega, model.table[i].omega, local, t);
        return total;
    }
    return integrate(integrand, 0.0, model.support_end(opt), opt, t);
}

} // namespace detail

// K(t) = (1/m) int_0^inf g_w^2 cos(wt) dw.
inline double kernel_at(const SpectralModel& model, const PhysicalParams& p, double t,
                        const QuadratureOptions& opt = {}) {
    if (!std::isfinite(t)) throw ValidationError("kernel_at: time must be finite");
    return detail::spectral_integral(model, p, t, [](double) { return 1.0; }, opt) / p.mass;
}

// nu(t) = int_0^inf g_w^2 / beta_w cos(wt) dw.
inline double noise_correlation_at(const SpectralModel& model, const BetaSchedule& beta, double t,
                                   const QuadratureOptions& opt = {}) {
    if (!std::isfinite(t)) throw ValidationError("noise_correlation_at: time must be finite");
    beta.validate();
    return detail::spectral_integral(model, beta.params, t,
                                     [&](double w) { return beta.inverse(w); }, opt);
}

// int_0^t_max nu(t) dt on geometrically growing panels starting at 1/Lambda.
inline double noise_time_integral(const SpectralModel& model, const BetaSchedule& beta, double t_max,
                                  const QuadratureOptions& opt = {}) {
    if (!(t_max > 0) || !std::isfinite(t_max)) throw ValidationError("noise_time_integral: t_max must be positive");
    if (model.is_uncoupled()) return 0.0;
    const double scale = model.kind == SpectrumKind::tabulated ? 1.0 / model.table.back().omega : 1.0 / model.cutoff;
    auto nu = [&](double t) { return noise_correlation_at(model, beta, t, opt); };
    QuadratureOptions outer = opt;
    outer.base_panels = 2;
    outer.abs_tol = 1e-9 * std::abs(nu(0.0)) * scale;
    double total = 0.0, lo = 0.0, hi = std::min(scale, t_max);
    while (lo < t_max) {
        total += integrate(nu, lo, hi, outer);
        lo = hi;
        hi = std::min(2.0 * hi, t_max);
    }
    return total;
}

// Adiabatic mass shift int_0^inf g_w^2 / w^2 dw.
inline double renormalized_mass(const SpectralModel& model, const PhysicalParams& p,
                                 const QuadratureOptions& opt = {}) {
    if (model.is_uncoupled()) return 0.0;
    switch (model.kind) {
    case SpectrumKind::ohmic:
        throw DivergentIntegral("renormalized mass diverges for an Ohmic spectrum (g^2/w^2 at w -> 0)");
    case SpectrumKind::supra_ohmic: {
        const double s = model.exponent;
        if (s <= 2.0)
            throw DivergentIntegral("renormalized mass diverges for supra-Ohmic exponent s <= 2");
        // w = x^(1/(s-2)) turns w^(s-3) dw into dx/(s-2).
        const double ref = model.reference_frequency > 0 ? model.reference_frequency : p.omega;
        const double prefactor = 4.0 * p.mass * model.gamma / pi / std::pow(ref, s - 1.0) / (s - 2.0);
        auto integrand = [&](double x) { return model.cutoff_factor(std::pow(x, 1.0 / (s - 2.0))); };
        const double upper = std::pow(model.support_end(opt), s - 2.0);
        // Panels scaled to the mapped cutoff keep the quadrature resolution
        // independent of how strongly the substitution stretches the axis.
        QuadratureOptions local = opt;
        local.abs_tol = opt.abs_tol / std::max(prefactor, 1e-300);
        local.base_panels = std::max(opt.base_panels, 64);
        return prefactor * integrate(integrand, 0.0, upper, local);
    }
    case SpectrumKind::tabulated: {
        const auto& tab = model.table;
        if (tab.front().omega == 0.0 && (tab[0].coupling_sq > 0 || tab[1].coupling_sq > 0))
            throw DivergentIntegral("renormalized mass diverges: tabulated g^2 does not vanish near w = 0");
        double total = 0.0;
        for (std::size_t i = 1; i < tab.size(); ++i) {
            const double lo = tab[i - 1].omega;
            const double hi = tab[i].omega;
            total += integrate([&](double w) { return model.coupling_sq(w, p) / (w * w); }, lo, hi, opt);
        }
        return total;
    }
    }
    return 0.0;
}

// Supra-Ohmic model whose adiabatic mass shift equals delta_mass.
inline SpectralModel supra_ohmic_with_mass_shift(double exponent, double cutoff, double delta_mass,
                                                 const PhysicalParams& p,
                                                 CutoffShape shape = CutoffShape::exponential,
                                                 double reference_frequency = 0.0) {
    auto unit = SpectralModel::supra_ohmic(exponent, 1.0, cutoff, shape, reference_frequency);
    const double per_gamma = renormalized_mass(unit, p);
    unit.gamma = delta_mass / per_gamma;
    return unit;
}

// K(t) in closed form where the frequency integral is elementary: Ohmic with
// either cutoff, and supra-Ohmic with integer exponent and exponential cutoff,
// int_0^inf w^n e^{-w/L} cos(wt) dw = n! Re (1/L - i t)^-(n+1).
inline std::optional<double> closed_form_kernel(const SpectralModel& model, const PhysicalParams& p, double t) {
    if (model.is_uncoupled()) return 0.0;
    const double pref = 4.0 * model.gamma / pi;
    const double lam = model.cutoff;
    if (model.kind == SpectrumKind::ohmic) {
        if (model.shape == CutoffShape::exponential) return pref * lam / (1.0 + lam * lam * t * t);
        const double x = lam * t;
        return std::abs(x) < 1e-4 ? pref * lam * (1.0 - x * x / 6.0) : pref * std::sin(x) / t;
    }
    if (model.kind == SpectrumKind::supra_ohmic && model.shape == CutoffShape::exponential) {
        const double n = model.exponent - 1.0;
        if (n != std::floor(n) || n > 12) return std::nullopt;
        const double ref = model.reference_frequency > 0 ? model.reference_frequency : p.omega;
        const std::complex<double> z(1.0 / lam, -t);
        const double laplace = std::tgamma(n + 1.0) * std::real(std::pow(z, -(n + 1.0)));
        return pref / std::pow(ref, n) * laplace;
    }
    return std::nullopt;
}

// Evaluator for the memory kernel with fixed quadrature settings.
class MemoryKernel {
public:
    MemoryKernel(SpectralModel model, PhysicalParams params, QuadratureOptions opt = {})
        : model_(std::move(model)), params_(params), opt_(opt) {
        model_.validate();
        params_.validate();
    }

    double operator()(double t) const { return kernel_at(model_, params_, t, opt_); }

    std::vector<double> tabulate(const std::vector<double>& times) const {
        std::vector<double> out(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) out[i] = (*this)(times[i]);
        return out;
    }

    const SpectralModel& model() const noexcept { return model_; }
    const PhysicalParams& params() const noexcept { return params_; }

private:
    SpectralModel model_;
    PhysicalParams params_;
    QuadratureOptions opt_;
};

} // namespace qbm
