#pragma once
/// @file thermo.hpp
/// @brief Constitutive relations of a heat-conducting gas with radiation:
/// pressure, internal energy, entropy, transport coefficients, their
/// artificial-pressure/conductivity regularization and consistency audits.
///
/// The molecular part is generated by a structural profile P(Z), Z = rho / theta^{3/2}:
///
///     p_M = theta^{5/2} P(Z),   e_M = 3/2 p_M / rho,   s_M = S(Z),
///
/// with P(Z) = Z + p_inf Z^{5/3} (ideal monatomic gas plus a cold pressure) and
/// S(Z) = -ln Z + s_gauge, so that S'(Z) = -3/2 (5/3 P - Z P') / Z^2.

#include "nsf/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nsf {

struct GasModel {
    double a = 1.0;       ///< radiation constant
    double p_inf = 1.0;   ///< lim P(Z)/Z^{5/3}
    double delta = 0.1;   ///< artificial pressure / conductivity weight
    double beta = 8.0;    ///< artificial pressure exponent
    double mu0 = 1.0;     ///< shear viscosity scale, mu = mu0 (1 + theta)
    double eta0 = 0.5;    ///< bulk viscosity scale, eta = eta0 (1 + theta)
    double kappa0 = 1.0;  ///< conductivity scale, kappa = kappa0 (1 + theta^3)
    double s_gauge = 0.0; ///< additive entropy constant, S(1) = s_gauge
};

namespace detail {

inline void require_finite_positive(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0)
        throw DomainError(std::string(what) + " must be finite and > 0, got " + std::to_string(v));
}

inline void require_finite_nonnegative(double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0)
        throw DomainError(std::string(what) + " must be finite and >= 0, got " + std::to_string(v));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Structural profile

inline double structural_P(const GasModel& gas, double z) {
    if (z == 0.0) return 0.0;
    return z + gas.p_inf * std::pow(z, 5.0 / 3.0);
}

inline double structural_dP(const GasModel& gas, double z) {
    return 1.0 + (5.0 / 3.0) * gas.p_inf * std::pow(z, 2.0 / 3.0);
}

/// (5/3) P(Z) - Z P'(Z) in closed form; the p_inf Z^{5/3} part cancels identically.
inline double structural_virial(const GasModel&, double z) { return (2.0 / 3.0) * z; }

inline double structural_S(const GasModel& gas, double z) { return -std::log(z) + gas.s_gauge; }

inline double structural_dS(const GasModel&, double z) { return -1.0 / z; }

// ---------------------------------------------------------------------------
// Pressure, energy, entropy

/// Molecular pressure theta^{5/2} P(rho theta^{-3/2}).
inline double pressure_molecular(const GasModel& gas, double rho, double theta) {
    detail::require_finite_nonnegative(rho, "density");
    detail::require_finite_positive(theta, "temperature");
    if (rho == 0.0) return 0.0;
    return std::pow(theta, 2.5) * structural_P(gas, rho * std::pow(theta, -1.5));
}

inline double pressure(const GasModel& gas, double rho, double theta) {
    return pressure_molecular(gas, rho, theta) + gas.a / 3.0 * std::pow(theta, 4);
}

/// delta (rho^2 + rho^beta), the artificial pressure.
inline double pressure_artificial(const GasModel& gas, double rho) {
    return gas.delta * (rho * rho + std::pow(rho, gas.beta));
}

inline double pressure_reg(const GasModel& gas, double rho, double theta) {
    return pressure(gas, rho, theta) + pressure_artificial(gas, rho);
}

inline double internal_energy_molecular(const GasModel& gas, double rho, double theta) {
    detail::require_finite_positive(rho, "density");
    return 1.5 * pressure_molecular(gas, rho, theta) / rho;
}

inline double internal_energy(const GasModel& gas, double rho, double theta) {
    return internal_energy_molecular(gas, rho, theta) + gas.a * std::pow(theta, 4) / rho;
}

inline double internal_energy_reg(const GasModel& gas, double rho, double theta) {
    return internal_energy(gas, rho, theta) + gas.delta * theta;
}

inline double entropy_molecular(const GasModel& gas, double rho, double theta) {
    detail::require_finite_positive(rho, "density");
    detail::require_finite_positive(theta, "temperature");
    return structural_S(gas, rho * std::pow(theta, -1.5));
}

inline double entropy(const GasModel& gas, double rho, double theta) {
    return entropy_molecular(gas, rho, theta) + 4.0 * gas.a / 3.0 * std::pow(theta, 3) / rho;
}

inline double entropy_reg(const GasModel& gas, double rho, double theta) {
    return entropy(gas, rho, theta) + gas.delta * std::log(theta);
}

// Closed-form partial derivatives used by the solvers. The Gibbs audit below
// deliberately does not use them.

inline double dpressure_drho(const GasModel& gas, double rho, double theta) {
    const double z = rho * std::pow(theta, -1.5);
    return theta * structural_dP(gas, z);
}

inline double dpressure_dtheta(const GasModel& gas, double rho, double theta) {
    const double z = rho * std::pow(theta, -1.5);
    const double pm = std::pow(theta, 1.5) * (2.5 * structural_P(gas, z) - 1.5 * z * structural_dP(gas, z));
    return pm + 4.0 * gas.a / 3.0 * std::pow(theta, 3);
}

/// d(rho e_delta)/d theta at fixed rho; the heat capacity per unit volume.
inline double denergy_density_dtheta(const GasModel& gas, double rho, double theta) {
    const double z = rho * std::pow(theta, -1.5);
    const double d_pm = std::pow(theta, 1.5) * (2.5 * structural_P(gas, z) - 1.5 * z * structural_dP(gas, z));
    return 1.5 * d_pm + 4.0 * gas.a * std::pow(theta, 3) + gas.delta * rho;
}

/// d e_M / d rho.
inline double denergy_molecular_drho(const GasModel& gas, double rho, double theta) {
    const double z = rho * std::pow(theta, -1.5);
    return 1.5 * theta * structural_dP(gas, z) / rho - internal_energy_molecular(gas, rho, theta) / rho;
}

struct ThermoEval {
    double p, p_M, e, e_M, s, s_M;
    double dp_drho, dp_dtheta, de_dtheta;
};

inline ThermoEval evaluate(const GasModel& gas, double rho, double theta) {
    ThermoEval out{};
    out.p_M = pressure_molecular(gas, rho, theta);
    out.p = out.p_M + gas.a / 3.0 * std::pow(theta, 4);
    out.e_M = internal_energy_molecular(gas, rho, theta);
    out.e = out.e_M + gas.a * std::pow(theta, 4) / rho;
    out.s_M = entropy_molecular(gas, rho, theta);
    out.s = out.s_M + 4.0 * gas.a / 3.0 * std::pow(theta, 3) / rho;
    out.dp_drho = dpressure_drho(gas, rho, theta);
    out.dp_dtheta = dpressure_dtheta(gas, rho, theta);
    out.de_dtheta = (denergy_density_dtheta(gas, rho, theta) - gas.delta * rho) / rho;
    return out;
}

// ---------------------------------------------------------------------------
// Artificial pressure potential b(rho) = delta (rho^beta / (beta - 1) + rho^2).
// rho b'(rho) - b(rho) is the artificial pressure, b'' = delta (beta rho^{beta-2} + 2).

inline double artificial_potential(const GasModel& gas, double rho) {
    return gas.delta * (std::pow(rho, gas.beta) / (gas.beta - 1.0) + rho * rho);
}

inline double artificial_potential_d1(const GasModel& gas, double rho) {
    return gas.delta * (gas.beta / (gas.beta - 1.0) * std::pow(rho, gas.beta - 1.0) + 2.0 * rho);
}

inline double artificial_potential_d2(const GasModel& gas, double rho) {
    return gas.delta * (gas.beta * std::pow(rho, gas.beta - 2.0) + 2.0);
}

// ---------------------------------------------------------------------------
// Transport

struct TransportCoeffs {
    double mu;
    double eta;
    double kappa;
    double kappa_delta;
};

inline TransportCoeffs transport_coeffs(const GasModel& gas, double theta) {
    detail::require_finite_positive(theta, "temperature");
    TransportCoeffs c{};
    c.mu = gas.mu0 * (1.0 + theta);
    c.eta = gas.eta0 * (1.0 + theta);
    c.kappa = gas.kappa0 * (1.0 + theta * theta * theta);
    c.kappa_delta = c.kappa + gas.delta * (std::pow(theta, gas.beta) + 1.0 / theta);
    return c;
}

/// One-dimensional Newtonian stress modulus: S(theta, u_x) = (4 mu / 3 + eta) u_x.
inline double stress_modulus(const GasModel& gas, double theta) {
    const auto c = transport_coeffs(gas, theta);
    return 4.0 * c.mu / 3.0 + c.eta;
}

/// Antiderivative of kappa_delta with base point theta = 1.
inline double kirchhoff(const GasModel& gas, double theta) {
    detail::require_finite_positive(theta, "temperature");
    const double t4 = theta * theta * theta * theta;
    double k = gas.kappa0 * ((theta - 1.0) + (t4 - 1.0) / 4.0);
    if (gas.delta != 0.0)
        k += gas.delta * ((std::pow(theta, gas.beta + 1.0) - 1.0) / (gas.beta + 1.0) + std::log(theta));
    return k;
}

inline double kirchhoff_inverse(const GasModel& gas, double k) {
    if (!std::isfinite(k)) throw DomainError("kirchhoff_inverse: non-finite argument");
    auto f = [&](double t) { return kirchhoff(gas, t) - k; };
    double lo = 1.0, hi = 1.0;
    while (f(lo) > 0.0) {
        lo *= 0.5;
        if (lo < 1e-300) throw DomainError("kirchhoff_inverse: value below range of K_delta");
    }
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (hi > 1e150) throw DomainError("kirchhoff_inverse: value above range of K_delta");
    }
    std::uintmax_t max_iter = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Ballistic free energy

inline double ballistic_free_energy(const GasModel& gas, double rho, double theta, double Theta) {
    return rho * (internal_energy(gas, rho, theta) - Theta * entropy(gas, rho, theta));
}

inline double ballistic_free_energy_reg(const GasModel& gas, double rho, double theta, double Theta) {
    return rho * (internal_energy_reg(gas, rho, theta) - Theta * entropy_reg(gas, rho, theta));
}

/// d/d rho of H_{delta,Theta}(rho, theta).
inline double ballistic_free_energy_reg_drho(const GasModel& gas, double rho, double theta, double Theta) {
    // d(rho e_delta)/d rho = e_M + rho de_M/drho + delta theta (radiation part of rho e is rho-independent)
    const double d_rho_e = internal_energy_molecular(gas, rho, theta) + rho * denergy_molecular_drho(gas, rho, theta) +
                           gas.delta * theta;
    // d(rho s_delta)/d rho = s_M + rho ds_M/drho + delta ln theta, with rho ds_M/drho = Z S'(Z)
    const double z = rho * std::pow(theta, -1.5);
    const double d_rho_s = entropy_molecular(gas, rho, theta) + z * structural_dS(gas, z) + gas.delta * std::log(theta);
    return d_rho_e - Theta * d_rho_s;
}

// ---------------------------------------------------------------------------
// Gibbs audit

template <class Model>
concept ThermoModel = requires(const Model& m, double r, double t) {
    { m.pressure(r, t) } -> std::convertible_to<double>;
    { m.internal_energy(r, t) } -> std::convertible_to<double>;
    { m.entropy(r, t) } -> std::convertible_to<double>;
};

/// Adapter exposing the (optionally regularized) default gas through ThermoModel.
struct GasThermo {
    GasModel gas;
    bool regularized = false;

    double pressure(double r, double t) const { return nsf::pressure(gas, r, t); }
    double internal_energy(double r, double t) const {
        return regularized ? internal_energy_reg(gas, r, t) : nsf::internal_energy(gas, r, t);
    }
    double entropy(double r, double t) const { return regularized ? entropy_reg(gas, r, t) : nsf::entropy(gas, r, t); }
};

struct GibbsResidual {
    double r1; ///< theta ds/dtheta - de/dtheta
    double r2; ///< theta ds/drho - de/drho + p / rho^2
};

/// Central-difference check of theta Ds = De + p D(1/rho).
template <ThermoModel Model>
GibbsResidual gibbs_residual(const Model& model, double rho, double theta, double fd_step) {
    detail::require_finite_positive(rho, "density");
    detail::require_finite_positive(theta, "temperature");
    detail::require_finite_positive(fd_step, "fd_step");
    const double ht = fd_step * std::max(1.0, theta);
    const double hr = fd_step * std::max(1.0, rho);
    if (ht >= theta || hr >= rho) throw ArgumentError("gibbs_residual: fd_step not small relative to arguments");
    // central differences at h and h/2 combined by Richardson extrapolation; the plain
    // second-order stencil leaves ~1e-5 truncation error at low density and high temperature
    auto d = [](auto&& f, double x, double h) {
        const double c1 = (f(x + h) - f(x - h)) / (2.0 * h);
        const double c2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
        return (4.0 * c2 - c1) / 3.0;
    };
    const double ds_dt = d([&](double t) { return model.entropy(rho, t); }, theta, ht);
    const double de_dt = d([&](double t) { return model.internal_energy(rho, t); }, theta, ht);
    const double ds_dr = d([&](double r) { return model.entropy(r, theta); }, rho, hr);
    const double de_dr = d([&](double r) { return model.internal_energy(r, theta); }, rho, hr);
    const double p = model.pressure(rho, theta);
    return {theta * ds_dt - de_dt, theta * ds_dr - de_dr + p / (rho * rho)};
}

// ---------------------------------------------------------------------------
// Hypothesis validation

struct HypothesisReport {
    // structural profile on the Z grid
    double P_at_zero = 0.0;
    double dP_min = 0.0, dP_max = 0.0;
    double md7_min = 0.0, md7_max = 0.0;
    double md7_bound = 2.0; ///< c in 0 < md7 < c
    double dS_max = 0.0;    ///< S'(Z) must stay negative
    double z_max = 0.0;
    double p_ratio_at_zmax = 0.0; ///< P(Z_max) / Z_max^{5/3}
    // transport bounds on the theta grid: ratios against the linear/cubic envelopes
    double mu_ratio_min = 0.0, mu_ratio_max = 0.0;
    double eta_ratio_min = 0.0, eta_ratio_max = 0.0;
    double kappa_ratio_min = 0.0, kappa_ratio_max = 0.0;
    double visc_slope_max = 0.0; ///< sup |mu'| + |eta'|
    double mu_lower = 0.0, mu_upper = 0.0, eta_upper = 0.0, kappa_lower = 0.0, kappa_upper = 0.0, slope_bound = 0.0;
    // coercivity of H_{delta,Theta}
    double nhelm_min = 0.0;

    bool structural_ok = false;
    bool md7_ok = false;
    bool entropy_slope_ok = false;
    bool asymptotic_ok = false;
    bool mu_ok = false;
    bool eta_ok = false;
    bool kappa_ok = false;
    bool slope_ok = false;
    bool nhelm_ok = false;

    [[nodiscard]] bool all_pass() const {
        return structural_ok && md7_ok && entropy_slope_ok && asymptotic_ok && mu_ok && eta_ok && kappa_ok &&
               slope_ok && nhelm_ok;
    }
};

/// Left-hand side minus right-hand side of the coercivity estimate
///   H_{d,T}(rho,theta) >= 1/4 (rho e_d + T rho |s|) - |(rho - rb) dH_{d,2T}/drho(rb,2T) + H_{d,2T}(rb,2T)|.
inline double coercivity_residual(const GasModel& gas, double rho, double theta, double Theta, double rho_bar) {
    const double lhs = ballistic_free_energy_reg(gas, rho, theta, Theta);
    const double quarter =
        0.25 * (rho * internal_energy_reg(gas, rho, theta) + Theta * rho * std::abs(entropy(gas, rho, theta)));
    const double tangent = (rho - rho_bar) * ballistic_free_energy_reg_drho(gas, rho_bar, 2.0 * Theta, 2.0 * Theta) +
                           ballistic_free_energy_reg(gas, rho_bar, 2.0 * Theta, 2.0 * Theta);
    return lhs - quarter + std::abs(tangent);
}

inline HypothesisReport validate_hypotheses(const GasModel& gas, std::span<const double> z_grid,
                                            std::span<const double> theta_grid,
                                            std::span<const double> Theta_set = {},
                                            std::span<const double> rho_bar_set = {}) {
    if (z_grid.empty() || theta_grid.empty()) throw ArgumentError("validate_hypotheses: empty grid");
    HypothesisReport r;
    constexpr double inf = std::numeric_limits<double>::infinity();

    r.P_at_zero = structural_P(gas, 0.0);
    r.dP_min = structural_dP(gas, 0.0);
    r.dP_max = r.dP_min;
    r.md7_min = inf;
    r.md7_max = -inf;
    r.dS_max = -inf;
    r.z_max = 0.0;
    for (double z : z_grid) {
        if (!(z > 0.0)) throw ArgumentError("validate_hypotheses: Z samples must be positive");
        const double P = structural_P(gas, z);
        const double dP = structural_dP(gas, z);
        r.dP_min = std::min(r.dP_min, dP);
        r.dP_max = std::max(r.dP_max, dP);
        const double md7 = 1.5 * structural_virial(gas, z) / z;
        r.md7_min = std::min(r.md7_min, md7);
        r.md7_max = std::max(r.md7_max, md7);
        r.dS_max = std::max(r.dS_max, structural_dS(gas, z));
        r.z_max = std::max(r.z_max, z);
    }
    r.p_ratio_at_zmax = structural_P(gas, r.z_max) / std::pow(r.z_max, 5.0 / 3.0);

    r.mu_lower = r.mu_upper = gas.mu0;
    r.eta_upper = gas.eta0;
    r.kappa_lower = r.kappa_upper = gas.kappa0;
    r.slope_bound = gas.mu0 + gas.eta0;
    r.mu_ratio_min = r.eta_ratio_min = r.kappa_ratio_min = inf;
    r.mu_ratio_max = r.eta_ratio_max = r.kappa_ratio_max = -inf;
    r.visc_slope_max = 0.0;
    for (double t : theta_grid) {
        const auto c = transport_coeffs(gas, t);
        const double mr = c.mu / (1.0 + t), er = c.eta / (1.0 + t), kr = c.kappa / (1.0 + t * t * t);
        r.mu_ratio_min = std::min(r.mu_ratio_min, mr);
        r.mu_ratio_max = std::max(r.mu_ratio_max, mr);
        r.eta_ratio_min = std::min(r.eta_ratio_min, er);
        r.eta_ratio_max = std::max(r.eta_ratio_max, er);
        r.kappa_ratio_min = std::min(r.kappa_ratio_min, kr);
        r.kappa_ratio_max = std::max(r.kappa_ratio_max, kr);
        const double hd = 1e-6 * std::max(1.0, t);
        const double lo = std::max(t - hd, 0.5 * t);
        const auto cp = transport_coeffs(gas, t + hd);
        const auto cm = transport_coeffs(gas, lo);
        const double slope = std::abs(cp.mu - cm.mu) / (t + hd - lo) + std::abs(cp.eta - cm.eta) / (t + hd - lo);
        r.visc_slope_max = std::max(r.visc_slope_max, slope);
    }

    const double tol = 1e-12;
    r.structural_ok = r.P_at_zero == 0.0 && r.dP_min > 0.0;
    r.md7_ok = r.md7_min > 0.0 && r.md7_max < r.md7_bound;
    r.entropy_slope_ok = r.dS_max < 0.0;
    r.asymptotic_ok = gas.p_inf > 0.0 && std::abs(r.p_ratio_at_zmax - gas.p_inf) <= 1e-2 * gas.p_inf;
    r.mu_ok = r.mu_lower > 0.0 && r.mu_ratio_min >= r.mu_lower * (1.0 - tol) && r.mu_ratio_max <= r.mu_upper * (1.0 + tol);
    r.eta_ok = r.eta_ratio_min >= 0.0 && r.eta_ratio_max <= r.eta_upper * (1.0 + tol);
    r.kappa_ok = r.kappa_lower > 0.0 && r.kappa_ratio_min >= r.kappa_lower * (1.0 - tol) &&
                 r.kappa_ratio_max <= r.kappa_upper * (1.0 + tol);
    r.slope_ok = r.visc_slope_max <= r.slope_bound * (1.0 + 1e-6);

    static constexpr double default_Theta[] = {0.5, 1.0, 2.0};
    static constexpr double default_rho_bar[] = {0.5, 1.0, 2.0};
    if (Theta_set.empty()) Theta_set = default_Theta;
    if (rho_bar_set.empty()) rho_bar_set = default_rho_bar;
    // Coercivity is checked on the (rho, theta) product of the theta grid with itself.
    r.nhelm_min = inf;
    for (double Th : Theta_set)
        for (double rb : rho_bar_set)
            for (double rho : theta_grid)
                for (double t : theta_grid) r.nhelm_min = std::min(r.nhelm_min, coercivity_residual(gas, rho, t, Th, rb));
    r.nhelm_ok = r.nhelm_min >= 0.0;
    return r;
}

} // namespace nsf
