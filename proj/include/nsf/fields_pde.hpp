#pragma once
// Pathwise parabolic sub-solvers for density and temperature with the
// velocity frozen over one time step.
//
// Continuity: upwind convection (explicit) then backward Euler for eps * Laplacian.
// Energy: backward Euler in rho e_delta with Kirchhoff diffusion, implicit
// delta/theta^2 - eps theta^5, everything else explicit. The explicit sources
// mirror, term by term, the kinetic-energy losses of the momentum drift
// assembled in stepper.hpp so the discrete total energy closes.

#include "nsf/errors.hpp"
#include "nsf/grid.hpp"
#include "nsf/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace nsf {

/// Velocity data frozen at the left end of a step.
struct FrozenVelocity {
    std::vector<double> u;        ///< nodal u (no cut-off)
    std::vector<double> ux;       ///< analytic du/dx at nodes (no cut-off)
    std::vector<double> u_face;   ///< analytic u at face midpoints (no cut-off)
    std::vector<double> U_face;   ///< chi * u_face, the transporting velocity [u]_R
    double chi = 1.0;             ///< cut-off factor chi(|u| - R)

    static FrozenVelocity zero(const Grid& g) {
        FrozenVelocity fv;
        fv.u.assign(g.nodes(), 0.0);
        fv.ux.assign(g.nodes(), 0.0);
        fv.u_face.assign(g.cells(), 0.0);
        fv.U_face.assign(g.cells(), 0.0);
        return fv;
    }
};

inline std::vector<double> upwind(std::span<const double> q, std::span<const double> U) {
    std::vector<double> out(U.size());
    for (std::size_t f = 0; f < U.size(); ++f) out[f] = U[f] >= 0.0 ? q[f] : q[f + 1];
    return out;
}

/// Largest outflow Courant number h * (outgoing face speeds) / w_i over the nodes.
inline double courant_number(const Grid& g, std::span<const double> U, double h) {
    double c = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
        double out = 0.0;
        if (i < g.cells()) out += std::max(U[i], 0.0);
        if (i > 0) out += std::max(-U[i - 1], 0.0);
        c = std::max(c, h * out / g.weights()[i]);
    }
    return c;
}

/// rho_t + (rho U)_x = eps rho_xx with zero-flux ends. U is given at the faces.
inline std::vector<double> continuity_step(const Grid& g, std::span<const double> rho_n, std::span<const double> U,
                                           double h, double eps) {
    if (!(h > 0.0)) throw ArgumentError("continuity_step: step must be positive");
    if (!(eps >= 0.0)) throw ArgumentError("continuity_step: eps must be nonnegative");
    if (int(rho_n.size()) != g.nodes() || int(U.size()) != g.cells())
        throw ArgumentError("continuity_step: field sizes do not match the grid");
    const double cfl = courant_number(g, U, h);
    if (cfl > 1.0)
        throw StepSizeError("continuity_step: Courant number " + std::to_string(cfl) + " exceeds 1", cfl,
                            0.9 * h / cfl);

    std::vector<double> flux = upwind(rho_n, U);
    for (int f = 0; f < g.cells(); ++f) flux[f] *= U[f];
    const auto div = g.divergence(flux);

    const int n = g.nodes();
    const double k = h * eps / g.dx();
    std::vector<double> lo(n, 0.0), di(n), up(n, 0.0), rhs(n);
    for (int i = 0; i < n; ++i) {
        const double w = g.weights()[i];
        rhs[i] = w * (rho_n[i] - h * div[i]);
        di[i] = w;
        if (i > 0) {
            lo[i] = -k;
            di[i] += k;
        }
        if (i < n - 1) {
            up[i] = -k;
            di[i] += k;
        }
    }
    solve_tridiagonal(std::move(lo), std::move(di), std::move(up), rhs);
    return rhs;
}

// ---------------------------------------------------------------------------
// Energy

/// rho e_delta(rho, theta) without divisions.
inline double energy_density_reg(const GasModel& gas, double rho, double theta) {
    const double pm = rho * theta + gas.p_inf * std::pow(rho, 5.0 / 3.0);
    return 1.5 * pm + gas.a * theta * theta * theta * theta + gas.delta * rho * theta;
}

/// The explicit right-hand side of the internal energy equation, split by origin.
/// Face quantities are spread to nodes with Grid::faces_to_nodes.
struct EnergySources {
    std::vector<double> pressure_work; ///< -p div U
    std::vector<double> viscous;       ///< chi (4 mu / 3 + eta) u_x^2
    std::vector<double> art_pressure;  ///< eps G b'(rho') G rho'
    std::vector<double> eps_viscous;   ///< eps avg(rho') (G u)^2
    std::vector<double> heat;          ///< rho' H
    std::vector<double> total;
};

inline EnergySources energy_sources(const Grid& g, const GasModel& gas, double eps, std::span<const double> rho_n,
                                    std::span<const double> rho_next, std::span<const double> theta_n,
                                    const FrozenVelocity& fv, std::span<const double> heat) {
    const int n = g.nodes(), nf = g.cells();
    EnergySources s;
    const auto divU = g.divergence(fv.U_face);
    s.pressure_work.resize(n);
    s.viscous.resize(n);
    for (int i = 0; i < n; ++i) {
        s.pressure_work[i] = -pressure(gas, rho_n[i], theta_n[i]) * divU[i];
        s.viscous[i] = fv.chi * stress_modulus(gas, theta_n[i]) * fv.ux[i] * fv.ux[i];
    }
    std::vector<double> bp(n);
    for (int i = 0; i < n; ++i) bp[i] = artificial_potential_d1(gas, rho_next[i]);
    const auto gbp = g.gradient(bp);
    const auto grho = g.gradient(rho_next);
    const auto gu = g.gradient(fv.u);
    std::vector<double> fa(nf), fe(nf);
    for (int f = 0; f < nf; ++f) {
        fa[f] = eps * gbp[f] * grho[f];
        fe[f] = eps * 0.5 * (rho_next[f] + rho_next[f + 1]) * gu[f] * gu[f];
    }
    s.art_pressure = g.faces_to_nodes(fa);
    s.eps_viscous = g.faces_to_nodes(fe);
    s.heat.assign(n, 0.0);
    if (!heat.empty())
        for (int i = 0; i < n; ++i) s.heat[i] = rho_next[i] * heat[i];
    s.total.resize(n);
    for (int i = 0; i < n; ++i)
        s.total[i] = s.pressure_work[i] + s.viscous[i] + s.art_pressure[i] + s.eps_viscous[i] + s.heat[i];
    return s;
}

namespace detail {

inline void require_positive_fields(std::span<const double> rho_n, std::span<const double> rho_next,
                                    std::span<const double> theta_n) {
    for (std::size_t i = 0; i < rho_n.size(); ++i)
        if (!(rho_n[i] > 0.0) || !(rho_next[i] > 0.0) || !(theta_n[i] > 0.0) || !std::isfinite(theta_n[i]))
            throw StateError("energy_step: nonpositive density or temperature at node " + std::to_string(i));
}

} // namespace detail

struct EnergyParams {
    GasModel gas;
    double eps = 0.1;
    std::vector<double> heat; ///< H at the nodes; empty means no heat source
    double tol = 1e-10;
    int max_iter = 50;
};

struct EnergyStepResult {
    std::vector<double> theta;
    int iterations = 0;
    double residual = 0.0;
};

/// Backward-Euler internal energy update given precomputed explicit sources.
inline EnergyStepResult energy_step_with_sources(const Grid& g, std::span<const double> rho_n,
                                                 std::span<const double> rho_next, std::span<const double> theta_n,
                                                 std::span<const double> U, std::span<const double> sources, double h,
                                                 const EnergyParams& par) {
    const GasModel& gas = par.gas;
    const int n = g.nodes();
    const double dx = g.dx();
    const auto& w = g.weights();
    detail::require_positive_fields(rho_n, rho_next, theta_n);

    std::vector<double> E0(n);
    for (int i = 0; i < n; ++i) E0[i] = energy_density_reg(gas, rho_n[i], theta_n[i]);
    std::vector<double> flux = upwind(E0, U);
    for (int f = 0; f < g.cells(); ++f) flux[f] *= U[f];
    const auto div = g.divergence(flux);
    std::vector<double> A(n);
    for (int i = 0; i < n; ++i) A[i] = w[i] * (E0[i] - h * div[i] + h * sources[i]);

    std::vector<double> theta(theta_n.begin(), theta_n.end()), K(n), G(n);
    auto residual = [&](const std::vector<double>& th, std::vector<double>& out) {
        double r = 0.0;
        for (int i = 0; i < n; ++i) K[i] = kirchhoff(gas, th[i]);
        for (int i = 0; i < n; ++i) {
            double lap = 0.0;
            if (i > 0) lap -= (K[i] - K[i - 1]) / dx;
            if (i < n - 1) lap += (K[i + 1] - K[i]) / dx;
            const double t2 = th[i] * th[i];
            const double src = gas.delta / t2 - par.eps * t2 * t2 * th[i];
            out[i] = w[i] * energy_density_reg(gas, rho_next[i], th[i]) - A[i] - h * lap - h * w[i] * src;
            r = std::max(r, std::abs(out[i] / w[i]));
        }
        return r;
    };

    double r = residual(theta, G);
    int it = 0;
    std::vector<double> lo(n), di(n), up(n), step(n), trial(n), Gt(n);
    while (r > par.tol) {
        if (it >= par.max_iter)
            throw SolverError("energy_step: Newton did not converge, residual " + std::to_string(r), r, it);
        ++it;
        for (int i = 0; i < n; ++i) {
            const double th = theta[i];
            const double kd = transport_coeffs(gas, th).kappa_delta * h / dx;
            const double t3 = th * th * th;
            di[i] = w[i] * denergy_density_dtheta(gas, rho_next[i], th) +
                    h * w[i] * (2.0 * gas.delta / t3 + 5.0 * par.eps * t3 * th);
            if (i > 0) di[i] += kd;
            if (i < n - 1) di[i] += kd;
            // column i of the Jacobian holds kappa_delta(theta_i); rows i-1 and i+1 see it
            if (i > 0) up[i - 1] = -kd;
            if (i < n - 1) lo[i + 1] = -kd;
            step[i] = -G[i];
        }
        solve_tridiagonal(lo, di, up, step);
        double lambda = 1.0;
        double rt = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 30; ++k) {
            bool positive = true;
            for (int i = 0; i < n; ++i) {
                trial[i] = theta[i] + lambda * step[i];
                if (!(trial[i] > 0.0)) positive = false;
            }
            if (positive) {
                rt = residual(trial, Gt);
                if (rt < r || lambda < 1.0 / 64.0) break;
            }
            lambda *= 0.5;
        }
        if (!std::isfinite(rt)) throw SolverError("energy_step: damping failed to keep temperature positive", r, it);
        theta.swap(trial);
        G.swap(Gt);
        r = rt;
    }
    return {std::move(theta), it, r};
}

/// One internal-energy step; builds the explicit sources and solves the implicit system.
inline std::vector<double> energy_step(const Grid& g, std::span<const double> rho_n, std::span<const double> rho_next,
                                       std::span<const double> theta_n, const FrozenVelocity& fv, double h,
                                       const EnergyParams& par) {
    detail::require_positive_fields(rho_n, rho_next, theta_n);
    const auto src = energy_sources(g, par.gas, par.eps, rho_n, rho_next, theta_n, fv, par.heat);
    return energy_step_with_sources(g, rho_n, rho_next, theta_n, fv.U_face, src.total, h, par).theta;
}

// ---------------------------------------------------------------------------

/// min_n min rho(t_n) / (min rho_0 exp(-sum_{j<n} h |div U|_inf(t_j))).
/// div_sup[j] is the sup norm of the transporting velocity's divergence during step j.
inline double lower_bound_check(std::span<const std::vector<double>> rho_history, std::span<const double> div_sup,
                                double h) {
    if (rho_history.empty()) return 1.0;
    const double m0 = *std::min_element(rho_history[0].begin(), rho_history[0].end());
    double margin = std::numeric_limits<double>::infinity();
    double integral = 0.0;
    for (std::size_t n = 0; n < rho_history.size(); ++n) {
        if (n > 0) integral += h * div_sup[n - 1];
        const double mn = *std::min_element(rho_history[n].begin(), rho_history[n].end());
        margin = std::min(margin, mn / (m0 * std::exp(-integral)));
    }
    return margin;
}

/// Decay rate of the first Neumann cosine mode under the continuity solver with U = 0.
inline double neumann_mode_decay_rate(int cells, double L, double eps, double h, double t_end, double amp = 0.5) {
    Grid g(cells, L);
    std::vector<double> rho(g.nodes()), c(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) {
        c[i] = std::cos(std::numbers::pi * g.x()[i] / L);
        rho[i] = 1.0 + amp * c[i];
    }
    const std::vector<double> U(g.cells(), 0.0);
    const long steps = std::lround(t_end / h);
    for (long s = 0; s < steps; ++s) rho = continuity_step(g, rho, U, h, eps);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
        num += g.weights()[i] * rho[i] * c[i];
        den += g.weights()[i] * c[i] * c[i];
    }
    return -std::log(num / den / amp) / (steps * h);
}

} // namespace nsf
