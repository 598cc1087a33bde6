#pragma once
// Balance laws, entropy production, weak-form residuals and norm reports,
// evaluated with the same quadrature and the same realized increments the
// stepper used.

#include "nsf/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace nsf {

inline double kinetic_energy(const Scheme& s, const SimState& st) {
    const auto u = s.space().eval(st.u);
    double e = 0.0;
    for (int i = 0; i < s.grid().nodes(); ++i) e += s.grid().weights()[i] * st.rho[i] * u[i] * u[i];
    return 0.5 * e;
}

/// int 1/2 rho |u|^2 + rho e_delta + delta (rho^beta / (beta - 1) + rho^2).
inline double total_energy(const Scheme& s, const SimState& st) {
    const GasModel& gas = s.gas();
    const auto& g = s.grid();
    const auto u = s.space().eval(st.u);
    double e = 0.0;
    for (int i = 0; i < g.nodes(); ++i)
        e += g.weights()[i] * (0.5 * st.rho[i] * u[i] * u[i] + energy_density_reg(gas, st.rho[i], st.theta[i]) +
                               artificial_potential(gas, st.rho[i]));
    return e;
}

inline double total_mass(const Scheme& s, const SimState& st) { return s.grid().integrate(st.rho); }

/// int rho s_delta.
inline double entropy_functional(const Scheme& s, const SimState& st) {
    double e = 0.0;
    for (int i = 0; i < s.grid().nodes(); ++i)
        e += s.grid().weights()[i] * st.rho[i] * entropy_reg(s.gas(), st.rho[i], st.theta[i]);
    return e;
}

/// Deterministic sources of the energy balance over one step, taken at the
/// levels the stepper uses: theta^5, delta/theta^2 and rho H at the new state,
/// the damping at the old velocity.
inline double energy_sources_integral(const Scheme& s, const SimState& before, const SimState& after) {
    const auto& g = s.grid();
    const GasModel& gas = s.gas();
    const double eps = s.params().eps;
    double src = -before.u.squaredNorm() / s.params().m;
    for (int i = 0; i < g.nodes(); ++i) {
        const double th = after.theta[i], t2 = th * th;
        src += g.weights()[i] * (gas.delta / t2 - eps * t2 * t2 * th + after.rho[i] * s.heat()[i]);
    }
    return src;
}

/// Delta E + h [ (1/m) |u|^2 + eps int theta^5 ] - h [ int delta/theta^2 + int rho H ] - Ito - stochastic.
inline double energy_balance_residual(const Scheme& s, const SimState& before, const SimState& after,
                                      const StepRecord& rec) {
    return total_energy(s, after) - total_energy(s, before) - rec.h * energy_sources_integral(s, before, after) -
           rec.ito - rec.stoch;
}

/// Summands of the entropy production. Gradient terms live on faces, the rest on nodes.
struct EntropyProduction {
    std::vector<double> viscous;      ///< chi S:grad u / theta (nodes)
    std::vector<double> conduction;   ///< kappa_delta |grad theta|^2 / theta^2 (faces)
    std::vector<double> delta_source; ///< delta / theta^3 (nodes)
    std::vector<double> art_pressure; ///< eps delta (beta rho^{beta-2} + 2) |grad rho|^2 / theta (faces)
    std::vector<double> mol_pressure; ///< eps dp_M/drho |grad rho|^2 / (rho theta) (faces)
    std::vector<double> eps_viscous;  ///< eps rho |grad u|^2 / theta (faces)
    double integral = 0.0;

    [[nodiscard]] double min_summand() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto* v : {&viscous, &conduction, &delta_source, &art_pressure, &mol_pressure, &eps_viscous})
            for (double x : *v) m = std::min(m, x);
        return m;
    }
};

inline EntropyProduction entropy_production(const Scheme& s, const SimState& st) {
    const auto& g = s.grid();
    const GasModel& gas = s.gas();
    const double eps = s.params().eps;
    const auto fv = freeze(s, st.u);
    const int n = g.nodes(), nf = g.cells();
    EntropyProduction ep;
    ep.viscous.resize(n);
    ep.delta_source.resize(n);
    for (int i = 0; i < n; ++i) {
        const double th = st.theta[i];
        ep.viscous[i] = fv.chi * stress_modulus(gas, th) * fv.ux[i] * fv.ux[i] / th;
        ep.delta_source[i] = gas.delta / (th * th * th);
    }
    const auto gt = g.gradient(st.theta), gr = g.gradient(st.rho), gu = g.gradient(fv.u);
    ep.conduction.resize(nf);
    ep.art_pressure.resize(nf);
    ep.mol_pressure.resize(nf);
    ep.eps_viscous.resize(nf);
    for (int f = 0; f < nf; ++f) {
        const double th = 0.5 * (st.theta[f] + st.theta[f + 1]);
        const double r = 0.5 * (st.rho[f] + st.rho[f + 1]);
        ep.conduction[f] = transport_coeffs(gas, th).kappa_delta * gt[f] * gt[f] / (th * th);
        ep.art_pressure[f] = eps * artificial_potential_d2(gas, r) * gr[f] * gr[f] / th;
        ep.mol_pressure[f] = eps * dpressure_drho(gas, r, th) * gr[f] * gr[f] / (r * th);
        ep.eps_viscous[f] = eps * r * gu[f] * gu[f] / th;
    }
    double node_sum = 0.0, face_sum = 0.0;
    for (int i = 0; i < n; ++i) node_sum += g.weights()[i] * (ep.viscous[i] + ep.delta_source[i]);
    for (int f = 0; f < nf; ++f)
        face_sum += ep.conduction[f] + ep.art_pressure[f] + ep.mol_pressure[f] + ep.eps_viscous[f];
    ep.integral = node_sum + g.dx() * face_sum;
    return ep;
}

/// Nodal exchange term eps Lap(rho) / theta (theta s_delta - e_delta - p / rho) coming from the
/// artificial density diffusion.
inline std::vector<double> entropy_exchange(const Scheme& s, const SimState& st) {
    const auto& g = s.grid();
    const GasModel& gas = s.gas();
    const auto lap = g.laplacian(st.rho);
    std::vector<double> X(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) {
        const double r = st.rho[i], th = st.theta[i];
        const double gibbs = th * entropy_reg(gas, r, th) - internal_energy_reg(gas, r, th) - pressure(gas, r, th) / r;
        X[i] = s.params().eps * lap[i] / th * gibbs;
    }
    return X;
}

/// Right-hand side pieces of the entropy balance at one state, integrated over the domain.
struct EntropyRates {
    double production = 0.0; ///< full sigma
    double exchange = 0.0;   ///< int X
    double sink = 0.0;       ///< eps int theta^4
    double heat = 0.0;       ///< int rho H / theta
    double cross = 0.0;      ///< eps int (e_M + delta theta + rho de_M/drho) grad rho . grad theta / theta^2
    double mol = 0.0;        ///< eps int dp_M/drho |grad rho|^2 / (rho theta), already inside production
};

inline EntropyRates entropy_rates(const Scheme& s, const SimState& st) {
    const auto& g = s.grid();
    const GasModel& gas = s.gas();
    const double eps = s.params().eps;
    EntropyRates r;
    const auto ep = entropy_production(s, st);
    r.production = ep.integral;
    r.mol = g.dx() * std::accumulate(ep.mol_pressure.begin(), ep.mol_pressure.end(), 0.0);
    r.exchange = g.integrate(entropy_exchange(s, st));
    for (int i = 0; i < g.nodes(); ++i) {
        const double th = st.theta[i];
        r.sink += g.weights()[i] * eps * th * th * th * th;
        r.heat += g.weights()[i] * st.rho[i] * s.heat()[i] / th;
    }
    const auto gt = g.gradient(st.theta), gr = g.gradient(st.rho);
    double c = 0.0;
    for (int f = 0; f < g.cells(); ++f) {
        const double th = 0.5 * (st.theta[f] + st.theta[f + 1]);
        const double rho = 0.5 * (st.rho[f] + st.rho[f + 1]);
        const double coef = internal_energy_molecular(gas, rho, th) + gas.delta * th +
                            rho * denergy_molecular_drho(gas, rho, th);
        c += coef * gr[f] * gt[f] / (th * th);
    }
    r.cross = eps * g.dx() * c;
    return r;
}

/// Delta int rho s_delta - h int [sigma - mol + X - eps theta^4 + rho H / theta] at the left state.
inline double entropy_balance_residual(const Scheme& s, const SimState& before, const SimState& after, double h) {
    const auto r = entropy_rates(s, before);
    return entropy_functional(s, after) - entropy_functional(s, before) -
           h * (r.production - r.mol + r.exchange - r.sink + r.heat);
}

/// Slack of the total dissipation balance for one step:
/// e_res - Theta (Delta S - h sigma + h cross + h eps int theta^4 - h int rho H / theta).
inline double dissipation_slack(const Scheme& s, const SimState& before, const SimState& after, const StepRecord& rec,
                                double Theta) {
    const double e_res = energy_balance_residual(s, before, after, rec);
    if (Theta == 0.0) return e_res;
    const auto r = entropy_rates(s, before);
    const double dS = entropy_functional(s, after) - entropy_functional(s, before);
    return e_res - Theta * (dS - rec.h * r.production + rec.h * r.cross + rec.h * r.sink - rec.h * r.heat);
}

/// ||v||^2_{W^{1,2}} / int (1/theta) S(theta, v_x) v_x.
inline double korn_poincare_ratio(const Scheme& s, const SimState& st, const Vec& v) {
    if (v.squaredNorm() == 0.0) throw ArgumentError("korn_poincare_ratio: zero velocity");
    const auto& sp = s.space();
    double h1 = v.squaredNorm();
    for (int k = 0; k < sp.modes(); ++k) h1 += sp.eigenvalue(k + 1) * v[k] * v[k];
    const auto vx = sp.eval_gradient(v);
    double rhs = 0.0;
    for (int i = 0; i < s.grid().nodes(); ++i)
        rhs += s.grid().weights()[i] * stress_modulus(s.gas(), st.theta[i]) * vx[i] * vx[i] / st.theta[i];
    return h1 / rhs;
}

inline double velocity_h1(const Scheme& s, const Vec& v) {
    double h1 = v.squaredNorm();
    for (int k = 0; k < s.space().modes(); ++k) h1 += s.space().eigenvalue(k + 1) * v[k] * v[k];
    return std::sqrt(h1);
}

/// Norms of the finite-energy solution class, tracked along a path.
struct NormReport {
    double sup_rho_l53 = 0.0;   ///< sup_t ||rho||_{5/3}
    double sup_momentum_l54 = 0.0; ///< sup_t ||rho u||_{5/4}
    double sup_theta_l4 = 0.0;  ///< sup_t ||theta||_4
    double int_theta_h1 = 0.0;  ///< int_0^t ||theta||^2_{W^{1,2}}
    double int_u_h1 = 0.0;      ///< int_0^t ||u||^2_{W^{1,2}}

    void accumulate(const Scheme& s, const SimState& st, double dt) {
        const auto& g = s.grid();
        const auto u = s.space().eval(st.u);
        double a = 0.0, b = 0.0, c = 0.0, t2 = 0.0;
        for (int i = 0; i < g.nodes(); ++i) {
            const double w = g.weights()[i];
            a += w * std::pow(st.rho[i], 5.0 / 3.0);
            b += w * std::pow(std::abs(st.rho[i] * u[i]), 1.25);
            c += w * std::pow(st.theta[i], 4);
            t2 += w * st.theta[i] * st.theta[i];
        }
        const auto gt = g.gradient(st.theta);
        for (double v : gt) t2 += g.dx() * v * v;
        sup_rho_l53 = std::max(sup_rho_l53, std::pow(a, 0.6));
        sup_momentum_l54 = std::max(sup_momentum_l54, std::pow(b, 0.8));
        sup_theta_l4 = std::max(sup_theta_l4, std::pow(c, 0.25));
        const double uh = velocity_h1(s, st.u);
        int_theta_h1 += dt * t2;
        int_u_h1 += dt * uh * uh;
    }

    [[nodiscard]] bool finite() const {
        return std::isfinite(sup_rho_l53) && std::isfinite(sup_momentum_l54) && std::isfinite(sup_theta_l4) &&
               std::isfinite(int_theta_h1) && std::isfinite(int_u_h1);
    }
};

// ---------------------------------------------------------------------------
// Ledger

struct LedgerRow {
    double t = 0.0;
    double E_delta = 0.0;
    double mass = 0.0;
    double min_rho = 0.0;
    double min_theta = 0.0;
    double sigma_int = 0.0;
    double e_bal_res = 0.0;  ///< cumulative
    double s_bal_res = 0.0;  ///< cumulative
    double diss_slack = 0.0; ///< cumulative
    double u_l2 = 0.0;
    double u_h1 = 0.0;
    double stoch_inc = 0.0;  ///< cumulative stochastic integral sum (S_k . u) dW_k
};

inline constexpr const char* ledger_header =
    "t,E_delta,mass,min_rho,min_theta,sigma_int,e_bal_res,s_bal_res,diss_slack,u_l2,u_h1,stoch_inc";

/// Append-only per-step record. CSV rows follow ledger_header; values print with 17 significant digits.
class DiagnosticsLedger {
  public:
    void append(const LedgerRow& r) { rows_.push_back(r); }
    [[nodiscard]] const std::vector<LedgerRow>& rows() const { return rows_; }
    [[nodiscard]] bool empty() const { return rows_.empty(); }

    void write_csv(std::ostream& os) const {
        os << ledger_header << '\n';
        char buf[64];
        for (const auto& r : rows_) {
            const double v[] = {r.t,         r.E_delta,   r.mass,       r.min_rho, r.min_theta, r.sigma_int,
                                r.e_bal_res, r.s_bal_res, r.diss_slack, r.u_l2,    r.u_h1,      r.stoch_inc};
            for (std::size_t k = 0; k < std::size(v); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g", v[k]);
                os << (k ? "," : "") << buf;
            }
            os << '\n';
        }
    }

  private:
    std::vector<LedgerRow> rows_;
};

// ---------------------------------------------------------------------------
// Path driver

struct RunOptions {
    long steps = -1;         ///< default: ceil(T / h)
    int record_stride = 1;
    double Theta = 1.0;
    bool keep_trajectory = false;
    bool entropy_diagnostics = true;
};

struct Trajectory {
    std::vector<SimState> states;   ///< every step, when kept
    std::vector<StepRecord> records;
};

struct PathResult {
    DiagnosticsLedger ledger;
    Trajectory trajectory;
    NormReport norms;
    bool failed = false;
    std::string error;
    long steps_done = 0;
    double min_sigma_summand = std::numeric_limits<double>::infinity();
    double lower_bound_margin = std::numeric_limits<double>::infinity();
    double max_mass_drift = 0.0;   ///< max |mass(t) - mass(0)| / mass(0)
    double sup_u = 0.0;
    bool positive = true;          ///< min rho, min theta > 0 at every step
};

inline LedgerRow make_row(const Scheme& s, const SimState& st, double sigma_int, double e_cum, double s_cum,
                          double d_cum, double stoch_cum) {
    LedgerRow r;
    r.t = st.t;
    r.E_delta = total_energy(s, st);
    r.mass = total_mass(s, st);
    r.min_rho = *std::min_element(st.rho.begin(), st.rho.end());
    r.min_theta = *std::min_element(st.theta.begin(), st.theta.end());
    r.sigma_int = sigma_int;
    r.e_bal_res = e_cum;
    r.s_bal_res = s_cum;
    r.diss_slack = d_cum;
    r.u_l2 = st.u.norm();
    r.u_h1 = velocity_h1(s, st.u);
    r.stoch_inc = stoch_cum;
    return r;
}

/// Runs one path from the given initial state, recording every record_stride steps.
inline PathResult run(const Scheme& s, SimState st, const RunOptions& opt = {}) {
    PathResult out;
    const long steps = opt.steps >= 0 ? opt.steps : s.steps();
    const double h = s.params().h;
    const double mass0 = total_mass(s, st);
    const double min_rho0 = *std::min_element(st.rho.begin(), st.rho.end());
    double e_cum = 0.0, s_cum = 0.0, d_cum = 0.0, stoch_cum = 0.0, div_int = 0.0;

    auto sigma_of = [&](const SimState& x, double& min_summand) {
        if (!opt.entropy_diagnostics) return 0.0;
        const auto ep = entropy_production(s, x);
        min_summand = std::min(min_summand, ep.min_summand());
        return ep.integral;
    };

    double sigma_now = sigma_of(st, out.min_sigma_summand);
    out.ledger.append(make_row(s, st, sigma_now, 0.0, 0.0, 0.0, 0.0));
    out.lower_bound_margin = 1.0;
    out.sup_u = st.u.norm();
    if (opt.keep_trajectory) out.trajectory.states.push_back(st);
    out.norms.accumulate(s, st, 0.0);

    for (long k = 0; k < steps; ++k) {
        SimState before = st;
        StepRecord rec;
        try {
            rec = step(st, s);
        } catch (const std::exception& e) {
            out.failed = true;
            out.error = "step " + std::to_string(k) + ": " + e.what();
            break;
        }
        const double e_res = energy_balance_residual(s, before, st, rec);
        e_cum += e_res;
        stoch_cum += rec.stoch;
        if (opt.entropy_diagnostics) {
            const auto r = entropy_rates(s, before);
            const double dS = entropy_functional(s, st) - entropy_functional(s, before);
            s_cum += dS - h * (r.production - r.mol + r.exchange - r.sink + r.heat);
            d_cum += e_res - opt.Theta * (dS - h * r.production + h * r.cross + h * r.sink - h * r.heat);
            sigma_now = sigma_of(st, out.min_sigma_summand);
        } else {
            d_cum += e_res;
        }
        div_int += h * rec.div_sup;
        const double mr = *std::min_element(st.rho.begin(), st.rho.end());
        const double mt = *std::min_element(st.theta.begin(), st.theta.end());
        if (!(mr > 0.0) || !(mt > 0.0)) out.positive = false;
        out.lower_bound_margin = std::min(out.lower_bound_margin, mr / (min_rho0 * std::exp(-div_int)));
        out.max_mass_drift = std::max(out.max_mass_drift, std::abs(total_mass(s, st) - mass0) / mass0);
        out.sup_u = std::max(out.sup_u, st.u.norm());
        out.norms.accumulate(s, st, h);
        ++out.steps_done;
        if (opt.keep_trajectory) {
            out.trajectory.states.push_back(st);
            out.trajectory.records.push_back(std::move(rec));
        }
        if ((k + 1) % opt.record_stride == 0 || k + 1 == steps)
            out.ledger.append(make_row(s, st, sigma_now, e_cum, s_cum, d_cum, stoch_cum));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weak formulations

/// Time factors psi_i(t) = (1 - t/T)^3 q_i(t/T) with q in {1, 1 + 2 tau, 1 + 4 tau^2}; all nonnegative.
struct TestBattery {
    double T = 1.0;

    static constexpr int n_time = 3;
    static constexpr int n_space = 3;

    [[nodiscard]] double psi(int i, double t) const {
        const double tau = t / T, b = (1.0 - tau) * (1.0 - tau) * (1.0 - tau);
        return b * q(i, tau);
    }
    [[nodiscard]] double dpsi(int i, double t) const {
        const double tau = t / T, a = 1.0 - tau;
        return (-3.0 * a * a * q(i, tau) + a * a * a * dq(i, tau)) / T;
    }

  private:
    static double q(int i, double tau) { return i == 0 ? 1.0 : i == 1 ? 1.0 + 2.0 * tau : 1.0 + 4.0 * tau * tau; }
    static double dq(int i, double tau) { return i == 0 ? 0.0 : i == 1 ? 2.0 : 8.0 * tau; }
};

struct WeakResiduals {
    Mat continuity;     ///< time x {1, cos, cos 2}
    Mat momentum;       ///< time x {w_1, w_2, w_3}
    Vec energy;         ///< time x {1}
    Mat entropy_slack;  ///< time x {1, 1 + cos, 1 - cos}, must be >= -tol

    [[nodiscard]] double max_continuity() const { return continuity.cwiseAbs().maxCoeff(); }
    [[nodiscard]] double max_momentum() const { return momentum.cwiseAbs().maxCoeff(); }
    [[nodiscard]] double max_energy() const { return energy.cwiseAbs().maxCoeff(); }
    [[nodiscard]] double min_entropy_slack() const { return entropy_slack.minCoeff(); }
};

/// Integrates the weak forms along a stride-1 trajectory. Time integrals use
/// psi increments times the step mean for psi' terms, the step-average of psi times the
/// trapezoid drift for deterministic terms and the left value of psi for the Ito sums.
/// Continuity pairs centered fluxes with exact test derivatives, so the residual carries the
/// spatial error of the scheme as well as the temporal one.
inline WeakResiduals weak_residuals(const Scheme& s, const Trajectory& tr, const TestBattery& bat) {
    const auto& g = s.grid();
    const auto& sp = s.space();
    const GasModel& gas = s.gas();
    const double eps = s.params().eps;
    const int n = g.nodes(), nf = g.cells();
    const std::size_t steps = tr.records.size();
    if (tr.states.size() != steps + 1) throw ArgumentError("weak_residuals: trajectory must be recorded at stride 1");
    if (sp.modes() < 3) throw ArgumentError("weak_residuals: need at least 3 Galerkin modes");
    const double L = g.length();

    // spatial test functions
    std::vector<std::vector<double>> phi_c(3, std::vector<double>(n)), psi_e(3, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        const double c1 = std::cos(std::numbers::pi * g.x()[i] / L);
        phi_c[0][i] = 1.0;
        phi_c[1][i] = c1;
        phi_c[2][i] = std::cos(2.0 * std::numbers::pi * g.x()[i] / L);
        psi_e[0][i] = 1.0;
        psi_e[1][i] = 1.0 + c1;
        psi_e[2][i] = 1.0 - c1;
    }
    // exact derivatives of the continuity tests at faces; entropy tests keep the grid gradient
    std::vector<std::vector<double>> gphi_c(3, std::vector<double>(nf, 0.0)), gpsi_e(3);
    for (int f = 0; f < nf; ++f) {
        const double k = std::numbers::pi / L, xf = g.faces()[f];
        gphi_c[1][f] = -k * std::sin(k * xf);
        gphi_c[2][f] = -2.0 * k * std::sin(2.0 * k * xf);
    }
    for (int j = 0; j < 3; ++j) gpsi_e[j] = g.gradient(psi_e[j]);

    // continuity flux of the continuous weak form at one state: (rho [u]_R - eps rho_x) phi'
    auto cont_flux = [&](const SimState& st, int j) {
        const auto fv = freeze(s, st.u);
        const auto gr = g.gradient(st.rho);
        double a = 0.0;
        for (int f = 0; f < nf; ++f)
            a += g.dx() * (0.5 * (st.rho[f] + st.rho[f + 1]) * fv.U_face[f] - eps * gr[f]) * gphi_c[j][f];
        return a;
    };

    WeakResiduals wr;
    wr.continuity = Mat::Zero(3, 3);
    wr.momentum = Mat::Zero(3, 3);
    wr.energy = Vec::Zero(3);
    wr.entropy_slack = Mat::Zero(3, 3);

    // per-state spatial pairings
    auto cont_mass = [&](const SimState& st, int j) {
        double a = 0.0;
        for (int i = 0; i < n; ++i) a += g.weights()[i] * st.rho[i] * phi_c[j][i];
        return a;
    };
    auto ent_mass = [&](const SimState& st, int j) {
        double a = 0.0;
        for (int i = 0; i < n; ++i) a += g.weights()[i] * st.rho[i] * entropy_reg(gas, st.rho[i], st.theta[i]) * psi_e[j][i];
        return a;
    };

    std::vector<double> E(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) E[k] = total_energy(s, tr.states[k]);

    for (int a = 0; a < 3; ++a) {
        const double p0 = bat.psi(a, tr.states[0].t);
        for (int j = 0; j < 3; ++j) {
            wr.continuity(a, j) += p0 * cont_mass(tr.states[0], j);
            wr.momentum(a, j) += p0 * tr.states[0].P[j];
            wr.entropy_slack(a, j) -= p0 * ent_mass(tr.states[0], j);
        }
        wr.energy[a] += p0 * E[0];
    }

    for (std::size_t k = 0; k < steps; ++k) {
        const SimState& A = tr.states[k];
        const SimState& B = tr.states[k + 1];
        const StepRecord& rec = tr.records[k];
        const double h = rec.h;
        const auto fv = freeze(s, A.u);

        // energy: deterministic sources and the realized quadratic variation of the step
        const double esrc = h * energy_sources_integral(s, A, B) + rec.qv;

        // entropy: convective and conductive fluxes plus the kept sources, at the left state
        std::vector<double> rs(n), K(n);
        for (int i = 0; i < n; ++i) {
            rs[i] = A.rho[i] * entropy_reg(gas, A.rho[i], A.theta[i]);
            K[i] = kirchhoff(gas, A.theta[i]);
        }
        const auto rs_up = upwind(rs, fv.U_face);
        const auto gK = g.gradient(K), gt = g.gradient(A.theta);
        const auto X = entropy_exchange(s, A);
        std::vector<double> src_node(n);
        for (int i = 0; i < n; ++i) {
            const double th = A.theta[i];
            src_node[i] = fv.chi * stress_modulus(gas, th) * fv.ux[i] * fv.ux[i] / th + X[i] -
                          eps * th * th * th * th + A.rho[i] * s.heat()[i] / th;
        }
        std::vector<double> cond_face(nf);
        for (int f = 0; f < nf; ++f) {
            const double th = 0.5 * (A.theta[f] + A.theta[f + 1]);
            cond_face[f] = transport_coeffs(gas, th).kappa * gt[f] * gt[f] / (th * th);
        }
        double eflux[3] = {0, 0, 0};
        for (int j = 0; j < 3; ++j) {
            double v = 0.0;
            for (int f = 0; f < nf; ++f) {
                const double th2 = A.theta[f] * A.theta[f + 1];
                v += g.dx() * (rs_up[f] * fv.U_face[f] - gK[f] / std::sqrt(th2)) * gpsi_e[j][f];
                v += g.dx() * cond_face[f] * 0.5 * (psi_e[j][f] + psi_e[j][f + 1]);
            }
            for (int i = 0; i < n; ++i) v += g.weights()[i] * src_node[i] * psi_e[j][i];
            eflux[j] = v;
        }

        // drift terms by the trapezoid rule between the step ends
        const Vec drift = 0.5 * (assemble_drift(A, s) + assemble_drift(B, s));
        double cflux[3];
        for (int j = 0; j < 3; ++j) cflux[j] = 0.5 * (cont_flux(A, j) + cont_flux(B, j));

        for (int a = 0; a < 3; ++a) {
            const double pl = bat.psi(a, A.t), pr = bat.psi(a, B.t);
            const double pbar = 0.5 * (pl + pr);
            // int psi' q dt over the step as (psi_r - psi_l) times the mean of q: telescopes exactly on constants
            const double dp = pr - pl;
            for (int j = 0; j < 3; ++j) {
                wr.continuity(a, j) += 0.5 * dp * (cont_mass(A, j) + cont_mass(B, j)) + pbar * h * cflux[j];
                wr.momentum(a, j) += 0.5 * dp * (A.P[j] + B.P[j]) + pbar * h * drift[j] + pl * rec.noise_impulse[j];
                wr.entropy_slack(a, j) -= 0.5 * dp * (ent_mass(A, j) + ent_mass(B, j)) + pbar * h * eflux[j];
            }
            wr.energy[a] += 0.5 * dp * (E[k] + E[k + 1]) + pbar * esrc + pl * rec.stoch;
        }
    }
    return wr;
}

// ---------------------------------------------------------------------------
// Ensemble statistics

struct DriftTest {
    double measured = 0.0;  ///< mean of E(t) - E(0)
    double predicted = 0.0; ///< mean of the integrated sources and Ito correction
    double z = 0.0;         ///< mean(measured - predicted) / standard error
    double se = 0.0;
    double z_measured = 0.0; ///< mean(E(t) - E(0)) / its standard error
};

inline std::pair<double, double> mean_and_se(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {0.0, 0.0};
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    if (n < 2) return {m, 0.0};
    double v = 0.0;
    for (double a : x) v += (a - m) * (a - m);
    v /= double(n - 1);
    return {m, std::sqrt(v / double(n))};
}

/// Compares the measured energy drift at row `row` with the prediction from the
/// balance: predicted = E(t) - E(0) - cumulative residual - cumulative stochastic integral.
inline DriftTest stationarity_drift(std::span<const DiagnosticsLedger* const> ledgers, std::size_t row) {
    std::vector<double> meas, pred, diff;
    for (const auto* l : ledgers) {
        if (row >= l->rows().size()) continue;
        const auto& r = l->rows()[row];
        const double dE = r.E_delta - l->rows().front().E_delta;
        meas.push_back(dE);
        pred.push_back(dE - r.e_bal_res - r.stoch_inc);
        diff.push_back(r.e_bal_res + r.stoch_inc);
    }
    DriftTest d;
    const auto [mm, sm] = mean_and_se(meas);
    const auto [mp, sp] = mean_and_se(pred);
    const auto [md, sd] = mean_and_se(diff);
    (void)sp;
    d.measured = mm;
    d.predicted = mp;
    d.se = sd;
    d.z = sd > 0.0 ? md / sd : (md == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), md));
    d.z_measured = sm > 0.0 ? mm / sm : 0.0;
    return d;
}

/// Least-squares slope of log|y| against log x, with R^2.
struct OrderFit {
    double order = 0.0;
    double r2 = 0.0;
};

inline OrderFit fit_order(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw ArgumentError("fit_order: need matching samples");
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(std::max(std::abs(y[i]), 1e-300));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    OrderFit f;
    f.order = sxy / sxx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

} // namespace nsf
