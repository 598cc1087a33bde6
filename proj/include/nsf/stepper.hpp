#pragma once
// Collocation time stepping: freeze the velocity at t_n, advance rho then
// theta, then one Euler-Maruyama step for the projected momentum and recover
// u through the mass operator at the new density.

#include "nsf/counter_rng.hpp"
#include "nsf/errors.hpp"
#include "nsf/fields_pde.hpp"
#include "nsf/galerkin.hpp"
#include "nsf/grid.hpp"
#include "nsf/noise.hpp"
#include "nsf/thermo.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nsf {

/// Discretization and regularization knobs. delta and beta live in GasModel,
/// xi and the noise amplitudes in DiffusionFamily.
struct SimParams {
    int m = 4;          ///< Galerkin modes
    int N = 64;         ///< grid cells
    double L = 4.0;     ///< domain length
    double R = 10.0;    ///< velocity cut-off radius
    double eps = 0.1;   ///< artificial viscosity
    double h = 1e-3;    ///< time step
    double T = 1.0;     ///< horizon
    double heat_amplitude = 0.0; ///< H(x) = amplitude (1 + cos(pi x / L)) / 2, bounded by amplitude
    bool noise = true;
};

struct InitialLaw {
    double rho_bar = 1.0, rho_low = 0.5, rho_up = 2.0, rho_sd = 0.05;
    double theta_bar = 1.0, theta_sd = 0.05;
    int modes = 3;       ///< cosine modes in log rho_0 and log theta_0
    double u0_sd = 0.05; ///< sd of u_0 coefficient n is u0_sd / n
};

/// Everything that stays fixed along a path.
class Scheme {
  public:
    Scheme(const GasModel& gas, const DiffusionFamily& fam, const SimParams& par)
        : gas_(gas), fam_(fam), par_(par), grid_(par.N, par.L), space_(par.m, grid_) {
        if (gas.delta > 0.0 && !(gas.beta > 6.0)) throw ConfigError("beta must exceed 6 when delta > 0");
        if (!(par.h > 0.0) || !(par.T > 0.0)) throw ConfigError("h and T must be positive");
        if (!(par.eps > 0.0)) throw ConfigError("eps must be positive");
        if (!(par.R > 0.0)) throw ConfigError("R must be positive");
        if (!(par.heat_amplitude >= 0.0) || !std::isfinite(par.heat_amplitude))
            throw ConfigError("heat_amplitude must be finite and nonnegative");
        fam_.L = par.L;
        fam_.eps = par.eps;
        if (noise_active()) mol_.emplace(fam_, grid_);
        heat_.assign(grid_.nodes(), 0.0);
        for (int i = 0; i < grid_.nodes(); ++i)
            heat_[i] = par.heat_amplitude * 0.5 * (1.0 + std::cos(std::numbers::pi * grid_.x()[i] / par.L));
    }

    [[nodiscard]] const GasModel& gas() const { return gas_; }
    [[nodiscard]] const DiffusionFamily& family() const { return fam_; }
    [[nodiscard]] const SimParams& params() const { return par_; }
    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] const GalerkinSpace& space() const { return space_; }
    [[nodiscard]] const std::vector<double>& heat() const { return heat_; }
    [[nodiscard]] bool noise_active() const { return par_.noise && fam_.f0 != 0.0 && fam_.K > 0; }
    [[nodiscard]] const Mollifier& mollifier() const { return *mol_; }
    [[nodiscard]] long steps() const { return std::lround(std::ceil(par_.T / par_.h - 1e-9)); }

  private:
    GasModel gas_;
    DiffusionFamily fam_;
    SimParams par_;
    Grid grid_;
    GalerkinSpace space_;
    std::optional<Mollifier> mol_;
    std::vector<double> heat_;
};

struct SimState {
    std::vector<double> rho, theta;
    Vec u, P;
    double t = 0.0;
    long n = 0;
    WienerDriver driver;
};

inline FrozenVelocity freeze(const Scheme& s, const Vec& u) {
    FrozenVelocity fv;
    const auto& sp = s.space();
    fv.u = sp.eval(u);
    fv.ux = sp.eval_gradient(u);
    fv.u_face = sp.eval_faces(u);
    fv.chi = cutoff_factor(u, s.params().R);
    fv.U_face = fv.u_face;
    for (double& v : fv.U_face) v *= fv.chi;
    return fv;
}

/// The momentum drift split by physical origin.
struct DriftParts {
    Vec convective, pressure, artificial, viscous, eps_diffusion, damping;
    [[nodiscard]] Vec total() const { return convective + pressure + artificial + viscous + eps_diffusion + damping; }
};

/// Drift with the density before (rho_n) and after (rho_next) the continuity step.
/// The artificial pressure and the eps Laplacian see rho_next so their kinetic
/// energy exchange cancels exactly against the potential energy and the
/// internal energy sources.
inline DriftParts assemble_drift_parts(const Scheme& s, std::span<const double> rho_n, std::span<const double> rho_next,
                                       std::span<const double> theta_n, const FrozenVelocity& fv, const Vec& u) {
    const Grid& g = s.grid();
    const GalerkinSpace& sp = s.space();
    const GasModel& gas = s.gas();
    const int n = g.nodes(), nf = g.cells();
    DriftParts d;

    const auto rho_up = upwind(rho_n, fv.U_face);
    std::vector<double> q(nf);
    for (int f = 0; f < nf; ++f) q[f] = rho_up[f] * fv.U_face[f] * 0.5 * (fv.u[f] + fv.u[f + 1]);
    d.convective = sp.pair_faces(sp.face_gradients(), q);

    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = pressure(gas, rho_n[i], theta_n[i]);
    d.pressure = -fv.chi * sp.pair_faces(sp.face_values(), g.gradient(p));

    std::vector<double> bp(n);
    for (int i = 0; i < n; ++i) bp[i] = artificial_potential_d1(gas, rho_next[i]);
    const auto gbp = g.gradient(bp);
    for (int f = 0; f < nf; ++f) q[f] = rho_up[f] * gbp[f];
    d.artificial = -fv.chi * sp.pair_faces(sp.face_values(), q);

    std::vector<double> sv(n);
    for (int i = 0; i < n; ++i) sv[i] = stress_modulus(gas, theta_n[i]) * fv.ux[i];
    d.viscous = -fv.chi * sp.pair_node_derivatives(sv);

    std::vector<double> ru(n);
    for (int i = 0; i < n; ++i) ru[i] = rho_next[i] * fv.u[i];
    d.eps_diffusion = -s.params().eps * sp.pair_faces(sp.face_gradients(), g.gradient(ru));

    d.damping = -u / double(s.params().m);
    return d;
}

/// Drift at a single state (density before and after taken equal).
inline Vec assemble_drift(const SimState& st, const Scheme& s) {
    const auto fv = freeze(s, st.u);
    return assemble_drift_parts(s, st.rho, st.rho, st.theta, fv, st.u).total();
}

/// Regularized noise coefficients at the left state: f_k = Pi_m[omega * (h_xi F_{k,eps})]
/// and the momentum impulses S_k = Pi_m[rho f_k].
struct NoiseCoefficients {
    std::vector<Vec> f, S;
};

inline NoiseCoefficients noise_coefficients(const Scheme& s, std::span<const double> rho, std::span<const double> theta,
                                            std::span<const double> u_nodes) {
    const Grid& g = s.grid();
    const GalerkinSpace& sp = s.space();
    const DiffusionFamily& fam = s.family();
    const int n = g.nodes();
    NoiseCoefficients nc;
    if (!s.noise_active()) return nc;
    std::vector<std::vector<double>> Fk(fam.K, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        const auto F = regularize_eps(fam, eval_F(fam, g.x()[i], rho[i], theta[i], u_nodes[i]), rho[i], u_nodes[i]);
        for (int k = 0; k < fam.K; ++k) Fk[k][i] = F[k];
    }
    nc.f.reserve(fam.K);
    nc.S.reserve(fam.K);
    std::vector<double> rf(n);
    for (int k = 0; k < fam.K; ++k) {
        const Vec fk = sp.project(mollify_xi(s.mollifier(), Fk[k]));
        const auto vals = sp.eval(fk);
        for (int i = 0; i < n; ++i) rf[i] = rho[i] * vals[i];
        nc.S.push_back(sp.project(rf));
        nc.f.push_back(fk);
    }
    return nc;
}

/// What one step did, kept for the balance diagnostics.
struct StepRecord {
    double h = 0.0;
    std::vector<double> dW;
    Vec drift;          ///< D_n
    Vec noise_impulse;  ///< sum_k S_k dW_k
    double ito = 0.0;   ///< h/2 sum_k f_k . S_k = h/2 sum_k int rho |Pi_m F_k|^2
    double stoch = 0.0; ///< sum_k (S_k . u_n) dW_k
    double qv = 0.0;    ///< realized 1/2 (sum_k f_k dW_k) . (sum_k S_k dW_k)
    double chi = 1.0;
    double div_sup = 0.0; ///< sup |div [u]_R| during the step
    int newton_iterations = 0;
};

inline StepRecord step(SimState& st, const Scheme& s) {
    const Grid& g = s.grid();
    const SimParams& par = s.params();
    const double h = par.h;
    StepRecord rec;
    rec.h = h;

    const auto fv = freeze(s, st.u);
    rec.chi = fv.chi;
    {
        const auto divU = g.divergence(fv.U_face);
        for (double v : divU) rec.div_sup = std::max(rec.div_sup, std::abs(v));
    }

    auto rho_next = continuity_step(g, st.rho, fv.U_face, h, par.eps);
    for (int i = 0; i < g.nodes(); ++i)
        if (!(rho_next[i] > 0.0)) throw StateError("density lost positivity at node " + std::to_string(i));

    EnergyParams ep;
    ep.gas = s.gas();
    ep.eps = par.eps;
    const auto src = energy_sources(g, s.gas(), par.eps, st.rho, rho_next, st.theta, fv, s.heat());
    auto er = energy_step_with_sources(g, st.rho, rho_next, st.theta, fv.U_face, src.total, h, ep);
    rec.newton_iterations = er.iterations;

    rec.drift = assemble_drift_parts(s, st.rho, rho_next, st.theta, fv, st.u).total();
    Vec P_next = st.P + h * rec.drift;
    rec.noise_impulse = Vec::Zero(par.m);
    if (s.noise_active()) {
        const auto nc = noise_coefficients(s, st.rho, st.theta, fv.u);
        rec.dW = st.driver.sample_increments(h);
        Vec df = Vec::Zero(par.m);
        for (std::size_t k = 0; k < nc.S.size(); ++k) {
            df += nc.f[k] * rec.dW[k];
            rec.noise_impulse += nc.S[k] * rec.dW[k];
            rec.ito += 0.5 * h * nc.f[k].dot(nc.S[k]);
            rec.stoch += nc.S[k].dot(st.u) * rec.dW[k];
        }
        rec.qv = 0.5 * df.dot(rec.noise_impulse);
        P_next += rec.noise_impulse;
    }

    const auto M = assemble_mass(s.space(), rho_next);
    st.u = mass_solve(M, P_next);
    st.P = std::move(P_next);
    st.rho = std::move(rho_next);
    st.theta = std::move(er.theta);
    st.t += h;
    ++st.n;
    for (int i = 0; i < g.nodes(); ++i)
        if (!(st.theta[i] > 0.0) || !std::isfinite(st.theta[i]))
            throw StateError("temperature lost positivity at node " + std::to_string(i));
    if (!st.u.allFinite()) throw StateError("velocity coefficients not finite");
    return rec;
}

// ---------------------------------------------------------------------------
// Initial law

namespace detail {

/// N(0,1) truncated to [-2, 2] by rejection over successive counters.
inline double truncated_normal(std::uint64_t seed, std::uint32_t slot, std::uint32_t path) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const double z = counter_normal(seed, Stream::initial_law, attempt, slot, path);
        if (std::abs(z) <= 2.0) return z;
    }
}

} // namespace detail

inline void validate_initial_law(const InitialLaw& law) {
    if (!(law.rho_low > 0.0) || !(law.rho_low < law.rho_bar) || !(law.rho_bar < law.rho_up))
        throw ConfigError("initial law needs 0 < rho_low < rho_bar < rho_up");
    if (!(law.theta_bar > 0.0)) throw ConfigError("theta_bar must be positive");
    if (law.rho_sd < 0.0 || law.theta_sd < 0.0 || law.u0_sd < 0.0 || law.modes < 0)
        throw ConfigError("initial law amplitudes and mode count must be nonnegative");
    const double spread = 2.0 * law.rho_sd * law.modes;
    if (!(law.rho_bar * std::exp(-spread) > law.rho_low) || !(law.rho_bar * std::exp(spread) < law.rho_up))
        throw ConfigError("rho_bar * exp(+-2 rho_sd modes) must lie inside (rho_low, rho_up)");
}

/// rho_0 = rho_bar exp(sum_j a_j cos(j pi x / L)), theta_0 alike, a_j ~ N(0, sd^2) cut at 2 sd.
inline SimState sample_initial(const InitialLaw& law, const Scheme& s, std::uint64_t seed, std::uint32_t path,
                               int substeps = 1) {
    const Grid& g = s.grid();
    const double L = g.length();
    SimState st;
    st.rho.assign(g.nodes(), 0.0);
    st.theta.assign(g.nodes(), 0.0);
    for (int j = 1; j <= law.modes; ++j) {
        const double ar = law.rho_sd * detail::truncated_normal(seed, std::uint32_t(j), path);
        const double at = law.theta_sd * detail::truncated_normal(seed, std::uint32_t(1000 + j), path);
        for (int i = 0; i < g.nodes(); ++i) {
            const double c = std::cos(j * std::numbers::pi * g.x()[i] / L);
            st.rho[i] += ar * c;
            st.theta[i] += at * c;
        }
    }
    for (int i = 0; i < g.nodes(); ++i) {
        st.rho[i] = law.rho_bar * std::exp(st.rho[i]);
        st.theta[i] = law.theta_bar * std::exp(st.theta[i]);
    }
    const int m = s.params().m;
    st.u = Vec::Zero(m);
    for (int k = 0; k < m; ++k)
        st.u[k] = law.u0_sd / (k + 1) * counter_normal(seed, Stream::initial_law, 0, std::uint32_t(2000 + k), path);
    const auto M = assemble_mass(s.space(), st.rho);
    st.P = M.matrix() * st.u;
    st.driver = WienerDriver(s.noise_active() ? s.family().K : 0, seed, path, substeps);
    return st;
}

/// Constant state rho, theta with u = 0.
inline SimState constant_state(const Scheme& s, double rho, double theta, std::uint64_t seed = 0,
                               std::uint32_t path = 0) {
    SimState st;
    st.rho.assign(s.grid().nodes(), rho);
    st.theta.assign(s.grid().nodes(), theta);
    st.u = Vec::Zero(s.params().m);
    st.P = Vec::Zero(s.params().m);
    st.driver = WienerDriver(s.noise_active() ? s.family().K : 0, seed, path);
    return st;
}

} // namespace nsf
