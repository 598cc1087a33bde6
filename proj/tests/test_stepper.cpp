#include "nsf/stepper.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace nsf;

namespace {

SimParams small_params(bool noise) {
    SimParams p;
    p.noise = noise;
    p.T = 0.05;
    return p;
}

Vec consistency_gap(const Scheme& s, const SimState& st) {
    const auto u = s.space().eval(st.u);
    std::vector<double> ru(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) ru[i] = st.rho[i] * u[i];
    return st.P - s.space().project(ru);
}

} // namespace

TEST(Drift, VanishesAtEquilibrium) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(false));
    for (double r : {0.5, 1.0, 2.0}) {
        const auto st = constant_state(s, r, 1.3);
        EXPECT_LE(assemble_drift(st, s).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Drift, ViscousLinearization) {
    GasModel gas;
    Scheme s(gas, DiffusionFamily{}, small_params(false));
    auto st = constant_state(s, 1.0, 1.0);
    const double alpha = 1e-4;
    st.u = Vec::Zero(s.params().m);
    st.u[0] = alpha;
    const auto fv = freeze(s, st.u);
    const auto d = assemble_drift_parts(s, st.rho, st.rho, st.theta, fv, st.u);
    const double expected = -stress_modulus(gas, 1.0) * s.space().eigenvalue(1) * alpha;
    EXPECT_NEAR(d.viscous[0], expected, 1e-6 * std::abs(expected));
    for (int k = 1; k < s.params().m; ++k) EXPECT_LE(std::abs(d.viscous[k]), 1e-12);
    EXPECT_EQ(d.damping[0], -alpha / s.params().m);
    // eps <rho u, phi''> at constant rho is -eps lambda_1 alpha up to the face difference error
    const double eps_expected = -s.params().eps * s.space().eigenvalue(1) * alpha;
    EXPECT_NEAR(d.eps_diffusion[0], eps_expected, 1e-3 * std::abs(eps_expected));
}

TEST(Drift, SaturatedCutoffLeavesDampingAndDiffusion) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(false));
    auto st = sample_initial(InitialLaw{}, s, 3, 0);
    st.u = Vec::Ones(s.params().m);
    st.u *= (s.params().R + 1.0) / st.u.norm();
    const auto fv = freeze(s, st.u);
    EXPECT_EQ(fv.chi, 0.0);
    const auto d = assemble_drift_parts(s, st.rho, st.rho, st.theta, fv, st.u);
    EXPECT_EQ(d.convective.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.pressure.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.artificial.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.viscous.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(d.eps_diffusion.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(d.damping.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Step, DeterministicEquilibriumHolds) {
    // delta = eps and a = 1 put theta = 1 at the source balance
    GasModel gas;
    SimParams p = small_params(false);
    p.T = 1.0;
    ASSERT_EQ(gas.delta, p.eps);
    Scheme s(gas, DiffusionFamily{}, p);
    auto st = constant_state(s, 1.0, 1.0);
    for (int n = 0; n < 1000; ++n) {
        step(st, s);
        double dev = 0.0;
        for (int i = 0; i < s.grid().nodes(); ++i)
            dev = std::max({dev, std::abs(st.rho[i] - 1.0), std::abs(st.theta[i] - 1.0)});
        ASSERT_LE(dev, 1e-10) << n;
        ASSERT_LE(st.u.cwiseAbs().maxCoeff(), 1e-10) << n;
    }
    EXPECT_NEAR(st.t, 1.0, 1e-9);
}

TEST(Step, SameSeedIsBitwiseIdentical) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(true));
    auto a = sample_initial(InitialLaw{}, s, 99, 4), b = sample_initial(InitialLaw{}, s, 99, 4);
    for (long n = 0; n < s.steps(); ++n) {
        step(a, s);
        step(b, s);
    }
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.P, b.P);
}

TEST(Step, DistinctSeedsDiffer) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(true));
    std::vector<Vec> ends;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto st = sample_initial(InitialLaw{}, s, seed, 0);
        for (long n = 0; n < s.steps(); ++n) step(st, s);
        ends.push_back(st.u);
    }
    EXPECT_NE(ends[0], ends[1]);
    EXPECT_NE(ends[1], ends[2]);
}

TEST(Step, MomentumConsistency) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(true));
    auto st = sample_initial(InitialLaw{}, s, 5, 1);
    EXPECT_LE(consistency_gap(s, st).cwiseAbs().maxCoeff(), 1e-8);
    for (long n = 0; n < s.steps(); ++n) {
        step(st, s);
        ASSERT_LE(consistency_gap(s, st).cwiseAbs().maxCoeff(), 1e-8) << n;
    }
}

TEST(Step, ViscousDecayRate) {
    // frozen rho = theta = 1: only the velocity ODE M u' = viscous drift runs
    GasModel gas;
    SimParams p = small_params(false);
    p.h = 1e-4;
    Scheme s(gas, DiffusionFamily{}, p);
    auto st = constant_state(s, 1.0, 1.0);
    const double a0 = 1e-3, t_end = 0.2;
    st.u[0] = a0;
    const auto M = assemble_mass(s.space(), st.rho);
    Vec P = M.matrix() * st.u;
    const long steps = std::lround(t_end / p.h);
    for (long n = 0; n < steps; ++n) {
        const auto fv = freeze(s, st.u);
        const auto d = assemble_drift_parts(s, st.rho, st.rho, st.theta, fv, st.u);
        P += p.h * (d.viscous + d.convective + d.pressure + d.artificial);
        st.u = mass_solve(M, P);
    }
    const double rate = -std::log(st.u[0] / a0) / t_end;
    const double expected = stress_modulus(gas, 1.0) * s.space().eigenvalue(1);
    EXPECT_NEAR(rate / expected, 1.0, 0.02);
}

TEST(Step, CutoffRadiusInvariance) {
    SimParams p = small_params(true);
    Scheme s10(GasModel{}, DiffusionFamily{}, p);
    p.R = 50.0;
    Scheme s50(GasModel{}, DiffusionFamily{}, p);
    auto a = sample_initial(InitialLaw{}, s10, 7, 0), b = sample_initial(InitialLaw{}, s50, 7, 0);
    for (long n = 0; n < s10.steps(); ++n) {
        ASSERT_LE(a.u.norm(), s10.params().R - 1.0);
        step(a, s10);
        step(b, s50);
    }
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_EQ(a.theta, b.theta);
}

TEST(Step, VelocityStaysBoundedAcrossSeeds) {
    SimParams p = small_params(true);
    p.T = 0.1;
    Scheme s(GasModel{}, DiffusionFamily{}, p);
    double sup = 0.0;
    for (std::uint32_t path = 0; path < 100; ++path) {
        auto st = sample_initial(InitialLaw{}, s, 11, path);
        for (long n = 0; n < s.steps(); ++n) {
            step(st, s);
            sup = std::max(sup, st.u.norm());
        }
    }
    EXPECT_TRUE(std::isfinite(sup));
    EXPECT_LT(sup, s.params().R);
}

TEST(Step, RealizedQuadraticVariationMatchesItoCorrection) {
    Scheme quiet(GasModel{}, DiffusionFamily{}, small_params(false));
    auto q = sample_initial(InitialLaw{}, quiet, 6, 0);
    EXPECT_EQ(step(q, quiet).qv, 0.0);
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(true));
    double qv = 0.0, ito = 0.0;
    // ~2e4 effective chi-square(1) draws: standard error of the ratio about 0.01
    for (std::uint32_t path = 0; path < 400; ++path) {
        auto st = sample_initial(InitialLaw{}, s, 6, path);
        for (long n = 0; n < s.steps(); ++n) {
            const auto rec = step(st, s);
            ASSERT_GE(rec.qv, 0.0);
            qv += rec.qv;
            ito += rec.ito;
        }
    }
    EXPECT_NEAR(qv / ito, 1.0, 0.05);
}

TEST(Step, StepCountFromHorizon) {
    SimParams p = small_params(false);
    p.h = 1e-3;
    p.T = 10 * p.h;
    EXPECT_EQ(Scheme(GasModel{}, DiffusionFamily{}, p).steps(), 10);
}

TEST(Scheme, RejectsBadParameters) {
    GasModel gas;
    gas.beta = 5.0;
    EXPECT_THROW(Scheme(gas, DiffusionFamily{}, small_params(false)), ConfigError);
    SimParams p = small_params(false);
    p.h = 0.0;
    EXPECT_THROW(Scheme(GasModel{}, DiffusionFamily{}, p), ConfigError);
    p = small_params(false);
    p.R = -1.0;
    EXPECT_THROW(Scheme(GasModel{}, DiffusionFamily{}, p), ConfigError);
}

TEST(InitialLaw, ZeroAmplitudesGiveConstants) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(true));
    InitialLaw law;
    law.rho_sd = law.theta_sd = law.u0_sd = 0.0;
    law.rho_bar = 1.2;
    law.theta_bar = 0.8;
    const auto st = sample_initial(law, s, 1, 0);
    for (double r : st.rho) EXPECT_DOUBLE_EQ(r, 1.2);
    for (double t : st.theta) EXPECT_DOUBLE_EQ(t, 0.8);
    EXPECT_EQ(st.u, Vec::Zero(s.params().m));
}

TEST(InitialLaw, SamplesRespectSupportAndBoundary) {
    Scheme s(GasModel{}, DiffusionFamily{}, small_params(false));
    const InitialLaw law;
    const Grid& g = s.grid();
    for (std::uint32_t path = 0; path < 1000; ++path) {
        const auto st = sample_initial(law, s, 2024, path);
        const double mean = g.integrate(st.rho) / g.length();
        ASSERT_GT(mean, law.rho_low);
        ASSERT_LT(mean, law.rho_up);
        ASSERT_GT(*std::min_element(st.rho.begin(), st.rho.end()), 0.0);
        ASSERT_GT(*std::min_element(st.theta.begin(), st.theta.end()), 0.0);
        // one-sided difference at a Neumann-compatible end is O(dx^2) / dx = O(dx)
        const double slope_left = (st.rho[1] - st.rho[0]) / g.dx();
        const double slope_right = (st.rho[g.cells()] - st.rho[g.cells() - 1]) / g.dx();
        ASSERT_LE(std::abs(slope_left), 5.0 * g.dx());
        ASSERT_LE(std::abs(slope_right), 5.0 * g.dx());
    }
}

TEST(InitialLaw, RejectsInconsistentBounds) {
    InitialLaw law;
    law.rho_low = 1.5;
    EXPECT_THROW(validate_initial_law(law), ConfigError);
    law = InitialLaw{};
    law.rho_sd = 1.0;
    EXPECT_THROW(validate_initial_law(law), ConfigError);
    EXPECT_NO_THROW(validate_initial_law(InitialLaw{}));
}
