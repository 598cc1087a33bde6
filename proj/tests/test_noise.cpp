#include "nsf/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace nsf;

TEST(Wiener, MomentsOfIncrements) {
    const double h = 0.01;
    const int n = 100000;
    double s = 0.0, s2 = 0.0, s_scaled = 0.0;
    // one draw per path index so the samples are independent keys
    for (int p = 0; p < n; ++p) {
        WienerDriver d(2, 42, std::uint32_t(p));
        const auto dW = d.sample_increments(h);
        s_scaled += dW[0] / std::sqrt(h);
        s += dW[1];
        s2 += dW[1] * dW[1];
    }
    EXPECT_LE(std::abs(s_scaled / n), 0.02);
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    EXPECT_NEAR(var, h, 0.02 * h);
}

TEST(Wiener, IndependentAcrossModesAndSteps) {
    WienerDriver d(4, 7, 0);
    const int steps = 20000;
    double c01 = 0.0, lag = 0.0, prev = 0.0;
    for (int k = 0; k < steps; ++k) {
        const auto dW = d.sample_increments(1.0);
        c01 += dW[0] * dW[1];
        lag += dW[2] * prev;
        prev = dW[2];
    }
    // correlations of unit normals, standard error 1/sqrt(n)
    EXPECT_LE(std::abs(c01 / steps), 4.0 / std::sqrt(double(steps)));
    EXPECT_LE(std::abs(lag / steps), 4.0 / std::sqrt(double(steps)));
}

TEST(Wiener, KeyedDeterminism) {
    EXPECT_EQ(counter_normal(9, Stream::wiener, 17, 3, 5), counter_normal(9, Stream::wiener, 17, 3, 5));
    EXPECT_NE(counter_normal(9, Stream::wiener, 17, 3, 5), counter_normal(9, Stream::wiener, 17, 3, 6));
    WienerDriver a(3, 11, 2), b(3, 11, 2);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(a.sample_increments(0.1), b.sample_increments(0.1));
    EXPECT_NEAR(a.time(), 5.0, 1e-12);
}

TEST(Wiener, SubstepsSumFinePath) {
    WienerDriver coarse(3, 5, 1, 4), fine(3, 5, 1, 1);
    for (int k = 0; k < 10; ++k) {
        const auto c = coarse.sample_increments(0.04);
        std::vector<double> acc(3, 0.0);
        for (int j = 0; j < 4; ++j) {
            const auto f = fine.sample_increments(0.01);
            for (int m = 0; m < 3; ++m) acc[m] += f[m];
        }
        for (int m = 0; m < 3; ++m) EXPECT_NEAR(c[m], acc[m], 1e-14);
    }
}

TEST(Wiener, RejectsNonPositiveStep) {
    WienerDriver d(1, 0, 0);
    EXPECT_THROW(d.sample_increments(0.0), ArgumentError);
    EXPECT_THROW(d.sample_increments(-1.0), ArgumentError);
}

TEST(Wiener, MartingaleSums) {
    // sum_n g(t_n) dW_n with bounded predictable g has mean zero
    const int paths = 2000, steps = 50;
    const double h = 0.02;
    std::vector<double> sums(paths);
    for (int p = 0; p < paths; ++p) {
        WienerDriver d(1, 3, std::uint32_t(p));
        double w = 0.0, s = 0.0;
        for (int n = 0; n < steps; ++n) {
            const double g = std::tanh(w) + std::cos(n * h);
            const double dW = d.sample_increments(h)[0];
            s += g * dW;
            w += dW;
        }
        sums[p] = s;
    }
    double m = 0.0, v = 0.0;
    for (double s : sums) m += s;
    m /= paths;
    for (double s : sums) v += (s - m) * (s - m);
    v /= paths - 1;
    EXPECT_LE(std::abs(m), 3.0 * std::sqrt(v / paths));
}

TEST(U0Norm, Values) {
    EXPECT_DOUBLE_EQ(u0_norm(std::vector<double>{1.0}), 1.0);
    EXPECT_NEAR(u0_norm(std::vector<double>{0.0, 0.0, 1.0}), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(u0_norm(std::vector<double>{0.0, 0.0}), 0.0);
}

TEST(DiffusionFamily, EvalValues) {
    DiffusionFamily f;
    f.f0 = 0.1;
    f.L = 1.0;
    const auto F = eval_F(f, 0.5, 1.0, 1.0, 0.0);
    EXPECT_NEAR(F[0], 0.05, 1e-15);
    for (double v : eval_F(f, 0.0, 1.0, 1.0, 0.0)) EXPECT_EQ(v, 0.0);
    f.K = 20000;
    EXPECT_NEAR(f.tail_sum_sq(1, f.K), 0.01 * std::pow(std::numbers::pi, 4) / 90.0, 1e-9);
}

TEST(DiffusionFamily, LipschitzBounds) {
    DiffusionFamily f;
    f.L = 4.0;
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> ux(-5.0, 5.0), xs(0.0, 4.0), rs(0.1, 3.0), ts(0.1, 5.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double x = xs(gen), r = rs(gen), t = ts(gen), u1 = ux(gen), u2 = ux(gen);
        const double x2 = xs(gen), t2 = ts(gen);
        const auto a = eval_F(f, x, r, t, u1), b = eval_F(f, x, r, t, u2);
        const auto c = eval_F(f, x2, r, t, u1), d = eval_F(f, x, r, t2, u1);
        const auto z = eval_F(f, x, r, t, 0.0);
        for (int k = 1; k <= f.K; ++k) {
            const double ft = f.f_tilde(k) * (1.0 + 1e-12);
            EXPECT_LE(std::abs(a[k - 1] - b[k - 1]), ft * std::abs(u1 - u2));
            EXPECT_LE(std::abs(a[k - 1] - c[k - 1]), ft * std::abs(x - x2));
            EXPECT_LE(std::abs(a[k - 1] - d[k - 1]), ft * std::abs(t - t2));
            EXPECT_LE(std::abs(z[k - 1]), f.f(k));
        }
        // no density dependence at all
        EXPECT_EQ(eval_F(f, x, r, t, u1), eval_F(f, x, 2.0 * r, t, u1));
    }
}

TEST(Cutoff, Chi) {
    EXPECT_EQ(cutoff_chi(-2.0), 1.0);
    EXPECT_EQ(cutoff_chi(0.0), 1.0);
    EXPECT_DOUBLE_EQ(cutoff_chi(0.5), 0.5);
    EXPECT_EQ(cutoff_chi(1.7), 0.0);
    double prev = 1.0;
    for (int i = 0; i <= 100; ++i) {
        const double c = cutoff_chi(i / 100.0);
        EXPECT_LE(c, prev);
        prev = c;
    }
}

TEST(Cutoff, RegularizeEps) {
    DiffusionFamily f;
    f.eps = 0.01;
    const std::vector<double> F{1.0, -2.0, 3.0};
    EXPECT_EQ(regularize_eps(f, F, 1.0, 1.0), F);
    for (double v : regularize_eps(f, F, 0.004, 0.0)) EXPECT_EQ(v, 0.0);
    for (double v : regularize_eps(f, F, 0.0, 0.0)) EXPECT_EQ(v, 0.0);
    const auto half = regularize_eps(f, F, 1.0, 100.5);
    for (std::size_t k = 0; k < F.size(); ++k) EXPECT_NEAR(half[k], 0.5 * F[k], 1e-12);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> rs(0.0, 0.05), us(-200.0, 200.0);
    for (int t = 0; t < 1000; ++t) {
        const auto R = regularize_eps(f, F, rs(gen), us(gen));
        for (std::size_t k = 0; k < F.size(); ++k) EXPECT_LE(std::abs(R[k]), std::abs(F[k]));
    }
}

TEST(Mollifier, PreservesConstantsInInterior) {
    DiffusionFamily f;
    f.L = 4.0;
    f.xi = 0.15;
    Grid g(256, 4.0);
    const std::vector<double> c(g.nodes(), 3.7);
    const auto out = mollify_xi(f, c, g, false);
    EXPECT_NEAR(out[g.nodes() / 2], 3.7, 1e-12);
}

TEST(Mollifier, VanishesNearBoundary) {
    DiffusionFamily f;
    f.L = 4.0;
    Grid g(256, 4.0);
    std::vector<double> v(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) v[i] = 1.0 + std::sin(3.0 * g.x()[i]);
    const auto out = mollify_xi(f, v, g);
    for (int i = 0; i < g.nodes(); ++i) {
        const double x = g.x()[i];
        if (x < f.hxi_margin || x > f.L - f.hxi_margin) EXPECT_EQ(out[i], 0.0) << x;
    }
}

TEST(Mollifier, LinearFieldMatchesDenseQuadrature) {
    DiffusionFamily f;
    f.L = 4.0;
    f.xi = 0.2;
    Grid g(400, 4.0);
    std::vector<double> v(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) v[i] = 2.5 * g.x()[i];
    const auto out = mollify_xi(f, v, g, false);
    // symmetric kernel reproduces linear functions away from the ends
    for (int i = 40; i < g.nodes() - 40; ++i) EXPECT_NEAR(out[i], v[i], 1e-10);
}

TEST(Mollifier, SupNormBoundAndLinearity) {
    DiffusionFamily f;
    f.L = 4.0;
    Grid g(128, 4.0);
    std::mt19937_64 gen(4);
    std::normal_distribution<double> n01;
    std::vector<double> a(g.nodes()), b(g.nodes()), ab(g.nodes());
    double sup = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
        a[i] = n01(gen);
        b[i] = n01(gen);
        ab[i] = 2.0 * a[i] - 3.0 * b[i];
        sup = std::max(sup, std::abs(a[i]));
    }
    const Mollifier mol(f, g);
    const auto ma = mollify_xi(mol, a), mb = mollify_xi(mol, b), mab = mollify_xi(mol, ab);
    for (int i = 0; i < g.nodes(); ++i) {
        EXPECT_LE(std::abs(ma[i]), sup + 1e-14);
        EXPECT_NEAR(mab[i], 2.0 * ma[i] - 3.0 * mb[i], 1e-12);
    }
}

TEST(Mollifier, CoarseGridRejected) {
    DiffusionFamily f;
    f.L = 4.0;
    f.xi = 0.15;
    EXPECT_THROW(Mollifier(f, Grid(16, 4.0)), ConfigError);
}

TEST(Philox, KnownAnswerVectors) {
    using A4 = std::array<std::uint32_t, 4>;
    EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}
