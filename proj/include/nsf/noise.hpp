#pragma once
// Truncated cylindrical Wiener driver and the diffusion coefficients F_k with
// their density/velocity cut-off and spatial mollification.

#include "nsf/counter_rng.hpp"
#include "nsf/errors.hpp"
#include "nsf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace nsf {

/// 1 for z <= 0, 0 for z >= 1, C^2 quintic in between.
inline double cutoff_chi(double z) {
    if (z <= 0.0) return 1.0;
    if (z >= 1.0) return 0.0;
    return 1.0 - z * z * z * (10.0 - 15.0 * z + 6.0 * z * z);
}

/// K independent Brownian motions sampled on a uniform time grid.
///
/// With substeps = s each increment over h is the sum of s draws of variance
/// h/s keyed by the fine step index. A run with step h and s substeps and a run
/// with step h/s and one substep therefore see the same Brownian path.
class WienerDriver {
  public:
    WienerDriver() = default;
    WienerDriver(int modes, std::uint64_t seed, std::uint32_t path, int substeps = 1)
        : K_(modes), seed_(seed), path_(path), substeps_(substeps) {
        if (modes < 0) throw ArgumentError("WienerDriver: negative mode count");
        if (substeps < 1) throw ArgumentError("WienerDriver: substeps must be >= 1");
    }

    std::vector<double> sample_increments(double h) {
        if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("sample_increments: step must be positive");
        std::vector<double> dW(K_, 0.0);
        const double sd = std::sqrt(h / substeps_);
        for (int k = 0; k < K_; ++k) {
            double s = 0.0;
            for (int j = 0; j < substeps_; ++j)
                s += counter_normal(seed_, Stream::wiener, fine_step_ + j, std::uint32_t(k), path_);
            dW[k] = sd * s;
        }
        fine_step_ += substeps_;
        t_ += h;
        return dW;
    }

    [[nodiscard]] int modes() const { return K_; }
    [[nodiscard]] double time() const { return t_; }
    [[nodiscard]] std::uint64_t fine_step() const { return fine_step_; }
    [[nodiscard]] std::uint32_t path() const { return path_; }

  private:
    int K_ = 0;
    std::uint64_t seed_ = 0;
    std::uint32_t path_ = 0;
    int substeps_ = 1;
    std::uint64_t fine_step_ = 0;
    double t_ = 0.0;
};

/// Norm of the auxiliary space carrying W: sqrt(sum_k alpha_k^2 / k^2), modes counted from 1.
inline double u0_norm(std::span<const double> alpha) {
    double s = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        const double kk = double(k + 1);
        s += alpha[k] * alpha[k] / (kk * kk);
    }
    return std::sqrt(s);
}

struct DiffusionFamily {
    double f0 = 0.1;
    double sigma_u = 0.1;
    int K = 8;
    double eps = 0.1;
    double xi = 0.15;
    double hxi_margin = 0.1;
    double L = 1.0;

    /// f_k = f0 / k^2, k >= 1.
    [[nodiscard]] double f(int k) const { return f0 / (double(k) * k); }

    /// Lipschitz/growth constant including the spatial frequency k pi / L.
    [[nodiscard]] double f_tilde(int k) const {
        return f(k) * std::max({1.0, sigma_u, k * std::numbers::pi / L});
    }

    [[nodiscard]] double tail_sum_sq(int from_k, int to_k) const {
        double s = 0.0;
        for (int k = from_k; k <= to_k; ++k) s += f(k) * f(k);
        return s;
    }
};

/// F_k(x, rho, theta, u) for k = 1..K. The spatial dimension is one, so each F_k is a scalar.
inline std::vector<double> eval_F(const DiffusionFamily& fam, double x, double rho, double theta, double u) {
    if (!(theta > 0.0)) throw DomainError("eval_F: temperature must be positive");
    if (!(rho >= 0.0)) throw DomainError("eval_F: density must be nonnegative");
    std::vector<double> F(fam.K);
    const double th = theta / (1.0 + theta);
    for (int k = 1; k <= fam.K; ++k)
        F[k - 1] = fam.f(k) * (std::sin(k * std::numbers::pi * x / fam.L) * th + fam.sigma_u * u);
    return F;
}

/// Cut-off factor chi(eps/rho - 1) chi(|u| - 1/eps); zero in vacuum without dividing.
inline double eps_cutoff_factor(double eps, double rho, double u) {
    if (!(eps > 0.0)) throw ArgumentError("regularize_eps: eps must be positive");
    const double c_rho = rho <= 0.5 * eps ? 0.0 : cutoff_chi(eps / rho - 1.0);
    return c_rho * cutoff_chi(std::abs(u) - 1.0 / eps);
}

inline std::vector<double> regularize_eps(const DiffusionFamily& fam, std::vector<double> F, double rho, double u) {
    const double c = eps_cutoff_factor(fam.eps, rho, u);
    for (double& v : F) v *= c;
    return F;
}

/// Smooth interior indicator: 0 within margin + xi of either end, 1 beyond margin + 2 xi.
inline double interior_indicator(const DiffusionFamily& fam, double x) {
    const double d = std::min(x, fam.L - x) - fam.hxi_margin - fam.xi;
    if (d <= 0.0) return 0.0;
    if (d >= fam.xi) return 1.0;
    return 1.0 - cutoff_chi(d / fam.xi);
}

/// Discrete convolution weights dx * omega_xi(j dx), j = -J..J, with the bump
/// (1 - s^2)^3 and the discrete sum normalized to one.
class Mollifier {
  public:
    Mollifier(const DiffusionFamily& fam, const Grid& grid) {
        if (!(fam.xi > 0.0)) throw ConfigError("mollifier width xi must be positive");
        if (grid.dx() > 0.5 * fam.xi)
            throw ConfigError("grid spacing dx = " + std::to_string(grid.dx()) + " exceeds xi/2 = " +
                              std::to_string(0.5 * fam.xi) + "; refine the grid or widen xi");
        J_ = int(std::ceil(fam.xi / grid.dx()));
        wts_.assign(2 * J_ + 1, 0.0);
        double s = 0.0;
        for (int j = -J_; j <= J_; ++j) {
            const double r = j * grid.dx() / fam.xi;
            const double v = std::abs(r) < 1.0 ? std::pow(1.0 - r * r, 3) : 0.0;
            wts_[j + J_] = v;
            s += v;
        }
        for (double& v : wts_) v /= s;
        hxi_.resize(grid.nodes());
        for (int i = 0; i < grid.nodes(); ++i) hxi_[i] = interior_indicator(fam, grid.x()[i]);
    }

    /// Convolution of the field with the kernel; values outside [0, L] count as zero.
    [[nodiscard]] std::vector<double> convolve(std::span<const double> g) const {
        const int n = int(g.size());
        std::vector<double> out(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            const int lo = std::max(0, i - J_), hi = std::min(n - 1, i + J_);
            for (int j = lo; j <= hi; ++j) s += wts_[j - i + J_] * g[j];
            out[i] = s;
        }
        return out;
    }

    [[nodiscard]] const std::vector<double>& indicator() const { return hxi_; }
    [[nodiscard]] int half_width() const { return J_; }

  private:
    int J_ = 0;
    std::vector<double> wts_;
    std::vector<double> hxi_;
};

/// omega_xi * (h_xi F).
inline std::vector<double> mollify_xi(const Mollifier& mol, std::span<const double> field, bool apply_indicator = true) {
    if (!apply_indicator) return mol.convolve(field);
    std::vector<double> g(field.begin(), field.end());
    const auto& h = mol.indicator();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= h[i];
    return mol.convolve(g);
}

inline std::vector<double> mollify_xi(const DiffusionFamily& fam, std::span<const double> field, const Grid& grid,
                                      bool apply_indicator = true) {
    return mollify_xi(Mollifier(fam, grid), field, apply_indicator);
}

} // namespace nsf
