#pragma once
// Vertex-centred grid on [0, L] with N cells and N+1 nodes.
//
// Nodal quadrature is the trapezoid rule (weights dx/2 at the two end nodes),
// faces sit at cell midpoints. The face gradient G and the nodal divergence D
// (zero flux through x = 0 and x = L) are adjoint in these inner products:
//     sum_i w_i q_i (D F)_i = - sum_f dx (G q)_f F_f
// which gives the Neumann condition and exact conservation for free.

#include "nsf/errors.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace nsf {

class Grid {
  public:
    Grid(int cells, double length) : N_(cells), L_(length) {
        if (cells < 2) throw ArgumentError("Grid: need at least 2 cells");
        if (!(length > 0.0) || !std::isfinite(length)) throw ArgumentError("Grid: length must be positive");
        dx_ = L_ / N_;
        x_.resize(N_ + 1);
        w_.assign(N_ + 1, dx_);
        for (int i = 0; i <= N_; ++i) x_[i] = i * dx_;
        w_.front() = w_.back() = 0.5 * dx_;
        xf_.resize(N_);
        for (int f = 0; f < N_; ++f) xf_[f] = (f + 0.5) * dx_;
    }

    [[nodiscard]] int cells() const { return N_; }
    [[nodiscard]] int nodes() const { return N_ + 1; }
    [[nodiscard]] double length() const { return L_; }
    [[nodiscard]] double dx() const { return dx_; }
    [[nodiscard]] const std::vector<double>& x() const { return x_; }
    [[nodiscard]] const std::vector<double>& weights() const { return w_; }
    [[nodiscard]] const std::vector<double>& faces() const { return xf_; }

    [[nodiscard]] double integrate(std::span<const double> q) const {
        double s = 0.0;
        for (int i = 0; i <= N_; ++i) s += w_[i] * q[i];
        return s;
    }

    /// Sum over faces with weight dx.
    [[nodiscard]] double integrate_faces(std::span<const double> qf) const {
        double s = 0.0;
        for (int f = 0; f < N_; ++f) s += qf[f];
        return s * dx_;
    }

    [[nodiscard]] std::vector<double> gradient(std::span<const double> q) const {
        std::vector<double> g(N_);
        for (int f = 0; f < N_; ++f) g[f] = (q[f + 1] - q[f]) / dx_;
        return g;
    }

    [[nodiscard]] std::vector<double> divergence(std::span<const double> flux) const {
        std::vector<double> d(N_ + 1);
        for (int i = 0; i <= N_; ++i) {
            const double right = i < N_ ? flux[i] : 0.0;
            const double left = i > 0 ? flux[i - 1] : 0.0;
            d[i] = (right - left) / w_[i];
        }
        return d;
    }

    /// D G q, the Neumann Laplacian.
    [[nodiscard]] std::vector<double> laplacian(std::span<const double> q) const { return divergence(gradient(q)); }

    /// Arithmetic face average.
    [[nodiscard]] std::vector<double> face_average(std::span<const double> q) const {
        std::vector<double> a(N_);
        for (int f = 0; f < N_; ++f) a[f] = 0.5 * (q[f] + q[f + 1]);
        return a;
    }

    /// Spreads a face density onto the nodes so that sum_i w_i out_i = sum_f dx in_f.
    [[nodiscard]] std::vector<double> faces_to_nodes(std::span<const double> qf) const {
        std::vector<double> out(N_ + 1, 0.0);
        for (int f = 0; f < N_; ++f) {
            out[f] += 0.5 * dx_ * qf[f];
            out[f + 1] += 0.5 * dx_ * qf[f];
        }
        for (int i = 0; i <= N_; ++i) out[i] /= w_[i];
        return out;
    }

  private:
    int N_;
    double L_;
    double dx_ = 0.0;
    std::vector<double> x_, w_, xf_;
};

/// Solves a tridiagonal system in place (Thomas algorithm).
/// lower[0] and upper[n-1] are ignored. rhs is overwritten with the solution.
inline void solve_tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                              std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

} // namespace nsf
