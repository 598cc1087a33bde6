#pragma once
// Velocity space H_m spanned by the Dirichlet eigenfunctions
// w_n(x) = sqrt(2/L) sin(n pi x / L), n = 1..m, with the trapezoid rule of the
// solver grid as inner product. For m < N the basis is exactly orthonormal in
// that inner product, so projection and the mass matrix need no Gram correction.

#include "nsf/errors.hpp"
#include "nsf/grid.hpp"
#include "nsf/noise.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace nsf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class GalerkinSpace {
  public:
    GalerkinSpace(int modes, const Grid& grid) : m_(modes), grid_(grid) {
        if (modes < 1) throw ArgumentError("GalerkinSpace: need at least one mode");
        if (modes >= grid.cells()) throw ArgumentError("GalerkinSpace: mode count must be below the cell count");
        const int n = grid.nodes(), nf = grid.cells();
        const double L = grid.length(), c = std::sqrt(2.0 / L);
        phi_.resize(m_, n);
        dphi_.resize(m_, n);
        phi_f_.resize(m_, nf);
        gphi_f_.resize(m_, nf);
        wphi_.resize(m_, n);
        for (int k = 0; k < m_; ++k) {
            const double q = (k + 1) * std::numbers::pi / L;
            for (int i = 0; i < n; ++i) {
                const double x = grid.x()[i];
                phi_(k, i) = c * std::sin(q * x);
                dphi_(k, i) = c * q * std::cos(q * x);
                wphi_(k, i) = grid.weights()[i] * phi_(k, i);
            }
            phi_(k, 0) = 0.0;
            phi_(k, n - 1) = 0.0;
            wphi_(k, 0) = wphi_(k, n - 1) = 0.0;
            for (int f = 0; f < nf; ++f) {
                phi_f_(k, f) = c * std::sin(q * grid.faces()[f]);
                gphi_f_(k, f) = (phi_(k, f + 1) - phi_(k, f)) / grid.dx();
            }
        }
    }

    [[nodiscard]] int modes() const { return m_; }
    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] double eigenvalue(int n) const {
        const double q = n * std::numbers::pi / grid_.length();
        return q * q;
    }

    [[nodiscard]] const Mat& values() const { return phi_; }         ///< m x nodes
    [[nodiscard]] const Mat& derivatives() const { return dphi_; }   ///< m x nodes, analytic
    [[nodiscard]] const Mat& face_values() const { return phi_f_; }  ///< m x faces, analytic at midpoints
    [[nodiscard]] const Mat& face_gradients() const { return gphi_f_; } ///< m x faces, G applied to nodal values

    /// c_n = <f, w_n> by trapezoid quadrature.
    [[nodiscard]] Vec project(std::span<const double> f) const {
        return wphi_ * Eigen::Map<const Vec>(f.data(), Eigen::Index(f.size()));
    }

    [[nodiscard]] std::vector<double> eval(const Vec& v) const {
        std::vector<double> out(grid_.nodes());
        Eigen::Map<Vec>(out.data(), Eigen::Index(out.size())) = phi_.transpose() * v;
        return out;
    }

    [[nodiscard]] std::vector<double> eval_gradient(const Vec& v) const {
        std::vector<double> out(grid_.nodes());
        Eigen::Map<Vec>(out.data(), Eigen::Index(out.size())) = dphi_.transpose() * v;
        return out;
    }

    [[nodiscard]] std::vector<double> eval_faces(const Vec& v) const {
        std::vector<double> out(grid_.cells());
        Eigen::Map<Vec>(out.data(), Eigen::Index(out.size())) = phi_f_.transpose() * v;
        return out;
    }

    /// Field and analytic gradient at the nodes.
    [[nodiscard]] std::pair<std::vector<double>, std::vector<double>> eval_and_grad(const Vec& v) const {
        return {eval(v), eval_gradient(v)};
    }

    /// Weak-form pairing sum_f dx q_f (row)_f of a face field with a face basis table.
    [[nodiscard]] Vec pair_faces(const Mat& table, std::span<const double> qf) const {
        return grid_.dx() * (table * Eigen::Map<const Vec>(qf.data(), Eigen::Index(qf.size())));
    }

    /// sum_i w_i q_i (row)_i against the nodal derivative table.
    [[nodiscard]] Vec pair_node_derivatives(std::span<const double> q) const {
        Vec wq(grid_.nodes());
        for (int i = 0; i < grid_.nodes(); ++i) wq[i] = grid_.weights()[i] * q[i];
        return dphi_ * wq;
    }

  private:
    int m_;
    Grid grid_;
    Mat phi_, dphi_, phi_f_, gphi_f_, wphi_;
};

class MassOperator {
  public:
    MassOperator() = default;
    explicit MassOperator(Mat M) : M_(std::move(M)), llt_(M_) {
        if (llt_.info() != Eigen::Success) throw StateError("mass matrix factorization failed");
    }

    [[nodiscard]] const Mat& matrix() const { return M_; }
    [[nodiscard]] Vec solve(const Vec& P) const { return llt_.solve(P); }

  private:
    Mat M_;
    Eigen::LLT<Mat> llt_;
};

/// M_ij = sum_k w_k rho_k w_i(x_k) w_j(x_k).
inline MassOperator assemble_mass(const GalerkinSpace& space, std::span<const double> rho) {
    const auto& g = space.grid();
    if (int(rho.size()) != g.nodes()) throw ArgumentError("assemble_mass: field size does not match the grid");
    Vec wr(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) {
        if (!(rho[i] > 0.0)) throw StateError("assemble_mass: density not positive at node " + std::to_string(i));
        wr[i] = g.weights()[i] * rho[i];
    }
    const Mat& phi = space.values();
    const Mat M = phi * wr.asDiagonal() * phi.transpose();
    return MassOperator(0.5 * (M + M.transpose()));
}

inline Vec mass_solve(const MassOperator& op, const Vec& P) { return op.solve(P); }

/// chi(|v| - R) v with the discrete L2 (coefficient) norm.
inline Vec cutoff_R(const Vec& v, double R) { return cutoff_chi(v.norm() - R) * v; }

inline double cutoff_factor(const Vec& v, double R) { return cutoff_chi(v.norm() - R); }

} // namespace nsf
