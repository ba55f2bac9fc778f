#ifndef MROM_STOKES_HPP
#define MROM_STOKES_HPP

#include "mrom/field.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <memory>
#include <utility>
#include <vector>

namespace mrom {

/// One point of the parameter set: time, inflow amplitude, viscosity.
struct ParameterSample {
    double t = 0.0;   // s
    double u0 = 0.5;  // cm/s
    double mu = 0.03; // poise

    /// Throws ContractError when outside t in [0, 0.5], u0 in [0.01, 1],
    /// mu in [0.01, 0.1].
    void validate() const;
};

/// Running totals of linear-algebra work, for performance accounting.
struct SolveStats {
    long factorizations = 0;
    long solves = 0;
    double max_rel_residual = 0.0;

    void merge(const SolveStats& other);
};

/// Implicit-Euler operator for the transient Stokes problem on one mesh:
/// (1/dt)<u,v> + mu <grad u, grad v> - <p, div v> + <div u, q>
/// + sum_T h_T^2 <grad p, grad q>_T  (pressure stabilization, P1-P1),
/// with Dirichlet velocity on inflow (parabolic profile) and walls (zero)
/// imposed by row elimination with symmetric right-hand-side correction,
/// and a natural (do-nothing) outflow. Factored once, reused every step.
class StokesOperator {
public:
    StokesOperator(std::shared_ptr<const Mesh> mesh, double mu, double dt);

    /// Advance one time step. `inflow_scale` multiplies the unit parabolic
    /// profile (pass u0*sin(2*pi*t), or u0 in steady mode).
    std::pair<Field, Field> step(const Field& u_prev, double inflow_scale,
                                 SolveStats* stats = nullptr) const;

    /// Quadratic form of the pressure-stabilization block.
    double stabilization_form(const Field& p) const;

    const std::shared_ptr<const Mesh>& mesh() const { return mesh_; }
    int n_dof() const { return 3 * static_cast<int>(mesh_->n_nodes()); }
    double dt() const { return dt_; }
    const Eigen::SparseMatrix<double>& matrix() const { return A_; }

private:
    std::shared_ptr<const Mesh> mesh_;
    double mu_ = 0.0;
    double dt_ = 0.0;
    Eigen::SparseMatrix<double> A_;        // constrained system, 3n x 3n
    Eigen::SparseMatrix<double> stab_;     // pressure stabilization block, n x n
    Eigen::SparseMatrix<double> mass_vel_; // velocity mass, 2n x 2n
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    Eigen::VectorXd g_unit_;    // unit-inflow Dirichlet values on all 3n dofs
    Eigen::VectorXd coupling_;  // unconstrained A * g_unit (rhs correction)
    std::vector<char> is_dirichlet_;
};

/// Integral of u . n over all boundary edges with the given tag
/// (n = outward normal; exact for P1 velocity).
double boundary_flux(const Field& u, BoundaryTag tag);

/// Run the transient problem from u = 0 with inflow u0 * profile * sin(2 pi t)
/// and return the velocity at t = dt, 2 dt, ..., T_end.
struct Trajectory {
    std::vector<double> times;
    std::vector<Field> velocity;
};

Trajectory simulate(const std::shared_ptr<const Mesh>& mesh, double u0, double mu,
                    double dt, double t_end, SolveStats* stats = nullptr);

/// Validation mode: constant inflow amplitude u0, stepped until the relative
/// increment drops below `tol`. Returns (velocity, pressure).
std::pair<Field, Field> solve_steady(const std::shared_ptr<const Mesh>& mesh, double u0,
                                     double mu, double dt, double tol = 1e-10,
                                     int max_steps = 20000, SolveStats* stats = nullptr);

} // namespace mrom

#endif
