#ifndef MROM_PBDW_HPP
#define MROM_PBDW_HPP

#include "mrom/rom.hpp"
#include "mrom/subspace.hpp"

#include <vector>

namespace mrom {

/// Inf-sup stability constant beta(E, F) = min singular value of the
/// cross-Gramian of the orthonormal bases: the smallest cosine of the
/// principal angles, i.e. inf over e in E of ||P_F e|| / ||e||.
/// Returns 0 when dim E > dim F (the projection onto F has a kernel in E).
double inf_sup_beta(const Subspace& E, const Subspace& F);

/// Output of one reconstruction. `mesh` is empty for toy coefficient spaces;
/// estimate_field() then refuses to wrap the coefficients.
struct ReconstructionResult {
    std::shared_ptr<const Mesh> mesh;
    FieldKind kind = FieldKind::velocity;
    Eigen::VectorXd estimate;     // full coefficient vector
    Eigen::VectorXd coeffs_V;     // z*: coordinates in V's basis
    Eigen::VectorXd correction_W; // y' - C z*: coordinates in W's basis
    double beta = 0.0;

    Field estimate_field() const;
};

/// Reconstruct the state from the orthonormal observation coordinates y'
/// (the coordinates of P_W u in W's orthonormal basis): minimize the
/// distance to V over the affine set omega + W-perp. Algebraically:
/// z* = argmin ||y' - C z|| with C the W-by-V cross-Gramian, and
/// estimate = Phi z* + Psi (y' - C z*).
/// Throws ContractError when dim V > dim W and IllPosedError when
/// beta(V, W) <= 1e-12 (the minimizer is no longer unique).
ReconstructionResult reconstruct(const Eigen::VectorXd& y_ortho, const Subspace& V,
                                 const Subspace& W);

/// A-posteriori check of the stability bound
/// ||u - estimate|| <= dist(u, V) / beta(V, W).
struct ErrorBoundReport {
    double error = 0.0;  // ||u - estimate||
    double dist_V = 0.0; // ||u - P_V u||
    double beta = 0.0;
    double bound = 0.0;  // dist_V / beta
    bool holds = false;  // error <= bound * (1 + 1e-9)
};

ErrorBoundReport error_bound_check(const Field& u, const ReconstructionResult& result,
                                   const Subspace& V);

/// Reconstruction-error curve over the reduced dimension. For each
/// n = 1..n_max the validation snapshots are reconstructed with the first n
/// basis vectors of V_full; the curve stops early if beta(V_n, W) falls
/// below 1e-12. n_star is the argmin (smallest n on ties).
struct SweepResult {
    std::vector<int> n;
    std::vector<double> error;
    std::vector<double> beta;
    int n_star = 0;
};

SweepResult sweep_n(const std::vector<Field>& validation, const Subspace& V_full,
                    const Subspace& W, ErrorMode mode, int n_max = -1);

} // namespace mrom

#endif
