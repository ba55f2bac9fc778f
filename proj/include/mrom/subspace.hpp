#ifndef MROM_SUBSPACE_HPP
#define MROM_SUBSPACE_HPP

#include "mrom/field.hpp"

#include <Eigen/Dense>

#include <memory>

namespace mrom {

/// An M-orthonormal basis of a linear subspace of fields on one mesh.
/// A null mesh/metric denotes a plain Euclidean coefficient space (used by
/// the toy problems in the test suite).
struct Subspace {
    std::shared_ptr<const Mesh> mesh;
    FieldKind kind = FieldKind::velocity;
    std::shared_ptr<const MassMatrix> metric;
    Eigen::MatrixXd basis; // dof x n, columns M-orthonormal

    int dim() const { return static_cast<int>(basis.cols()); }
    int dof() const { return static_cast<int>(basis.rows()); }

    /// Coordinates of the orthogonal projection: basis^T M u.
    Eigen::VectorXd coords(const Eigen::VectorXd& u) const;
    Eigen::VectorXd coords(const Field& u) const;

    /// Orthogonal projection P u = basis (basis^T M u).
    Eigen::VectorXd project_coeffs(const Eigen::VectorXd& u) const;
    Field project(const Field& u) const;

    /// Gram matrix basis^T M basis; identity up to orthonormalization error.
    Eigen::MatrixXd gram() const;

    /// Subspace spanned by the first n basis columns.
    Subspace head(int n) const;
};

/// Throws ContractError unless both subspaces live on the same mesh, kind
/// and coefficient space.
void check_compatible(const Subspace& a, const Subspace& b);
void check_compatible(const Subspace& v, const Field& u);

/// Apply the metric (or identity when null) to the columns of X.
Eigen::MatrixXd apply_metric(const std::shared_ptr<const MassMatrix>& metric,
                             const Eigen::MatrixXd& X);

/// Modified Gram-Schmidt with a reorthogonalization pass against the metric.
/// Columns whose residual drops below drop_tol times their original norm are
/// discarded; the returned matrix has as many columns as survived.
Eigen::MatrixXd m_orthonormalize(const Eigen::MatrixXd& X,
                                 const std::shared_ptr<const MassMatrix>& metric,
                                 double drop_tol = 1e-10);

} // namespace mrom

#endif
