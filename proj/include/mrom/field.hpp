#ifndef MROM_FIELD_HPP
#define MROM_FIELD_HPP

#include "mrom/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>

namespace mrom {

enum class FieldKind { velocity, pressure, displacement };

/// Scalar components per node for a field kind (velocity/displacement: 2).
int components(FieldKind kind);

/// P1 finite-element coefficient vector on a mesh. Coefficients are stored
/// component-major: [c0 at all nodes | c1 at all nodes].
struct Field {
    std::shared_ptr<const Mesh> mesh;
    FieldKind kind = FieldKind::velocity;
    Eigen::VectorXd coeffs;

    Field() = default;
    Field(std::shared_ptr<const Mesh> m, FieldKind k);
    Field(std::shared_ptr<const Mesh> m, FieldKind k, Eigen::VectorXd c);

    int dof() const { return static_cast<int>(coeffs.size()); }

    /// Value of component c at node i.
    double at(int node, int c = 0) const { return coeffs[c * mesh->n_nodes() + node]; }
    double& at(int node, int c = 0) { return coeffs[c * mesh->n_nodes() + node]; }

    /// Throws ContractError if the coefficient length does not match the
    /// kind/mesh, or any entry is non-finite.
    void validate() const;
};

/// Sparse SPD Gram matrix of the L2 inner product for one field kind.
struct MassMatrix {
    std::shared_ptr<const Mesh> mesh;
    FieldKind kind = FieldKind::velocity;
    Eigen::SparseMatrix<double> mat;

    int dof() const { return static_cast<int>(mat.rows()); }
};

/// Assemble the consistent P1 mass matrix for `kind` on `mesh`
/// (block-diagonal over components).
std::shared_ptr<const MassMatrix> make_mass_matrix(std::shared_ptr<const Mesh> mesh,
                                                   FieldKind kind);

double inner(const MassMatrix& M, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double inner(const MassMatrix& M, const Field& a, const Field& b);
double norm(const MassMatrix& M, const Eigen::VectorXd& a);
double norm(const MassMatrix& M, const Field& a);

/// L2 norm of the elementwise (P0) divergence of a velocity field.
double divergence_l2(const Field& u);

namespace fem {

/// Area and P1 shape-function gradients of one triangle.
struct TriangleGeom {
    double area = 0.0;
    Eigen::Matrix<double, 2, 3> grad; // grad(:,k) = nabla lambda_k
};

TriangleGeom triangle_geom(const Mesh& m, int t);
TriangleGeom triangle_geom(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                           const Eigen::Vector2d& p2);

/// Scalar P1 mass matrix (n_nodes x n_nodes).
Eigen::SparseMatrix<double> scalar_mass(const Mesh& m);

/// Scalar P1 stiffness matrix, full gradient inner product.
Eigen::SparseMatrix<double> scalar_stiffness(const Mesh& m);

} // namespace fem

} // namespace mrom

#endif
