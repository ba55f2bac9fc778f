#include "mrom/field.hpp"
#include "mrom/errors.hpp"

#include <cmath>
#include <vector>

namespace mrom {

int components(FieldKind kind) {
    return kind == FieldKind::pressure ? 1 : 2;
}

Field::Field(std::shared_ptr<const Mesh> m, FieldKind k) : mesh(std::move(m)), kind(k) {
    coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(components(k)) * mesh->n_nodes());
}

Field::Field(std::shared_ptr<const Mesh> m, FieldKind k, Eigen::VectorXd c)
    : mesh(std::move(m)), kind(k), coeffs(std::move(c)) {
    validate();
}

void Field::validate() const {
    if (!mesh)
        throw ContractError("Field: missing mesh");
    if (coeffs.size() != static_cast<Eigen::Index>(components(kind)) * mesh->n_nodes())
        throw ContractError("Field: coefficient length does not match kind x node count");
    if (!coeffs.allFinite())
        throw ContractError("Field: non-finite coefficients");
}

namespace fem {

TriangleGeom triangle_geom(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                           const Eigen::Vector2d& p2) {
    TriangleGeom g;
    const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                       (p1.y() - p0.y()) * (p2.x() - p0.x());
    g.area = 0.5 * det;
    // grad lambda_k = (y_{k+1} - y_{k+2}, x_{k+2} - x_{k+1}) / (2A), cyclic
    const Eigen::Vector2d p[3] = {p0, p1, p2};
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d& a = p[(k + 1) % 3];
        const Eigen::Vector2d& b = p[(k + 2) % 3];
        g.grad(0, k) = (a.y() - b.y()) / det;
        g.grad(1, k) = (b.x() - a.x()) / det;
    }
    return g;
}

TriangleGeom triangle_geom(const Mesh& m, int t) {
    const auto& tri = m.triangles[t];
    return triangle_geom(m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]);
}

Eigen::SparseMatrix<double> scalar_mass(const Mesh& m) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(9) * m.n_triangles());
    for (int t = 0; t < m.n_triangles(); ++t) {
        const double a = m.triangle_area(t);
        const auto& tri = m.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(tri[i], tri[j], a / 12.0 * (i == j ? 2.0 : 1.0));
    }
    Eigen::SparseMatrix<double> M(m.n_nodes(), m.n_nodes());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

Eigen::SparseMatrix<double> scalar_stiffness(const Mesh& m) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(9) * m.n_triangles());
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto g = triangle_geom(m, t);
        const auto& tri = m.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(tri[i], tri[j], g.area * g.grad.col(i).dot(g.grad.col(j)));
    }
    Eigen::SparseMatrix<double> K(m.n_nodes(), m.n_nodes());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

} // namespace fem

std::shared_ptr<const MassMatrix> make_mass_matrix(std::shared_ptr<const Mesh> mesh,
                                                   FieldKind kind) {
    const int nc = components(kind);
    const int n = mesh->n_nodes();
    const Eigen::SparseMatrix<double> Ms = fem::scalar_mass(*mesh);

    auto mm = std::make_shared<MassMatrix>();
    mm->mesh = mesh;
    mm->kind = kind;
    if (nc == 1) {
        mm->mat = Ms;
    } else {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<size_t>(nc) * Ms.nonZeros());
        for (int k = 0; k < Ms.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(Ms, k); it; ++it)
                for (int c = 0; c < nc; ++c)
                    trip.emplace_back(static_cast<int>(it.row()) + c * n,
                                      static_cast<int>(it.col()) + c * n, it.value());
        mm->mat.resize(static_cast<Eigen::Index>(nc) * n, static_cast<Eigen::Index>(nc) * n);
        mm->mat.setFromTriplets(trip.begin(), trip.end());
    }
    return mm;
}

double inner(const MassMatrix& M, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != M.mat.rows() || b.size() != M.mat.rows())
        throw ContractError("inner: vector length does not match mass matrix");
    return a.dot(M.mat * b);
}

double inner(const MassMatrix& M, const Field& a, const Field& b) {
    if (a.mesh != M.mesh || b.mesh != M.mesh || a.kind != M.kind || b.kind != M.kind)
        throw ContractError("inner: field does not match mass matrix mesh/kind");
    return inner(M, a.coeffs, b.coeffs);
}

double norm(const MassMatrix& M, const Eigen::VectorXd& a) {
    return std::sqrt(std::max(0.0, inner(M, a, a)));
}

double norm(const MassMatrix& M, const Field& a) {
    return std::sqrt(std::max(0.0, inner(M, a, a)));
}

double divergence_l2(const Field& u) {
    if (u.kind == FieldKind::pressure)
        throw ContractError("divergence_l2: needs a vector field");
    const Mesh& m = *u.mesh;
    const int n = m.n_nodes();
    double acc = 0.0;
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto g = fem::triangle_geom(m, t);
        const auto& tri = m.triangles[t];
        double div = 0.0;
        for (int k = 0; k < 3; ++k)
            div += g.grad(0, k) * u.coeffs[tri[k]] + g.grad(1, k) * u.coeffs[n + tri[k]];
        acc += g.area * div * div;
    }
    return std::sqrt(acc);
}

} // namespace mrom
