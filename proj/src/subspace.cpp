#include "mrom/subspace.hpp"
#include "mrom/errors.hpp"

#include <cmath>

namespace mrom {

Eigen::VectorXd Subspace::coords(const Eigen::VectorXd& u) const {
    if (u.size() != basis.rows())
        throw ContractError("Subspace::coords: dof mismatch");
    if (metric)
        return basis.transpose() * (metric->mat * u);
    return basis.transpose() * u;
}

Eigen::VectorXd Subspace::coords(const Field& u) const {
    check_compatible(*this, u);
    return coords(u.coeffs);
}

Eigen::VectorXd Subspace::project_coeffs(const Eigen::VectorXd& u) const {
    return basis * coords(u);
}

Field Subspace::project(const Field& u) const {
    check_compatible(*this, u);
    return Field(u.mesh, u.kind, basis * coords(u.coeffs));
}

Eigen::MatrixXd Subspace::gram() const {
    return basis.transpose() * apply_metric(metric, basis);
}

Subspace Subspace::head(int n) const {
    if (n < 1 || n > dim())
        throw ContractError("Subspace::head: n outside [1, dim]");
    Subspace s = *this;
    s.basis = basis.leftCols(n);
    return s;
}

void check_compatible(const Subspace& a, const Subspace& b) {
    if (a.mesh != b.mesh || a.kind != b.kind || a.dof() != b.dof())
        throw ContractError("subspaces live on different meshes or coefficient spaces");
}

void check_compatible(const Subspace& v, const Field& u) {
    if (v.mesh != u.mesh || v.kind != u.kind)
        throw ContractError("field does not match subspace mesh/kind");
}

Eigen::MatrixXd apply_metric(const std::shared_ptr<const MassMatrix>& metric,
                             const Eigen::MatrixXd& X) {
    if (!metric)
        return X;
    if (X.rows() != metric->mat.rows())
        throw ContractError("apply_metric: dof mismatch");
    return metric->mat * X;
}

Eigen::MatrixXd m_orthonormalize(const Eigen::MatrixXd& X,
                                 const std::shared_ptr<const MassMatrix>& metric,
                                 double drop_tol) {
    const Eigen::Index dof = X.rows();
    Eigen::MatrixXd Q(dof, X.cols());
    Eigen::MatrixXd MQ(dof, X.cols()); // metric * kept columns, cached
    Eigen::Index kept = 0;

    auto metric_dot = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return metric ? Eigen::VectorXd(metric->mat * v) : v;
    };

    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        Eigen::VectorXd v = X.col(j);
        const double norm0 = std::sqrt(std::max(0.0, v.dot(metric_dot(v))));
        if (!(norm0 > 0.0))
            continue;
        for (int pass = 0; pass < 2; ++pass)
            if (kept > 0)
                v -= Q.leftCols(kept) * (MQ.leftCols(kept).transpose() * v);
        const Eigen::VectorXd mv = metric_dot(v);
        const double nrm = std::sqrt(std::max(0.0, v.dot(mv)));
        if (nrm < drop_tol * norm0)
            continue;
        Q.col(kept) = v / nrm;
        MQ.col(kept) = mv / nrm;
        ++kept;
    }
    return Q.leftCols(kept);
}

} // namespace mrom
