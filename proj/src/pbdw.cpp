#include "mrom/pbdw.hpp"

#include "mrom/errors.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrom {

namespace {

void check_same_space(const Subspace& a, const Subspace& b, const char* who) {
    check_compatible(a, b);
    const bool am = static_cast<bool>(a.metric), bm = static_cast<bool>(b.metric);
    if (am != bm) throw ContractError(std::string(who) + ": one subspace is Euclidean, the other metric-weighted");
    if (am && bm && (a.metric->mesh != b.metric->mesh || a.metric->kind != b.metric->kind))
        throw ContractError(std::string(who) + ": subspace metrics disagree");
}

/// Cross-Gramian of orthonormal bases: E^T M F (dim E x dim F).
Eigen::MatrixXd cross_gramian(const Subspace& E, const Subspace& F) {
    return apply_metric(E.metric, E.basis).transpose() * F.basis;
}

} // namespace

double inf_sup_beta(const Subspace& E, const Subspace& F) {
    check_same_space(E, F, "inf_sup_beta");
    if (E.dim() < 1 || F.dim() < 1) throw ContractError("inf_sup_beta: empty subspace");
    if (E.dim() > F.dim()) return 0.0;
    const Eigen::MatrixXd C = cross_gramian(E, F).transpose(); // F x E
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const double smin = svd.singularValues().tail<1>()(0);
    return std::clamp(smin, 0.0, 1.0);
}

Field ReconstructionResult::estimate_field() const {
    if (!mesh) throw ContractError("ReconstructionResult: no mesh attached (toy space)");
    return Field(mesh, kind, estimate);
}

ReconstructionResult reconstruct(const Eigen::VectorXd& y_ortho, const Subspace& V,
                                 const Subspace& W) {
    check_same_space(V, W, "reconstruct");
    const int n = V.dim(), m = W.dim();
    if (n > m)
        throw ContractError("reconstruct: reduced dimension exceeds measurement count (beta = 0)");
    if (y_ortho.size() != m)
        throw ContractError("reconstruct: measurement coordinate length does not match dim W");

    const Eigen::MatrixXd C = cross_gramian(V, W).transpose(); // m x n

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const double beta = std::clamp(svd.singularValues().tail<1>()(0), 0.0, 1.0);
    if (beta <= 1e-12)
        throw IllPosedError("reconstruct: inf-sup constant below 1e-12, minimizer not unique");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C);
    qr.setThreshold(1e-12);
    const Eigen::VectorXd z = qr.solve(y_ortho);
    const Eigen::VectorXd eta = y_ortho - C * z;

    ReconstructionResult r;
    r.mesh = V.mesh;
    r.kind = V.kind;
    r.coeffs_V = z;
    r.correction_W = eta;
    r.beta = beta;
    r.estimate = V.basis * z + W.basis * eta;
    return r;
}

ErrorBoundReport error_bound_check(const Field& u, const ReconstructionResult& result,
                                   const Subspace& V) {
    check_compatible(V, u);
    if (result.estimate.size() != u.coeffs.size())
        throw ContractError("error_bound_check: estimate size mismatch");

    const auto nrm = [&](const Eigen::VectorXd& v) {
        return V.metric ? norm(*V.metric, v) : v.norm();
    };

    ErrorBoundReport rep;
    rep.error = nrm(u.coeffs - result.estimate);
    rep.dist_V = nrm(u.coeffs - V.project_coeffs(u.coeffs));
    rep.beta = result.beta;
    rep.bound = rep.dist_V / rep.beta;
    rep.holds = rep.error <= rep.bound * (1.0 + 1e-9) ||
                (rep.error <= 1e-9 && rep.dist_V <= 1e-9);
    return rep;
}

SweepResult sweep_n(const std::vector<Field>& validation, const Subspace& V_full,
                    const Subspace& W, ErrorMode mode, int n_max) {
    if (validation.empty()) throw ContractError("sweep_n: empty validation set");
    check_same_space(V_full, W, "sweep_n");

    const int m = W.dim();
    const int cap = std::min(n_max > 0 ? n_max : V_full.dim(), std::min(V_full.dim(), m));

    // Orthonormal observation coordinates of every validation snapshot.
    const Eigen::MatrixXd MW = apply_metric(W.metric, W.basis); // dof x m
    Eigen::MatrixXd Y(m, static_cast<Eigen::Index>(validation.size()));
    for (std::size_t j = 0; j < validation.size(); ++j) {
        check_compatible(V_full, validation[j]);
        Y.col(static_cast<Eigen::Index>(j)) = MW.transpose() * validation[j].coeffs;
    }

    SweepResult out;
    double best = std::numeric_limits<double>::infinity();
    for (int nn = 1; nn <= cap; ++nn) {
        const Subspace Vn = V_full.head(nn);
        const double beta = inf_sup_beta(Vn, W);
        if (beta <= 1e-12) break;

        double worst = 0.0, acc = 0.0;
        for (std::size_t j = 0; j < validation.size(); ++j) {
            const ReconstructionResult r = reconstruct(Y.col(static_cast<Eigen::Index>(j)), Vn, W);
            const Eigen::VectorXd diff = validation[j].coeffs - r.estimate;
            const double e = Vn.metric ? norm(*Vn.metric, diff) : diff.norm();
            worst = std::max(worst, e);
            acc += e * e;
        }
        const double err = mode == ErrorMode::worst_case
                               ? worst
                               : std::sqrt(acc / static_cast<double>(validation.size()));
        out.n.push_back(nn);
        out.error.push_back(err);
        out.beta.push_back(beta);
        if (err < best) {
            best = err;
            out.n_star = nn;
        }
    }
    if (out.n.empty()) throw IllPosedError("sweep_n: beta below threshold already at n = 1");
    return out;
}

} // namespace mrom
