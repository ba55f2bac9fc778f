#include "mrom/rom.hpp"

#include "mrom/errors.hpp"
#include "mrom/instrument.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace mrom {

ErrorMode error_mode_from_string(const std::string& s) {
    if (s == "worst_case") return ErrorMode::worst_case;
    if (s == "mean_square") return ErrorMode::mean_square;
    throw ContractError("unknown error mode '" + s + "'");
}

namespace {

Eigen::MatrixXd stack_snapshots(const std::vector<Field>& snapshots) {
    const auto& first = snapshots.front();
    Eigen::MatrixXd X(first.coeffs.size(), static_cast<Eigen::Index>(snapshots.size()));
    for (std::size_t j = 0; j < snapshots.size(); ++j) {
        const Field& f = snapshots[j];
        if (f.mesh != first.mesh || f.kind != first.kind)
            throw ContractError("pod: snapshots live on different meshes or have different kinds");
        if (f.coeffs.size() != first.coeffs.size())
            throw ContractError("pod: snapshot coefficient sizes disagree");
        X.col(static_cast<Eigen::Index>(j)) = f.coeffs;
    }
    return X;
}

} // namespace

PodResult pod(const std::vector<Field>& snapshots,
              const std::shared_ptr<const MassMatrix>& metric, int n) {
    if (snapshots.empty()) throw ContractError("pod: empty snapshot set");
    if (n < 1) throw ContractError("pod: requested dimension must be positive");
    instrument::count_pod_call();

    const Eigen::MatrixXd X = stack_snapshots(snapshots);
    const Eigen::Index ns = X.cols();
    if (n > ns) throw RankError("pod: requested dimension exceeds snapshot count", static_cast<int>(ns));

    // Gramian of the snapshot set in the L2 inner product.
    const Eigen::MatrixXd MX = apply_metric(metric, X);
    Eigen::MatrixXd G = X.transpose() * MX;
    G = 0.5 * (G + G.transpose()); // enforce exact symmetry for the solver

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    if (eig.info() != Eigen::Success) throw SolverError("pod: Gramian eigendecomposition failed");

    // Eigen returns ascending order; flip to descending.
    Eigen::VectorXd lambda = eig.eigenvalues().reverse();
    Eigen::MatrixXd V = eig.eigenvectors().rowwise().reverse();

    Eigen::VectorXd sigma(ns);
    for (Eigen::Index k = 0; k < ns; ++k) sigma[k] = std::sqrt(std::max(lambda[k], 0.0));

    // Numerical rank: eigenvalues below 1e-14 * lambda_1 carry no information.
    const double lam_tol = 1e-14 * std::max(lambda[0], 0.0);
    int rank = 0;
    while (rank < ns && lambda[rank] > lam_tol && lambda[rank] > 0.0) ++rank;
    if (n > rank) throw RankError("pod: requested dimension exceeds numerical rank of snapshot set", rank);

    Eigen::MatrixXd modes(X.rows(), n);
    for (int k = 0; k < n; ++k)
        modes.col(k) = X * V.col(k) / sigma[k];

    const auto& first = snapshots.front();
    Subspace space;
    space.mesh = first.mesh;
    space.kind = first.kind;
    space.metric = metric;
    // The modes are orthonormal in exact arithmetic; one orthonormalization
    // pass cleans up the roundoff accumulated through the Gramian.
    space.basis = m_orthonormalize(modes, metric);
    if (space.basis.cols() != n)
        throw RankError("pod: orthonormalization dropped modes below requested dimension",
                        static_cast<int>(space.basis.cols()));

    return PodResult{std::move(space), std::move(sigma)};
}

Field project(const Field& u, const Subspace& V) {
    return V.project(u);
}

double manifold_error(const std::vector<Field>& snapshots, const Subspace& V, ErrorMode mode) {
    if (snapshots.empty()) throw ContractError("manifold_error: empty snapshot set");
    double worst = 0.0, acc = 0.0;
    for (const Field& u : snapshots) {
        check_compatible(V, u);
        const Eigen::VectorXd residual = u.coeffs - V.project_coeffs(u.coeffs);
        const double e = V.metric ? norm(*V.metric, residual) : residual.norm();
        worst = std::max(worst, e);
        acc += e * e;
    }
    if (mode == ErrorMode::worst_case) return worst;
    return std::sqrt(acc / static_cast<double>(snapshots.size()));
}

} // namespace mrom
