#include "mrom/morpho.hpp"

#include "mrom/errors.hpp"
#include "mrom/parallel.hpp"
#include "mrom/pbdw.hpp"
#include "mrom/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace mrom {

namespace {

constexpr int kSubsamples = 4; // q x q midpoint samples per cell

} // namespace

FeatureGrid make_feature_grid(double length, double height, double spacing) {
    if (!(length > 0.0) || !(height > 0.0) || !(spacing > 0.0))
        throw ContractError("make_feature_grid: dimensions and spacing must be positive");
    FeatureGrid grid;
    grid.x0 = 0.0;
    grid.y0 = -height / 2.0;
    grid.spacing = spacing;
    grid.nx = static_cast<int>(std::ceil(length / spacing - 1e-12));
    grid.ny = static_cast<int>(std::ceil(height / spacing - 1e-12));
    return grid;
}

Voxelization voxelize(const GeometryDescriptor& g, const FeatureGrid& grid) {
    g.validate();
    if (grid.nx <= 0 || grid.ny <= 0 || !(grid.spacing > 0.0))
        throw ContractError("voxelize: empty grid");
    // The y-extent accounts for outward bumps (S_r > D/2): clipping such a
    // geometry against a grid flush with the straight walls would erase its
    // feature signature entirely.
    const double half = std::max(g.height / 2.0, g.throat_radius);
    const double tol = 1e-12;
    if (grid.x0 > tol || grid.y0 > -half + tol ||
        grid.x0 + grid.nx * grid.spacing < g.length - tol ||
        grid.y0 + grid.ny * grid.spacing < half - tol)
        throw ContractError("voxelize: grid does not cover the geometry bounding box");

    Voxelization v;
    v.grid = grid;
    v.values.resize(grid.size());
    const double s = grid.spacing;
    const double sub = s / kSubsamples;
    // Occupancy is sampled, not integrated: wall positions are resolved in
    // steps of spacing / q. Geometry families must keep their wall heights
    // on opposite sides of some sample level or their features coincide;
    // the spacing is the knob that sets this resolution.
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            int inside = 0;
            for (int a = 0; a < kSubsamples; ++a) {
                const double x = grid.x0 + ix * s + (a + 0.5) * sub;
                for (int b = 0; b < kSubsamples; ++b) {
                    const double y = grid.y0 + iy * s + (b + 0.5) * sub;
                    if (contains(g, x, y)) ++inside;
                }
            }
            v.values[ix * grid.ny + iy] =
                grid.cell_area() * inside / double(kSubsamples * kSubsamples);
        }
    }
    return v;
}

double sphere_hausdorff(const Subspace& A, const Subspace& B) {
    check_compatible(A, B);
    if (&A == &B || (A.basis.rows() == B.basis.rows() && A.basis.cols() == B.basis.cols() &&
                     A.basis == B.basis))
        return 0.0;
    const double bab = inf_sup_beta(A, B);
    const double bba = inf_sup_beta(B, A);
    const double b2 = std::min(bab * bab, bba * bba);
    return std::sqrt(std::max(0.0, 1.0 - std::min(b2, 1.0)));
}

double template_distance_squared(const TemplateEntry& a, const TemplateEntry& b) {
    if (!a.mesh || !b.mesh) throw ContractError("template_distance_squared: missing mesh");
    const Subspace a_on_b = transport_subspace(a.basis, b.mesh);
    const Subspace b_on_a = transport_subspace(b.basis, a.mesh);
    const double d_on_a = sphere_hausdorff(b_on_a, a.basis);
    const double d_on_b = sphere_hausdorff(b.basis, a_on_b);
    return 0.5 * d_on_a * d_on_a + 0.5 * d_on_b * d_on_b;
}

Eigen::MatrixXd distance_matrix(const std::vector<TemplateEntry>& templates) {
    const int K = static_cast<int>(templates.size());
    if (K < 2) throw ContractError("distance_matrix: need at least two templates");
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K, K);
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(K) * (K - 1) / 2);
    for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j)
            pairs.emplace_back(i, j);
    // Each entry is independent and lands in its own (i, j)/(j, i) slots, so
    // the result does not depend on the schedule.
    parallel_for(static_cast<int>(pairs.size()), [&](int k) {
        const auto [i, j] = pairs[static_cast<std::size_t>(k)];
        const double d = template_distance_squared(templates[i], templates[j]);
        D(i, j) = d;
        D(j, i) = d;
    });
    return D;
}

MdsResult mds(const Eigen::MatrixXd& D, int p) {
    const int K = static_cast<int>(D.rows());
    if (K == 0 || D.cols() != K) throw ContractError("mds: D must be square and non-empty");
    if (p < 1) throw ContractError("mds: embedding dimension must be positive");
    if (p > K) throw ContractError("mds: embedding dimension exceeds the number of points");
    if ((D - D.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + D.lpNorm<Eigen::Infinity>()))
        throw ContractError("mds: D must be symmetric");
    for (int i = 0; i < K; ++i) {
        if (D(i, i) != 0.0) throw ContractError("mds: D must have a zero diagonal");
        for (int j = 0; j < K; ++j)
            if (D(i, j) < 0.0) throw ContractError("mds: D must be nonnegative");
    }

    const Eigen::MatrixXd H =
        Eigen::MatrixXd::Identity(K, K) - Eigen::MatrixXd::Constant(K, K, 1.0 / K);
    Eigen::MatrixXd C = -0.5 * H * D * H;
    C = 0.5 * (C + C.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success) throw SolverError("mds: eigendecomposition failed");

    MdsResult out;
    out.eigenvalues = eig.eigenvalues().reverse();
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

    const double lambda1 = out.eigenvalues[0];
    const double cutoff = 1e-12 * std::max(lambda1, 0.0);
    double pos_mass = 0.0, neg_mass = 0.0;
    for (int i = 0; i < K; ++i) {
        const double l = out.eigenvalues[i];
        if (l > 0.0) pos_mass += l;
        if (l < 0.0) neg_mass += -l;
        if (l > 0.0 && l >= cutoff && l > std::numeric_limits<double>::min()) ++out.n_positive;
    }
    out.discarded_mass = pos_mass > 0.0 ? neg_mass / pos_mass : 0.0;

    out.coords = Eigen::MatrixXd::Zero(p, K);
    const int used = std::min(p, out.n_positive);
    for (int k = 0; k < used; ++k)
        out.coords.row(k) = std::sqrt(out.eigenvalues[k]) * vectors.col(k).transpose();
    out.padded = used < p;
    return out;
}

Eigen::MatrixXd fit_embedding(const Eigen::MatrixXd& V, const Eigen::MatrixXd& X) {
    const int K = static_cast<int>(V.cols());
    const int p = static_cast<int>(X.rows());
    if (X.cols() != K) throw ContractError("fit_embedding: V and X disagree on the point count");
    if (K < p) throw ContractError("fit_embedding: fewer points than embedding dimensions");

    // Minimal-norm solution of (V V^T) W = V X^T is W = (V^+)^T X^T.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? 1e-10 * sv[0] : 0.0;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(V.rows(), p);
    for (int k = 0; k < sv.size(); ++k) {
        if (sv[k] <= cutoff) break;
        W += svd.matrixU().col(k) * (svd.matrixV().col(k).transpose() * X.transpose()) / sv[k];
    }
    return W;
}

void EmbeddingModel::validate() const {
    const int K = static_cast<int>(templates.size());
    if (K == 0) throw ContractError("embedding model: no templates");
    if (coords.rows() != p || coords.cols() != K)
        throw ContractError("embedding model: coordinate block has the wrong shape");
    if (w_map.rows() != grid.size() || w_map.cols() != p)
        throw ContractError("embedding model: map has the wrong shape");
    const double scale = 1.0 + coords.lpNorm<Eigen::Infinity>();
    for (int k = 0; k < p; ++k)
        if (std::abs(coords.row(k).sum()) > 1e-10 * scale * K)
            throw ContractError("embedding model: coordinates are not centered");
    const int retained = std::min<int>(p, eigenvalues.size());
    for (int k = 0; k < retained; ++k)
        if (coords.row(k).norm() > 0.0 && !(eigenvalues[k] > 0.0))
            throw ContractError("embedding model: retained eigenvalue is not positive");
}

EmbeddingModel fit_embedding_model(const std::vector<GeometryDescriptor>& geoms,
                                   const FeatureGrid& grid, const Eigen::MatrixXd& D, int p) {
    const int K = static_cast<int>(geoms.size());
    if (K < 2) throw ContractError("fit_embedding_model: need at least two templates");
    if (D.rows() != K || D.cols() != K)
        throw ContractError("fit_embedding_model: distance matrix size mismatch");

    Eigen::MatrixXd V(grid.size(), K);
    for (int t = 0; t < K; ++t) V.col(t) = voxelize(geoms[t], grid).values;

    const MdsResult m = mds(D, p);

    EmbeddingModel model;
    model.grid = grid;
    model.p = p;
    model.templates = geoms;
    model.coords = m.coords;
    model.eigenvalues = m.eigenvalues;
    model.discarded_mass = m.discarded_mass;
    model.padded = m.padded;
    model.w_map = fit_embedding(V, m.coords);
    model.validate();
    return model;
}

Eigen::VectorXd embed(const EmbeddingModel& model, const GeometryDescriptor& g) {
    return model.w_map.transpose() * voxelize(g, model.grid).values;
}

int best_template(const GeometryDescriptor& g, const EmbeddingModel& model) {
    model.validate();
    const Eigen::VectorXd x = embed(model, g);
    int best = 0;
    double best_d = (x - model.coords.col(0)).squaredNorm();
    for (int t = 1; t < static_cast<int>(model.templates.size()); ++t) {
        const double d = (x - model.coords.col(t)).squaredNorm();
        if (d < best_d) {
            best = t;
            best_d = d;
        }
    }
    return best;
}

} // namespace mrom
