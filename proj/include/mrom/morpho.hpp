#ifndef MROM_MORPHO_HPP
#define MROM_MORPHO_HPP

#include "mrom/subspace.hpp"

#include <memory>
#include <vector>

namespace mrom {

/// Uniform pixel grid shared by every geometry of a family, used to turn a
/// channel shape into a feature vector of per-cell covered areas.
struct FeatureGrid {
    double x0 = 0.0; // origin (lower-left corner)
    double y0 = 0.0;
    double spacing = 0.1;
    int nx = 0;
    int ny = 0;

    int size() const { return nx * ny; }
    double cell_area() const { return spacing * spacing; }

    bool operator==(const FeatureGrid&) const = default;
};

/// Grid covering [0, length] x [-height/2, height/2] with square cells.
FeatureGrid make_feature_grid(double length, double height, double spacing);

/// Geometry feature vector: entry (ix*ny + iy) is the area of cell (ix, iy)
/// covered by the channel, estimated by q x q midpoint subsampling (q = 4).
struct Voxelization {
    FeatureGrid grid;
    Eigen::VectorXd values;
};

Voxelization voxelize(const GeometryDescriptor& g, const FeatureGrid& grid);

/// Distance between the unit spheres of two subspaces of the same space:
/// sqrt(1 - min(beta^2(A,B), beta^2(B,A))), the worst distance of a unit
/// vector of either sphere to the other subspace. 0 iff equal spans, 1 iff
/// some direction of one space is orthogonal to the other.
double sphere_hausdorff(const Subspace& A, const Subspace& B);

/// One template of the atlas: geometry, mesh, and its reduced basis.
struct TemplateEntry {
    GeometryDescriptor geom;
    std::shared_ptr<const Mesh> mesh;
    Subspace basis;
};

/// Symmetrized squared sphere distance between the reduced models of two
/// templates: the mean of d_H^2(transport of a's basis, b's basis) computed
/// on b's mesh and the same with roles swapped. Symmetric, zero for a == b;
/// not a metric (no triangle inequality claimed).
double template_distance_squared(const TemplateEntry& a, const TemplateEntry& b);

/// K x K matrix of pairwise template_distance_squared values (upper triangle
/// computed once, mirrored; zero diagonal). Requires K >= 2.
Eigen::MatrixXd distance_matrix(const std::vector<TemplateEntry>& templates);

/// Classical multidimensional scaling of a squared-distance matrix.
struct MdsResult {
    Eigen::MatrixXd coords;      // p x K, rows scaled by sqrt(eigenvalue)
    Eigen::VectorXd eigenvalues; // all K eigenvalues of the centered Gram, descending
    int n_positive = 0;          // eigenvalues retained (positive, above cutoff)
    bool padded = false;         // true if fewer than p usable eigenvalues
    double discarded_mass = 0.0; // sum |negative| / sum positive
};

/// Double-center D into C = -1/2 H D H, eigendecompose, and embed with the p
/// largest eigenvalues. Eigenvalues below 1e-12 * lambda_1 (or negative) are
/// excluded; missing dimensions are zero-padded with `padded` set.
/// Throws ContractError for p > K or a malformed D.
MdsResult mds(const Eigen::MatrixXd& D, int p);

/// Minimal-norm solution W of (V V^T) W = V X^T through the truncated-SVD
/// pseudo-inverse of V (columns of V are the template feature vectors;
/// singular values below 1e-10 * sigma_max truncated). Requires K >= p.
Eigen::MatrixXd fit_embedding(const Eigen::MatrixXd& V, const Eigen::MatrixXd& X);

/// Trained shape-embedding model: template registry, their embedding
/// coordinates, and the linear feature-to-embedding map.
struct EmbeddingModel {
    FeatureGrid grid;
    int p = 0;
    std::vector<GeometryDescriptor> templates;
    Eigen::MatrixXd coords;      // p x K template coordinates (centered rows)
    Eigen::VectorXd eigenvalues; // full spectrum, descending
    double discarded_mass = 0.0;
    bool padded = false;
    Eigen::MatrixXd w_map; // N_vox x p

    /// Throws ContractError if shapes disagree, rows of `coords` are not
    /// centered within 1e-10, or a retained eigenvalue is not positive.
    void validate() const;
};

/// Assemble the model from the template registry and their distance matrix:
/// voxelize every template, run MDS, fit the least-squares map.
EmbeddingModel fit_embedding_model(const std::vector<GeometryDescriptor>& geoms,
                                   const FeatureGrid& grid, const Eigen::MatrixXd& D, int p);

/// Embedding coordinates of an arbitrary geometry: w_map^T voxelize(g).
Eigen::VectorXd embed(const EmbeddingModel& model, const GeometryDescriptor& g);

/// Index of the template whose embedding point is closest (squared Euclidean)
/// to embed(model, g); ties broken by the lowest index.
int best_template(const GeometryDescriptor& g, const EmbeddingModel& model);

} // namespace mrom

#endif
