#ifndef MROM_OBSERVE_HPP
#define MROM_OBSERVE_HPP

#include "mrom/subspace.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace mrom {

/// Axis-aligned voxel partition of the mesh bounding box. Only voxels with
/// enough overlap with the channel are kept ("active"); each knows its exact
/// polygon-clipped intersection area with the mesh.
struct VoxelGrid {
    struct Voxel {
        int ix = 0, iy = 0;       // grid indices (bookkeeping only)
        Eigen::Vector2d lo, hi;   // cell corners
        double area = 0.0;        // area(cell ∩ mesh)
    };

    std::shared_ptr<const Mesh> mesh;
    double s = 0.25;              // voxel side (cm)
    Eigen::Vector2d beam{std::sqrt(0.5), std::sqrt(0.5)};
    std::vector<Voxel> voxels;

    int m() const { return static_cast<int>(voxels.size()); }
};

/// Build the grid over the mesh bounding box. Voxels whose intersection area
/// with the mesh is below `threshold_factor * s^2` are dropped (slivers
/// destabilize the representer orthonormalization). An optional y-band keeps
/// only voxels overlapping [band.first, band.second], mimicking an imaging
/// window; default is the full domain.
VoxelGrid make_voxel_grid(std::shared_ptr<const Mesh> mesh, double s,
                          const Eigen::Vector2d& beam,
                          std::optional<std::pair<double, double>> band = std::nullopt,
                          double threshold_factor = 0.05);

/// Measurement vector: component i is the integral of u . beam over
/// voxel_i ∩ mesh, computed by exact clipped-polygon quadrature (the
/// integrand is piecewise linear, so area x centroid value is exact).
Eigen::VectorXd measure(const Field& u, const VoxelGrid& grid);

/// The observation space W_m together with everything needed to map raw
/// measurements into orthonormal coordinates.
struct ObservationSpace {
    VoxelGrid grid;
    Subspace space;      // orthonormal basis of W_m
    Eigen::MatrixXd raw; // dof x m: representers (projected voxel indicators)
    Eigen::MatrixXd mix; // dim(W) x m: orthonormal coords from raw measurements
};

/// Project every voxel indicator (times the beam) onto the finite-element
/// space, orthonormalize, and precompute the raw-measurement mixing map.
ObservationSpace make_observation_space(const VoxelGrid& grid,
                                        const std::shared_ptr<const MassMatrix>& metric);

/// Orthonormal coordinates of P_W u obtained from the measurements alone.
Eigen::VectorXd observed_coords(const ObservationSpace& obs, const Field& u);

} // namespace mrom

#endif
