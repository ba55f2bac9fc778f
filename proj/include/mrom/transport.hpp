#ifndef MROM_TRANSPORT_HPP
#define MROM_TRANSPORT_HPP

#include "mrom/subspace.hpp"

#include <memory>
#include <unordered_map>
#include <vector>

namespace mrom {

/// Analytic correspondence between the boundaries of two channels of the
/// same length and outer height: x is preserved and y is scaled by the ratio
/// of the half-height profiles.
/// Throws ContractError when x is not on the source boundary within 1e-10,
/// or the two channels disagree in length or outer height.
Eigen::Vector2d boundary_correspondence(const GeometryDescriptor& src,
                                        const GeometryDescriptor& dst,
                                        const Eigen::Vector2d& x);

/// Componentwise discrete-harmonic extension of boundary displacement data
/// (Dirichlet values required at every boundary node).
Field harmonic_extension(const std::shared_ptr<const Mesh>& mesh,
                         const std::unordered_map<int, Eigen::Vector2d>& boundary_disp);

/// Deformation of a source mesh onto a target geometry: displacement d0 from
/// the harmonic extension of the boundary correspondence, and the deformed
/// node positions x + d0(x) (a body-fitted image of the target domain).
struct VolumetricMap {
    std::shared_ptr<const Mesh> src_mesh;
    GeometryDescriptor target;
    Field displacement;                    // on src_mesh, displacement kind
    std::vector<Eigen::Vector2d> deformed; // per source node
};

VolumetricMap make_volumetric_map(const std::shared_ptr<const Mesh>& src_mesh,
                                  const GeometryDescriptor& dst);

/// Composition of the inverse deformation with barycentric interpolation,
/// precomputed as a sparse operator: row i holds the weights with which
/// source nodal values combine into the value at target node i. Nodes of the
/// target mesh that fall outside the deformed source mesh (boundary misfit)
/// take the value at the closest point of the deformed boundary.
Eigen::SparseMatrix<double> interpolation_matrix(const VolumetricMap& map,
                                                 const std::shared_ptr<const Mesh>& dst_mesh);

/// Interpolate a source field onto the target mesh through the map
/// (componentwise application of interpolation_matrix).
Field push_forward(const Field& f, const VolumetricMap& map,
                   const std::shared_ptr<const Mesh>& dst_mesh);

/// Piola post-process restoring (approximate) mass conservation:
/// v -> (I + grad d) v / det(I + grad d), where d is the transported
/// displacement on the target mesh and its gradient is recovered per
/// triangle and area-averaged to nodes.
/// Throws GeometryError when det(I + grad d) <= 1e-8 at any node.
Field piola(const Field& v, const Field& transported_disp);

/// Full field transport: push-forward followed by the Piola post-process
/// (`dhat` must be push_forward(map.displacement, map, dst_mesh)).
Field transport_field(const Field& f, const VolumetricMap& map, const Field& dhat,
                      const std::shared_ptr<const Mesh>& dst_mesh);

/// Transport every basis function of V onto the geometry of dst_mesh and
/// re-orthonormalize there. Directions that collapse in the
/// orthonormalization (relative norm < 1e-10) are dropped, so the result may
/// have lower dimension. Throws IllPosedError if everything collapses.
Subspace transport_subspace(const Subspace& V, const std::shared_ptr<const Mesh>& dst_mesh);

} // namespace mrom

#endif
