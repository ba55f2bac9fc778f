#ifndef MROM_MESH_HPP
#define MROM_MESH_HPP

#include "mrom/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mrom {

enum class BoundaryTag { inflow, outflow, wall };

std::string to_string(BoundaryTag tag);
BoundaryTag boundary_tag_from_string(const std::string& s);

struct BoundaryEdge {
    int a = -1;
    int b = -1;
    BoundaryTag tag = BoundaryTag::wall;
};

/// Result of a point-location query: owning triangle and barycentric
/// coordinates (clipped to [0,1] and renormalized).
struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};
};

/// Uniform-bin accelerator for point-in-triangle queries over an arbitrary
/// node configuration (also used for deformed meshes during transport).
class PointLocator {
public:
    PointLocator(const std::vector<Eigen::Vector2d>& nodes,
                 const std::vector<std::array<int, 3>>& triangles);

    /// Inclusion test with barycentric tolerance -1e-10 on each coordinate.
    std::optional<Location> locate(const Eigen::Vector2d& p) const;

private:
    const std::vector<Eigen::Vector2d>& nodes_;
    const std::vector<std::array<int, 3>>& triangles_;
    Eigen::Vector2d lo_, hi_;
    int nbx_ = 1, nby_ = 1;
    std::vector<std::vector<int>> bins_;
};

/// Immutable triangulated 2D channel mesh with tagged boundary.
/// Node ordering is column-major over the generating lattice; fields store
/// one coefficient block per component.
class Mesh {
public:
    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    GeometryDescriptor descriptor;
    double h = 0.0; // nominal element size

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }

    double triangle_area(int t) const;
    double total_area() const;
    Eigen::Vector2d bbox_min() const;
    Eigen::Vector2d bbox_max() const;

    const PointLocator& locator() const;

private:
    mutable std::unique_ptr<PointLocator> locator_;
    mutable std::once_flag locator_once_;
};

/// Structured mapped grid: ceil(L/h) x ceil(D/h) cells, two triangles each,
/// node ordinates scaled column-wise by h(x)/(D/2).
std::shared_ptr<const Mesh> generate_mesh(const GeometryDescriptor& g, double h);

/// Point location on a mesh. Returns std::nullopt if p lies in no triangle.
std::optional<Location> locate_point(const Mesh& m, const Eigen::Vector2d& p);

void write_mesh(std::ostream& os, const Mesh& m);
void write_mesh_file(const std::string& path, const Mesh& m);
std::shared_ptr<const Mesh> read_mesh(std::istream& is);
std::shared_ptr<const Mesh> read_mesh_file(const std::string& path);

} // namespace mrom

#endif
