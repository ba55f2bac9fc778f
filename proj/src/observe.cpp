#include "mrom/observe.hpp"

#include "mrom/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace mrom {

namespace {

// A clipped triangle piece never has more than 3 + 4 vertices.
using Polygon = std::vector<Eigen::Vector2d>;

/// Sutherland-Hodgman clip of a convex polygon against the half-plane
/// keep = { x : x[axis] <= bound } (sign = +1) or >= bound (sign = -1).
Polygon clip_axis(const Polygon& poly, int axis, double bound, int sign) {
    Polygon out;
    out.reserve(poly.size() + 1);
    const auto inside = [&](const Eigen::Vector2d& p) {
        return sign > 0 ? p[axis] <= bound : p[axis] >= bound;
    };
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& a = poly[i];
        const Eigen::Vector2d& b = poly[(i + 1) % n];
        const bool ia = inside(a), ib = inside(b);
        if (ia) out.push_back(a);
        if (ia != ib) {
            const double t = (bound - a[axis]) / (b[axis] - a[axis]);
            out.push_back(a + t * (b - a));
        }
    }
    return out;
}

Polygon clip_to_rect(Polygon poly, const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
    poly = clip_axis(poly, 0, lo.x(), -1);
    if (poly.size() < 3) return {};
    poly = clip_axis(poly, 0, hi.x(), +1);
    if (poly.size() < 3) return {};
    poly = clip_axis(poly, 1, lo.y(), -1);
    if (poly.size() < 3) return {};
    poly = clip_axis(poly, 1, hi.y(), +1);
    if (poly.size() < 3) return {};
    return poly;
}

double polygon_area(const Polygon& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Eigen::Vector2d& u = p[i];
        const Eigen::Vector2d& v = p[(i + 1) % p.size()];
        a += u.x() * v.y() - v.x() * u.y();
    }
    return 0.5 * a;
}

Eigen::Vector2d polygon_centroid(const Polygon& p, double area) {
    Eigen::Vector2d c(0.0, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Eigen::Vector2d& u = p[i];
        const Eigen::Vector2d& v = p[(i + 1) % p.size()];
        const double w = u.x() * v.y() - v.x() * u.y();
        c += w * (u + v);
    }
    return c / (6.0 * area);
}

struct GridLayout {
    Eigen::Vector2d origin;
    int nx = 0, ny = 0;
};

GridLayout layout_for(const Mesh& mesh, double s) {
    GridLayout g;
    g.origin = mesh.bbox_min();
    const Eigen::Vector2d extent = mesh.bbox_max() - g.origin;
    g.nx = std::max(1, static_cast<int>(std::ceil(extent.x() / s - 1e-12)));
    g.ny = std::max(1, static_cast<int>(std::ceil(extent.y() / s - 1e-12)));
    return g;
}

/// Visit every (voxel cell, clipped triangle piece) pair of the grid.
template <class F>
void for_each_piece(const Mesh& mesh, const GridLayout& g, double s, F&& visit) {
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Polygon tpoly = {mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]};
        Eigen::Vector2d lo = tpoly[0], hi = tpoly[0];
        for (const auto& p : tpoly) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const int ix0 = std::clamp(static_cast<int>(std::floor((lo.x() - g.origin.x()) / s)), 0, g.nx - 1);
        const int ix1 = std::clamp(static_cast<int>(std::floor((hi.x() - g.origin.x()) / s)), 0, g.nx - 1);
        const int iy0 = std::clamp(static_cast<int>(std::floor((lo.y() - g.origin.y()) / s)), 0, g.ny - 1);
        const int iy1 = std::clamp(static_cast<int>(std::floor((hi.y() - g.origin.y()) / s)), 0, g.ny - 1);
        for (int ix = ix0; ix <= ix1; ++ix) {
            for (int iy = iy0; iy <= iy1; ++iy) {
                const Eigen::Vector2d clo = g.origin + s * Eigen::Vector2d(ix, iy);
                const Eigen::Vector2d chi = clo + Eigen::Vector2d(s, s);
                Polygon piece = clip_to_rect(tpoly, clo, chi);
                if (piece.size() < 3) continue;
                const double a = polygon_area(piece);
                if (a <= 0.0) continue;
                visit(ix, iy, t, piece, a);
            }
        }
    }
}

} // namespace

VoxelGrid make_voxel_grid(std::shared_ptr<const Mesh> mesh, double s,
                          const Eigen::Vector2d& beam,
                          std::optional<std::pair<double, double>> band,
                          double threshold_factor) {
    if (s <= 0.0) throw ContractError("make_voxel_grid: voxel side must be positive");
    if (std::abs(beam.norm() - 1.0) > 1e-14)
        throw ContractError("make_voxel_grid: beam direction must be a unit vector");

    const GridLayout g = layout_for(*mesh, s);
    Eigen::MatrixXd cell_area = Eigen::MatrixXd::Zero(g.nx, g.ny);
    for_each_piece(*mesh, g, s,
                   [&](int ix, int iy, int, const Polygon&, double a) { cell_area(ix, iy) += a; });

    VoxelGrid grid;
    grid.mesh = std::move(mesh);
    grid.s = s;
    grid.beam = beam;
    const double threshold = threshold_factor * s * s;
    for (int ix = 0; ix < g.nx; ++ix) {
        for (int iy = 0; iy < g.ny; ++iy) {
            if (cell_area(ix, iy) < threshold) continue;
            VoxelGrid::Voxel v;
            v.ix = ix;
            v.iy = iy;
            v.lo = g.origin + s * Eigen::Vector2d(ix, iy);
            v.hi = v.lo + Eigen::Vector2d(s, s);
            v.area = cell_area(ix, iy);
            if (band && (v.hi.y() < band->first || v.lo.y() > band->second)) continue;
            grid.voxels.push_back(v);
        }
    }
    return grid;
}

Eigen::VectorXd measure(const Field& u, const VoxelGrid& grid) {
    if (u.kind != FieldKind::velocity || u.mesh != grid.mesh)
        throw ContractError("measure: expects a velocity field on the grid's mesh");

    const Mesh& mesh = *grid.mesh;
    const GridLayout g = layout_for(mesh, grid.s);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g.nx, g.ny);

    for_each_piece(mesh, g, grid.s, [&](int ix, int iy, int t, const Polygon& piece, double a) {
        const Eigen::Vector2d c = polygon_centroid(piece, a);
        const auto& tri = mesh.triangles[t];
        const fem::TriangleGeom geo = fem::triangle_geom(mesh, t);
        Eigen::Vector3d lam;
        for (int k = 0; k < 3; ++k) // lambda_k(c) = 1 + grad_k . (c - v_k)
            lam[k] = geo.grad.col(k).dot(c - mesh.nodes[tri[k]]) + 1.0;
        Eigen::Vector2d val(0.0, 0.0);
        for (int k = 0; k < 3; ++k) {
            val.x() += lam[k] * u.at(tri[k], 0);
            val.y() += lam[k] * u.at(tri[k], 1);
        }
        acc(ix, iy) += a * val.dot(grid.beam);
    });

    Eigen::VectorXd y(grid.m());
    for (int i = 0; i < grid.m(); ++i) y[i] = acc(grid.voxels[i].ix, grid.voxels[i].iy);
    return y;
}

ObservationSpace make_observation_space(const VoxelGrid& grid,
                                        const std::shared_ptr<const MassMatrix>& metric) {
    if (!metric || metric->kind != FieldKind::velocity || metric->mesh != grid.mesh)
        throw ContractError("make_observation_space: velocity mass matrix on the grid mesh required");
    if (grid.m() == 0) throw ContractError("make_observation_space: grid has no active voxels");

    const Mesh& mesh = *grid.mesh;
    const int n = mesh.n_nodes();
    const GridLayout g = layout_for(mesh, grid.s);

    // Right-hand sides: column i holds integral over voxel_i of phi_j * beam_c,
    // i.e. the load vector of the functional ell_i.
    Eigen::MatrixXi voxel_of = Eigen::MatrixXi::Constant(g.nx, g.ny, -1);
    for (int i = 0; i < grid.m(); ++i) voxel_of(grid.voxels[i].ix, grid.voxels[i].iy) = i;

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2 * n, grid.m());
    for_each_piece(mesh, g, grid.s, [&](int ix, int iy, int t, const Polygon& piece, double a) {
        const int vi = voxel_of(ix, iy);
        if (vi < 0) return;
        const Eigen::Vector2d c = polygon_centroid(piece, a);
        const auto& tri = mesh.triangles[t];
        const fem::TriangleGeom geo = fem::triangle_geom(mesh, t);
        for (int k = 0; k < 3; ++k) {
            const double lam = geo.grad.col(k).dot(c - mesh.nodes[tri[k]]) + 1.0;
            const double integral = a * lam; // integral over the piece of phi_k
            C(tri[k], vi) += integral * grid.beam.x();
            C(n + tri[k], vi) += integral * grid.beam.y();
        }
    });

    // Riesz representers: M r_i = c_i.
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(metric->mat);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("make_observation_space: mass-matrix factorization failed");
    Eigen::MatrixXd R = ldlt.solve(C);

    ObservationSpace obs;
    obs.grid = grid;
    obs.raw = R;
    obs.space.mesh = grid.mesh;
    obs.space.kind = FieldKind::velocity;
    obs.space.metric = metric;
    obs.space.basis = m_orthonormalize(R, metric);
    if (obs.space.dim() == 0)
        throw IllPosedError("make_observation_space: all representers collapsed");

    // Orthonormal coordinates from raw measurements: with y_i = <r_i, u> and
    // Psi = R A, the coordinates Psi^T M u equal (Psi^T M R) G^{-1} y.
    Eigen::MatrixXd G = R.transpose() * C; // = R^T M R
    G = 0.5 * (G + G.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
        throw IllPosedError("make_observation_space: representer Gram matrix is singular");
    const Eigen::MatrixXd PsiMR = obs.space.basis.transpose() * C; // Psi^T M R
    obs.mix = llt.solve(PsiMR.transpose()).transpose();
    return obs;
}

Eigen::VectorXd observed_coords(const ObservationSpace& obs, const Field& u) {
    return obs.mix * measure(u, obs.grid);
}

} // namespace mrom
