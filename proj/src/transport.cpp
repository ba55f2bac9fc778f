#include "mrom/transport.hpp"

#include "mrom/errors.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <unordered_set>

namespace mrom {

namespace {

constexpr double kBoundaryTol = 1e-10;

double clamp_axial(const GeometryDescriptor& g, double x) {
    return std::min(std::max(x, 0.0), g.length);
}

bool on_channel_boundary(const GeometryDescriptor& g, const Eigen::Vector2d& x) {
    if (x[0] < -kBoundaryTol || x[0] > g.length + kBoundaryTol) return false;
    const double h = half_height_profile(g, clamp_axial(g, x[0]));
    const bool on_end = std::min(std::abs(x[0]), std::abs(x[0] - g.length)) <= kBoundaryTol;
    if (on_end && std::abs(x[1]) <= h + kBoundaryTol) return true;
    return std::abs(std::abs(x[1]) - h) <= kBoundaryTol;
}

// Closest point on segment [a,b], returned as the parameter t in [0,1].
double segment_parameter(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                         const Eigen::Vector2d& p) {
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return 0.0;
    return std::min(std::max((p - a).dot(ab) / len2, 0.0), 1.0);
}

} // namespace

Eigen::Vector2d boundary_correspondence(const GeometryDescriptor& src,
                                        const GeometryDescriptor& dst,
                                        const Eigen::Vector2d& x) {
    src.validate();
    dst.validate();
    if (std::abs(src.length - dst.length) > 1e-12 || std::abs(src.height - dst.height) > 1e-12)
        throw ContractError("boundary_correspondence: channels differ in length or outer height");
    if (!on_channel_boundary(src, x))
        throw ContractError("boundary_correspondence: point is not on the source boundary");
    const double xa = clamp_axial(src, x[0]);
    const double ratio = half_height_profile(dst, xa) / half_height_profile(src, xa);
    return {x[0], x[1] * ratio};
}

Field harmonic_extension(const std::shared_ptr<const Mesh>& mesh,
                         const std::unordered_map<int, Eigen::Vector2d>& boundary_disp) {
    if (!mesh) throw ContractError("harmonic_extension: null mesh");
    std::unordered_set<int> boundary;
    for (const auto& e : mesh->boundary_edges) {
        boundary.insert(e.a);
        boundary.insert(e.b);
    }
    if (boundary_disp.size() != boundary.size())
        throw ContractError("harmonic_extension: displacement data must cover exactly the boundary nodes");
    for (int i : boundary)
        if (!boundary_disp.count(i))
            throw ContractError("harmonic_extension: missing displacement at boundary node " +
                                std::to_string(i));

    const int n = mesh->n_nodes();
    const Eigen::SparseMatrix<double> K = fem::scalar_stiffness(*mesh);

    // Symmetric Dirichlet elimination: boundary rows/columns become identity,
    // the eliminated columns move to the right-hand side.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(K.nonZeros()));
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 2);
    for (const auto& [node, d] : boundary_disp) {
        if (node < 0 || node >= n)
            throw ContractError("harmonic_extension: boundary node index out of range");
        g(node, 0) = d[0];
        g(node, 1) = d[1];
    }
    for (int col = 0; col < K.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it) {
            const int i = static_cast<int>(it.row());
            const int j = static_cast<int>(it.col());
            const bool bi = boundary.count(i) > 0;
            const bool bj = boundary.count(j) > 0;
            if (!bi && !bj) {
                trips.emplace_back(i, j, it.value());
            } else if (!bi && bj) {
                rhs.row(i) -= it.value() * g.row(j);
            }
        }
    }
    for (int i : boundary) {
        trips.emplace_back(i, i, 1.0);
        rhs.row(i) = g.row(i);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw SolverError("harmonic_extension: factorization failed");
    Eigen::MatrixXd sol = solver.solve(rhs);
    const double res = (A * sol - rhs).norm();
    if (!(res <= 1e-10 * (1.0 + rhs.norm())))
        throw SolverError("harmonic_extension: solver residual " + std::to_string(res) +
                          " exceeds tolerance");

    Field d(mesh, FieldKind::displacement);
    d.coeffs.segment(0, n) = sol.col(0);
    d.coeffs.segment(n, n) = sol.col(1);
    d.validate();
    return d;
}

VolumetricMap make_volumetric_map(const std::shared_ptr<const Mesh>& src_mesh,
                                  const GeometryDescriptor& dst) {
    if (!src_mesh) throw ContractError("make_volumetric_map: null source mesh");
    dst.validate();

    std::unordered_map<int, Eigen::Vector2d> bdisp;
    for (const auto& e : src_mesh->boundary_edges) {
        for (int node : {e.a, e.b}) {
            if (bdisp.count(node)) continue;
            const Eigen::Vector2d& x = src_mesh->nodes[node];
            bdisp.emplace(node, boundary_correspondence(src_mesh->descriptor, dst, x) - x);
        }
    }

    VolumetricMap map;
    map.src_mesh = src_mesh;
    map.target = dst;
    map.displacement = harmonic_extension(src_mesh, bdisp);
    map.deformed.resize(src_mesh->nodes.size());
    for (int i = 0; i < src_mesh->n_nodes(); ++i) {
        map.deformed[i] = src_mesh->nodes[i] +
                          Eigen::Vector2d(map.displacement.at(i, 0), map.displacement.at(i, 1));
    }
    for (int t = 0; t < src_mesh->n_triangles(); ++t) {
        const auto& tri = src_mesh->triangles[t];
        const auto geom =
            fem::triangle_geom(map.deformed[tri[0]], map.deformed[tri[1]], map.deformed[tri[2]]);
        if (!(geom.area > 0.0))
            throw GeometryError("make_volumetric_map: deformation inverts triangle " +
                                std::to_string(t));
    }
    for (const auto& [node, d] : bdisp) {
        const Eigen::Vector2d target_pos = src_mesh->nodes[node] + d;
        if ((map.deformed[node] - target_pos).norm() > 1e-8)
            throw GeometryError("make_volumetric_map: deformed boundary misses the target");
    }
    return map;
}

Eigen::SparseMatrix<double> interpolation_matrix(const VolumetricMap& map,
                                                 const std::shared_ptr<const Mesh>& dst_mesh) {
    if (!dst_mesh) throw ContractError("interpolation_matrix: null target mesh");
    const Mesh& src = *map.src_mesh;
    PointLocator locator(map.deformed, src.triangles);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(3 * dst_mesh->nodes.size());
    for (int i = 0; i < dst_mesh->n_nodes(); ++i) {
        const Eigen::Vector2d& p = dst_mesh->nodes[i];
        if (auto loc = locator.locate(p)) {
            const auto& tri = src.triangles[loc->triangle];
            for (int k = 0; k < 3; ++k) trips.emplace_back(i, tri[k], loc->bary[k]);
            continue;
        }
        // Outside the deformed mesh (boundary misfit): take the value at the
        // closest point of the deformed boundary.
        double best = std::numeric_limits<double>::infinity();
        int ba = -1, bb = -1;
        double bt = 0.0;
        for (const auto& e : src.boundary_edges) {
            const Eigen::Vector2d& a = map.deformed[e.a];
            const Eigen::Vector2d& b = map.deformed[e.b];
            const double t = segment_parameter(a, b, p);
            const double d2 = (a + t * (b - a) - p).squaredNorm();
            if (d2 < best) {
                best = d2;
                ba = e.a;
                bb = e.b;
                bt = t;
            }
        }
        trips.emplace_back(i, ba, 1.0 - bt);
        trips.emplace_back(i, bb, bt);
    }
    Eigen::SparseMatrix<double> P(dst_mesh->n_nodes(), src.n_nodes());
    P.setFromTriplets(trips.begin(), trips.end());
    return P;
}

namespace {

Field apply_interpolation(const Eigen::SparseMatrix<double>& P, const Field& f,
                          const std::shared_ptr<const Mesh>& dst_mesh) {
    const int nc = components(f.kind);
    const int ns = f.mesh->n_nodes();
    const int nd = dst_mesh->n_nodes();
    Field out(dst_mesh, f.kind);
    for (int c = 0; c < nc; ++c)
        out.coeffs.segment(c * nd, nd) = P * f.coeffs.segment(c * ns, ns);
    return out;
}

} // namespace

Field push_forward(const Field& f, const VolumetricMap& map,
                   const std::shared_ptr<const Mesh>& dst_mesh) {
    f.validate();
    if (f.mesh != map.src_mesh)
        throw ContractError("push_forward: field does not live on the map's source mesh");
    return apply_interpolation(interpolation_matrix(map, dst_mesh), f, dst_mesh);
}

Field piola(const Field& v, const Field& transported_disp) {
    v.validate();
    transported_disp.validate();
    if (v.kind != FieldKind::velocity || transported_disp.kind != FieldKind::displacement)
        throw ContractError("piola: expects a velocity field and a displacement field");
    if (v.mesh != transported_disp.mesh)
        throw ContractError("piola: fields live on different meshes");

    const Mesh& m = *v.mesh;
    const int n = m.n_nodes();

    // Deformation gradient grad d per triangle, area-averaged to nodes.
    std::vector<Eigen::Matrix2d> grad_sum(n, Eigen::Matrix2d::Zero());
    std::vector<double> weight(n, 0.0);
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto geom = fem::triangle_geom(m, t);
        Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
        for (int k = 0; k < 3; ++k) {
            const int node = m.triangles[t][k];
            const Eigen::Vector2d dk(transported_disp.at(node, 0), transported_disp.at(node, 1));
            G += dk * geom.grad.col(k).transpose();
        }
        for (int k = 0; k < 3; ++k) {
            const int node = m.triangles[t][k];
            grad_sum[node] += geom.area * G;
            weight[node] += geom.area;
        }
    }

    Field out(v.mesh, FieldKind::velocity);
    for (int i = 0; i < n; ++i) {
        const Eigen::Matrix2d F = Eigen::Matrix2d::Identity() + grad_sum[i] / weight[i];
        const double det = F.determinant();
        if (det <= 1e-8)
            throw GeometryError("piola: degenerate deformation at node " + std::to_string(i) +
                                " (det " + std::to_string(det) + ")");
        const Eigen::Vector2d vi(v.at(i, 0), v.at(i, 1));
        const Eigen::Vector2d pi = F * vi / det;
        out.at(i, 0) = pi[0];
        out.at(i, 1) = pi[1];
    }
    return out;
}

Field transport_field(const Field& f, const VolumetricMap& map, const Field& dhat,
                      const std::shared_ptr<const Mesh>& dst_mesh) {
    Field pushed = push_forward(f, map, dst_mesh);
    if (f.kind == FieldKind::velocity) return piola(pushed, dhat);
    return pushed;
}

Subspace transport_subspace(const Subspace& V, const std::shared_ptr<const Mesh>& dst_mesh) {
    if (!V.mesh) throw ContractError("transport_subspace: subspace has no mesh");
    if (!dst_mesh) throw ContractError("transport_subspace: null target mesh");
    if (V.dim() == 0) throw ContractError("transport_subspace: empty subspace");

    const VolumetricMap map = make_volumetric_map(V.mesh, dst_mesh->descriptor);
    const Eigen::SparseMatrix<double> P = interpolation_matrix(map, dst_mesh);
    const Field dhat = apply_interpolation(P, map.displacement, dst_mesh);

    const int nc = components(V.kind);
    Eigen::MatrixXd X(nc * dst_mesh->n_nodes(), V.dim());
    for (int j = 0; j < V.dim(); ++j) {
        Field col(V.mesh, V.kind, V.basis.col(j));
        Field pushed = apply_interpolation(P, col, dst_mesh);
        if (V.kind == FieldKind::velocity) pushed = piola(pushed, dhat);
        X.col(j) = pushed.coeffs;
    }

    auto metric = make_mass_matrix(dst_mesh, V.kind);
    Eigen::MatrixXd B = m_orthonormalize(X, metric, 1e-10);
    if (B.cols() == 0)
        throw IllPosedError("transport_subspace: all transported directions collapsed");

    Subspace out;
    out.mesh = dst_mesh;
    out.kind = V.kind;
    out.metric = metric;
    out.basis = std::move(B);
    return out;
}

} // namespace mrom
