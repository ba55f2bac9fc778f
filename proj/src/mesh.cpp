#include "mrom/mesh.hpp"
#include "mrom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mrom {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() * b.y() - a.y() * b.x();
}

double signed_area(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                   const Eigen::Vector2d& p2) {
    return 0.5 * cross2(p1 - p0, p2 - p0);
}

} // namespace

std::string to_string(BoundaryTag tag) {
    switch (tag) {
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::outflow: return "outflow";
    case BoundaryTag::wall: return "wall";
    }
    return "wall";
}

BoundaryTag boundary_tag_from_string(const std::string& s) {
    if (s == "inflow") return BoundaryTag::inflow;
    if (s == "outflow") return BoundaryTag::outflow;
    if (s == "wall") return BoundaryTag::wall;
    throw IoError("unknown boundary tag '" + s + "'");
}

// ---------------------------------------------------------------------------
// PointLocator

PointLocator::PointLocator(const std::vector<Eigen::Vector2d>& nodes,
                           const std::vector<std::array<int, 3>>& triangles)
    : nodes_(nodes), triangles_(triangles) {
    if (nodes.empty() || triangles.empty())
        throw ContractError("PointLocator: empty mesh");
    lo_ = nodes.front();
    hi_ = nodes.front();
    for (const auto& p : nodes) {
        lo_ = lo_.cwiseMin(p);
        hi_ = hi_.cwiseMax(p);
    }
    const Eigen::Vector2d span = (hi_ - lo_).cwiseMax(1e-30);
    const double target = std::sqrt(span.x() * span.y() / triangles.size());
    nbx_ = std::max(1, static_cast<int>(std::floor(span.x() / target)));
    nby_ = std::max(1, static_cast<int>(std::floor(span.y() / target)));
    bins_.resize(static_cast<size_t>(nbx_) * nby_);

    auto bin_of = [&](double v, double lo, double span1, int nb) {
        int i = static_cast<int>((v - lo) / span1 * nb);
        return std::clamp(i, 0, nb - 1);
    };
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
        Eigen::Vector2d tlo = nodes[triangles[t][0]];
        Eigen::Vector2d thi = tlo;
        for (int k = 1; k < 3; ++k) {
            tlo = tlo.cwiseMin(nodes[triangles[t][k]]);
            thi = thi.cwiseMax(nodes[triangles[t][k]]);
        }
        const int i0 = bin_of(tlo.x(), lo_.x(), span.x(), nbx_);
        const int i1 = bin_of(thi.x(), lo_.x(), span.x(), nbx_);
        const int j0 = bin_of(tlo.y(), lo_.y(), span.y(), nby_);
        const int j1 = bin_of(thi.y(), lo_.y(), span.y(), nby_);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                bins_[static_cast<size_t>(i) * nby_ + j].push_back(t);
    }
}

std::optional<Location> PointLocator::locate(const Eigen::Vector2d& p) const {
    constexpr double tol = 1e-10;
    if (p.x() < lo_.x() - tol || p.x() > hi_.x() + tol ||
        p.y() < lo_.y() - tol || p.y() > hi_.y() + tol)
        return std::nullopt;
    const Eigen::Vector2d span = (hi_ - lo_).cwiseMax(1e-30);
    const int bi = std::clamp(static_cast<int>((p.x() - lo_.x()) / span.x() * nbx_), 0, nbx_ - 1);
    const int bj = std::clamp(static_cast<int>((p.y() - lo_.y()) / span.y() * nby_), 0, nby_ - 1);
    for (int t : bins_[static_cast<size_t>(bi) * nby_ + bj]) {
        const auto& tri = triangles_[t];
        const Eigen::Vector2d& p0 = nodes_[tri[0]];
        const Eigen::Vector2d& p1 = nodes_[tri[1]];
        const Eigen::Vector2d& p2 = nodes_[tri[2]];
        const double det = cross2(p1 - p0, p2 - p0);
        if (det <= 0.0)
            continue;
        double l0 = cross2(p1 - p, p2 - p) / det;
        double l1 = cross2(p2 - p, p0 - p) / det;
        double l2 = cross2(p0 - p, p1 - p) / det;
        if (l0 >= -tol && l1 >= -tol && l2 >= -tol) {
            Location loc;
            loc.triangle = t;
            l0 = std::clamp(l0, 0.0, 1.0);
            l1 = std::clamp(l1, 0.0, 1.0);
            l2 = std::clamp(l2, 0.0, 1.0);
            const double s = l0 + l1 + l2;
            loc.bary = {l0 / s, l1 / s, l2 / s};
            return loc;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Mesh

double Mesh::triangle_area(int t) const {
    const auto& tri = triangles[t];
    return signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

double Mesh::total_area() const {
    double a = 0.0;
    for (int t = 0; t < n_triangles(); ++t)
        a += triangle_area(t);
    return a;
}

Eigen::Vector2d Mesh::bbox_min() const {
    Eigen::Vector2d lo = nodes.front();
    for (const auto& p : nodes)
        lo = lo.cwiseMin(p);
    return lo;
}

Eigen::Vector2d Mesh::bbox_max() const {
    Eigen::Vector2d hi = nodes.front();
    for (const auto& p : nodes)
        hi = hi.cwiseMax(p);
    return hi;
}

const PointLocator& Mesh::locator() const {
    std::call_once(locator_once_,
                   [this] { locator_ = std::make_unique<PointLocator>(nodes, triangles); });
    return *locator_;
}

std::shared_ptr<const Mesh> generate_mesh(const GeometryDescriptor& g, double h) {
    g.validate();
    if (!(h > 0.0) || h >= std::min(g.throat_radius, g.height / 2.0))
        throw ContractError("generate_mesh: element size h must satisfy 0 < h < min(S_r, D/2)");

    const int nx = static_cast<int>(std::ceil(g.length / h));
    const int ny = static_cast<int>(std::ceil(g.height / h));
    auto mesh = std::make_shared<Mesh>();
    mesh->descriptor = g;
    mesh->h = h;

    auto idx = [ny](int i, int j) { return i * (ny + 1) + j; };
    mesh->nodes.resize(static_cast<size_t>(nx + 1) * (ny + 1));
    for (int i = 0; i <= nx; ++i) {
        const double x = g.length * static_cast<double>(i) / nx;
        const double hx = half_height_profile(g, x);
        if (!(hx > 0.0))
            throw GeometryError("generate_mesh: degenerate profile h(x) <= 0 at x=" +
                                std::to_string(x));
        const double scale = hx / (g.height / 2.0);
        for (int j = 0; j <= ny; ++j) {
            const double yref = -g.height / 2.0 + g.height * static_cast<double>(j) / ny;
            mesh->nodes[idx(i, j)] = Eigen::Vector2d(x, yref * scale);
        }
    }

    mesh->triangles.reserve(static_cast<size_t>(2) * nx * ny);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const int a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
            mesh->triangles.push_back({a, b, c});
            mesh->triangles.push_back({a, c, d});
        }
    }
    for (int t = 0; t < mesh->n_triangles(); ++t)
        if (mesh->triangle_area(t) <= 0.0)
            throw GeometryError("generate_mesh: non-positive triangle area");

    // Boundary loop, counterclockwise: bottom wall, outflow, top wall, inflow.
    for (int i = 0; i < nx; ++i)
        mesh->boundary_edges.push_back({idx(i, 0), idx(i + 1, 0), BoundaryTag::wall});
    for (int j = 0; j < ny; ++j)
        mesh->boundary_edges.push_back({idx(nx, j), idx(nx, j + 1), BoundaryTag::outflow});
    for (int i = nx; i > 0; --i)
        mesh->boundary_edges.push_back({idx(i, ny), idx(i - 1, ny), BoundaryTag::wall});
    for (int j = ny; j > 0; --j)
        mesh->boundary_edges.push_back({idx(0, j), idx(0, j - 1), BoundaryTag::inflow});

    return mesh;
}

std::optional<Location> locate_point(const Mesh& m, const Eigen::Vector2d& p) {
    return m.locator().locate(p);
}

// ---------------------------------------------------------------------------
// Text I/O. Floats are printed with 17 significant digits.

void write_mesh(std::ostream& os, const Mesh& m) {
    os << std::setprecision(17);
    os << "NODES " << m.n_nodes() << "\n";
    for (int i = 0; i < m.n_nodes(); ++i)
        os << i << " " << m.nodes[i].x() << " " << m.nodes[i].y() << "\n";
    os << "TRIANGLES " << m.n_triangles() << "\n";
    for (int t = 0; t < m.n_triangles(); ++t)
        os << t << " " << m.triangles[t][0] << " " << m.triangles[t][1] << " "
           << m.triangles[t][2] << "\n";
    os << "BOUNDARY " << m.boundary_edges.size() << "\n";
    for (const auto& e : m.boundary_edges)
        os << e.a << " " << e.b << " " << to_string(e.tag) << "\n";
    os << "DESCRIPTOR\n";
    os << m.descriptor.throat_radius << " " << m.descriptor.throat_length << " "
       << m.descriptor.throat_center << " " << m.descriptor.length << " "
       << m.descriptor.height << " " << m.h << "\n";
}

void write_mesh_file(const std::string& path, const Mesh& m) {
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot open '" + path + "' for writing");
    write_mesh(os, m);
}

std::shared_ptr<const Mesh> read_mesh(std::istream& is) {
    auto mesh = std::make_shared<Mesh>();
    std::string keyword;
    if (!(is >> keyword) || keyword != "NODES")
        throw IoError("mesh file: expected NODES section");
    int n = 0;
    is >> n;
    mesh->nodes.resize(n);
    for (int i = 0; i < n; ++i) {
        int id;
        double x, y;
        if (!(is >> id >> x >> y))
            throw IoError("mesh file: truncated NODES section");
        mesh->nodes[id] = Eigen::Vector2d(x, y);
    }
    if (!(is >> keyword) || keyword != "TRIANGLES")
        throw IoError("mesh file: expected TRIANGLES section");
    is >> n;
    mesh->triangles.resize(n);
    for (int i = 0; i < n; ++i) {
        int id, a, b, c;
        if (!(is >> id >> a >> b >> c))
            throw IoError("mesh file: truncated TRIANGLES section");
        mesh->triangles[id] = {a, b, c};
    }
    if (!(is >> keyword) || keyword != "BOUNDARY")
        throw IoError("mesh file: expected BOUNDARY section");
    is >> n;
    mesh->boundary_edges.resize(n);
    for (int i = 0; i < n; ++i) {
        int a, b;
        std::string tag;
        if (!(is >> a >> b >> tag))
            throw IoError("mesh file: truncated BOUNDARY section");
        mesh->boundary_edges[i] = {a, b, boundary_tag_from_string(tag)};
    }
    if (!(is >> keyword) || keyword != "DESCRIPTOR")
        throw IoError("mesh file: expected DESCRIPTOR section");
    auto& g = mesh->descriptor;
    if (!(is >> g.throat_radius >> g.throat_length >> g.throat_center >> g.length >> g.height >>
          mesh->h))
        throw IoError("mesh file: truncated DESCRIPTOR section");
    return mesh;
}

std::shared_ptr<const Mesh> read_mesh_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    return read_mesh(is);
}

} // namespace mrom
