#include "mrom/stokes.hpp"

#include "mrom/errors.hpp"
#include "mrom/geometry.hpp"
#include "mrom/instrument.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mrom {

void ParameterSample::validate() const {
    const auto bad = [](const char* name, double v, double lo, double hi) {
        std::ostringstream os;
        os << "ParameterSample: " << name << " = " << v << " outside [" << lo << ", " << hi << "]";
        return ContractError(os.str());
    };
    if (t < 0.0 || t > 0.5) throw bad("t", t, 0.0, 0.5);
    if (u0 < 0.01 || u0 > 1.0) throw bad("u0", u0, 0.01, 1.0);
    if (mu < 0.01 || mu > 0.1) throw bad("mu", mu, 0.01, 0.1);
}

void SolveStats::merge(const SolveStats& other) {
    factorizations += other.factorizations;
    solves += other.solves;
    max_rel_residual = std::max(max_rel_residual, other.max_rel_residual);
}

namespace {

double longest_edge(const Mesh& m, int t) {
    const auto& tri = m.triangles[t];
    double best = 0.0;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d d = m.nodes[tri[k]] - m.nodes[tri[(k + 1) % 3]];
        best = std::max(best, d.norm());
    }
    return best;
}

} // namespace

StokesOperator::StokesOperator(std::shared_ptr<const Mesh> mesh, double mu, double dt)
    : mesh_(std::move(mesh)), mu_(mu), dt_(dt) {
    if (mu <= 0.0) throw ContractError("StokesOperator: viscosity must be positive");
    if (dt <= 0.0) throw ContractError("StokesOperator: time step must be positive");
    instrument::count_stokes_operator();

    const Mesh& m = *mesh_;
    const int n = m.n_nodes();

    // Dof layout matches Field: [ux(0..n) | uy(0..n) | p(0..n)].
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(m.n_triangles()) * 60);

    std::vector<Eigen::Triplet<double>> stab_trips;
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto& tri = m.triangles[t];
        const fem::TriangleGeom geo = fem::triangle_geom(m, t);
        const double a = geo.area;
        const double hT2 = longest_edge(m, t) * longest_edge(m, t);

        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const int gi = tri[i], gj = tri[j];
                // (1/dt) mass + mu stiffness on each velocity component.
                const double mass = a / 12.0 * (i == j ? 2.0 : 1.0);
                const double stiff = a * geo.grad.col(i).dot(geo.grad.col(j));
                const double vv = mass / dt_ + mu_ * stiff;
                trips.emplace_back(gi, gj, vv);
                trips.emplace_back(n + gi, n + gj, vv);

                // -<p, div v>: row = velocity (gi, component c), col = pressure gj.
                // integral_T psi_j d_c(phi_i) = grad(c, i) * a / 3.
                for (int c = 0; c < 2; ++c) {
                    const double div_ip = geo.grad(c, i) * a / 3.0;
                    trips.emplace_back(c * n + gi, 2 * n + gj, -div_ip);
                    // +<div u, q>: row = pressure gi, col = velocity (gj, c).
                    const double div_pj = geo.grad(c, j) * a / 3.0;
                    trips.emplace_back(2 * n + gi, c * n + gj, div_pj);
                }

                // Brezzi-Pitkaranta stabilization h_T^2 <grad p, grad q>_T.
                const double s = hT2 * stiff;
                trips.emplace_back(2 * n + gi, 2 * n + gj, s);
                stab_trips.emplace_back(gi, gj, s);
            }
        }
    }

    Eigen::SparseMatrix<double> A(3 * n, 3 * n);
    A.setFromTriplets(trips.begin(), trips.end());
    stab_.resize(n, n);
    stab_.setFromTriplets(stab_trips.begin(), stab_trips.end());

    auto Mv = make_mass_matrix(mesh_, FieldKind::velocity);
    mass_vel_ = Mv->mat;

    // Dirichlet set: walls (both components zero) and inflow (parabolic
    // axial profile, zero transverse). Nodes shared by inflow and wall get
    // profile value zero, so the two assignments agree.
    is_dirichlet_.assign(3 * n, 0);
    g_unit_ = Eigen::VectorXd::Zero(3 * n);
    const double r0 = half_height_profile(m.descriptor, 0.0);
    for (const BoundaryEdge& e : m.boundary_edges) {
        for (int node : {e.a, e.b}) {
            if (e.tag == BoundaryTag::wall) {
                is_dirichlet_[node] = 1;
                is_dirichlet_[n + node] = 1;
                g_unit_[node] = 0.0;
                g_unit_[n + node] = 0.0;
            } else if (e.tag == BoundaryTag::inflow) {
                const double y = m.nodes[node].y();
                if (!is_dirichlet_[node]) // walls win (corner nodes)
                    g_unit_[node] = 1.0 - (y / r0) * (y / r0);
                is_dirichlet_[node] = 1;
                is_dirichlet_[n + node] = 1;
            }
        }
    }

    coupling_ = A * g_unit_;

    // Row/column elimination: identity rows for constrained dofs, zeroed
    // columns (their effect moves to the right-hand side via coupling_).
    for (int k = 0; k < A.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
            if (is_dirichlet_[it.row()] || is_dirichlet_[it.col()])
                it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
        }
    }
    A.prune(0.0);
    A_ = std::move(A);

    lu_.compute(A_);
    if (lu_.info() != Eigen::Success)
        throw SolverError("StokesOperator: sparse factorization failed");
}

std::pair<Field, Field> StokesOperator::step(const Field& u_prev, double inflow_scale,
                                             SolveStats* stats) const {
    if (u_prev.mesh != mesh_ || u_prev.kind != FieldKind::velocity)
        throw ContractError("StokesOperator::step: previous velocity on wrong mesh or kind");
    instrument::count_stokes_step();

    const int n = mesh_->n_nodes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
    rhs.head(2 * n) = mass_vel_ * u_prev.coeffs / dt_;

    // Symmetric correction: subtract the coupling of the prescribed values,
    // then pin the constrained entries to the boundary data.
    rhs -= inflow_scale * coupling_;
    for (int i = 0; i < 3 * n; ++i)
        if (is_dirichlet_[i]) rhs[i] = inflow_scale * g_unit_[i];

    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw SolverError("StokesOperator::step: solve failed");

    const double rhs_norm = rhs.norm();
    const double rel = (A_ * x - rhs).norm() / std::max(rhs_norm, 1e-300);
    if (rhs_norm > 1e-14 && rel > 1e-10) {
        std::ostringstream os;
        os << "StokesOperator::step: relative residual " << rel << " exceeds 1e-10";
        throw SolverError(os.str());
    }
    if (stats) {
        ++stats->solves;
        stats->max_rel_residual = std::max(stats->max_rel_residual, rel);
    }

    Field u(mesh_, FieldKind::velocity, x.head(2 * n));
    Field p(mesh_, FieldKind::pressure, x.tail(n));
    return {std::move(u), std::move(p)};
}

double StokesOperator::stabilization_form(const Field& p) const {
    if (p.kind != FieldKind::pressure || p.mesh != mesh_)
        throw ContractError("stabilization_form: expects a pressure field on the operator mesh");
    return p.coeffs.dot(stab_ * p.coeffs);
}

double boundary_flux(const Field& u, BoundaryTag tag) {
    if (u.kind != FieldKind::velocity)
        throw ContractError("boundary_flux: expects a velocity field");
    const Mesh& m = *u.mesh;
    double flux = 0.0;
    for (const BoundaryEdge& e : m.boundary_edges) {
        if (e.tag != tag) continue;
        const Eigen::Vector2d pa = m.nodes[e.a], pb = m.nodes[e.b];
        const Eigen::Vector2d tangent = pb - pa;
        // Boundary loop is counter-clockwise, so the outward normal is the
        // tangent rotated by -90 degrees.
        const Eigen::Vector2d normal(tangent.y(), -tangent.x()); // length = |e|
        const Eigen::Vector2d ua(u.at(e.a, 0), u.at(e.a, 1));
        const Eigen::Vector2d ub(u.at(e.b, 0), u.at(e.b, 1));
        flux += 0.5 * (ua + ub).dot(normal); // trapezoid, exact for P1
    }
    return flux;
}

Trajectory simulate(const std::shared_ptr<const Mesh>& mesh, double u0, double mu,
                    double dt, double t_end, SolveStats* stats) {
    // Amplitude/viscosity range checks live with the parameter sampling;
    // the solver only needs a well-posed problem (mu > 0 via the operator).
    if (u0 < 0.0) throw ContractError("simulate: inflow amplitude must be non-negative");
    if (dt <= 0.0 || t_end < dt) throw ContractError("simulate: need 0 < dt <= t_end");

    StokesOperator op(mesh, mu, dt);
    if (stats) ++stats->factorizations;

    const int steps = static_cast<int>(std::llround(t_end / dt));
    Trajectory traj;
    traj.times.reserve(steps);
    traj.velocity.reserve(steps);

    Field u(mesh, FieldKind::velocity); // u(0) = 0
    for (int k = 1; k <= steps; ++k) {
        const double t = k * dt;
        const double scale = u0 * std::sin(2.0 * std::numbers::pi * t);
        auto [unew, pnew] = op.step(u, scale, stats);
        u = std::move(unew);
        traj.times.push_back(t);
        traj.velocity.push_back(u);
    }
    return traj;
}

std::pair<Field, Field> solve_steady(const std::shared_ptr<const Mesh>& mesh, double u0,
                                     double mu, double dt, double tol, int max_steps,
                                     SolveStats* stats) {
    StokesOperator op(mesh, mu, dt);
    if (stats) ++stats->factorizations;

    Field u(mesh, FieldKind::velocity);
    Field p(mesh, FieldKind::pressure);
    for (int k = 0; k < max_steps; ++k) {
        auto [unew, pnew] = op.step(u, u0, stats);
        const double inc = (unew.coeffs - u.coeffs).norm();
        const double ref = std::max(unew.coeffs.norm(), 1e-300);
        u = std::move(unew);
        p = std::move(pnew);
        if (inc <= tol * ref) return {std::move(u), std::move(p)};
    }
    throw SolverError("solve_steady: no stationary state within the step budget");
}

} // namespace mrom
