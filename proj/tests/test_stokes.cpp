#include "mrom/errors.hpp"
#include "mrom/stokes.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace mrom;

namespace {

/// Nodal interpolant of the parabolic channel solution u0 (1 - (y/R)^2).
Field poiseuille_interpolant(const std::shared_ptr<const Mesh>& mesh, double u0) {
    const double R = mesh->descriptor.height / 2.0;
    Field f(mesh, FieldKind::velocity);
    for (int i = 0; i < mesh->n_nodes(); ++i) {
        const double y = mesh->nodes[i].y();
        f.at(i, 0) = u0 * (1.0 - (y / R) * (y / R));
    }
    return f;
}

double poiseuille_error(double h, double u0, double mu, double* stab_form = nullptr) {
    auto mesh = generate_mesh(testutil::straight_channel(), h);
    auto [u, p] = solve_steady(mesh, u0, mu, /*dt=*/2.0);
    auto M = make_mass_matrix(mesh, FieldKind::velocity);
    Field exact = poiseuille_interpolant(mesh, u0);
    Field diff(mesh, FieldKind::velocity, Eigen::VectorXd(u.coeffs - exact.coeffs));
    if (stab_form) {
        StokesOperator op(mesh, mu, 2.0);
        *stab_form = op.stabilization_form(p);
    }
    return norm(*M, diff) / norm(*M, exact);
}

} // namespace

TEST_CASE("system operator has one pressure and two velocity dofs per node") {
    auto mesh = generate_mesh(testutil::straight_channel(), 0.1);
    StokesOperator op(mesh, 0.035, 0.02);
    CHECK(op.n_dof() == 3 * mesh->n_nodes());
    CHECK(op.matrix().rows() == op.n_dof());
    CHECK(op.matrix().cols() == op.n_dof());
}

TEST_CASE("constant pressure lies in the stabilization kernel") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.05);
    StokesOperator op(mesh, 0.05, 0.02);
    Field ones(mesh, FieldKind::pressure, Eigen::VectorXd::Ones(mesh->n_nodes()));
    CHECK(op.stabilization_form(ones) <= 1e-14);
}

TEST_CASE("zero data produces the zero solution") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.1);
    StokesOperator op(mesh, 0.05, 0.02);
    Field zero(mesh, FieldKind::velocity);
    auto [u, p] = op.step(zero, 0.0);
    CHECK(u.coeffs.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(p.coeffs.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("inflow amplitude vanishes at the half period") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.1);
    // sin(2 pi 0.5) = 0, so a single step of size 0.5 from rest stays at rest.
    StokesOperator op(mesh, 0.05, 0.5);
    Field zero(mesh, FieldKind::velocity);
    auto [u, p] = op.step(zero, 0.4 * std::sin(2.0 * std::numbers::pi * 0.5));
    CHECK(u.coeffs.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("steady channel flow matches the parabolic profile") {
    const double rel = poiseuille_error(0.02, 1.0, 0.035);
    CHECK(rel <= 0.02);
}

TEST_CASE("steady channel error converges at second order") {
    double stab[3];
    const double hs[3] = {0.08, 0.04, 0.02};
    double errs[3];
    for (int k = 0; k < 3; ++k) errs[k] = poiseuille_error(hs[k], 1.0, 0.035, &stab[k]);
    CHECK(std::log2(errs[0] / errs[1]) >= 1.8);
    CHECK(std::log2(errs[1] / errs[2]) >= 1.8);

    // Pressure stabilization on the (linear-pressure) solution shrinks at
    // least like h^2: halving h divides the form by about 4.
    CHECK(stab[0] / stab[1] >= 3.0);
    CHECK(stab[1] / stab[2] >= 3.0);
}

TEST_CASE("transient run returns the expected snapshot count and zero inflow stays at rest") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.1);
    Trajectory traj = simulate(mesh, 0.5, 0.05, 0.02, 0.5);
    CHECK(traj.times.size() == 25);
    CHECK(traj.velocity.size() == 25);
    CHECK(traj.times.front() == doctest::Approx(0.02));
    CHECK(traj.times.back() == doctest::Approx(0.5));

    Trajectory still = simulate(mesh, 0.0, 0.05, 0.02, 0.5);
    for (const Field& u : still.velocity) CHECK(u.coeffs.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("inflow and outflow fluxes balance at every transient step") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.04);
    Trajectory traj = simulate(mesh, 0.8, 0.03, 0.02, 0.5);

    double peak = 0.0;
    for (const Field& u : traj.velocity)
        peak = std::max(peak, std::abs(boundary_flux(u, BoundaryTag::inflow)));
    REQUIRE(peak > 0.0);

    for (const Field& u : traj.velocity) {
        const double fin = boundary_flux(u, BoundaryTag::inflow);
        const double fout = boundary_flux(u, BoundaryTag::outflow);
        const double fwall = boundary_flux(u, BoundaryTag::wall);
        // Net flux vanishes; mismatch normalized by the peak through-flux
        // (steps near the sine zero crossings carry almost no flow).
        CHECK(std::abs(fin + fout) <= 0.01 * peak);
        CHECK(std::abs(fwall) <= 1e-12);
    }
}

TEST_CASE("free decay is monotone in the mesh norm") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.05);
    auto M = make_mass_matrix(mesh, FieldKind::velocity);
    StokesOperator op(mesh, 0.05, 0.02);

    Field u = testutil::random_field(mesh, FieldKind::velocity, 99);
    // First step projects the arbitrary state into the constrained space.
    u = op.step(u, 0.0).first;
    double prev = norm(*M, u);
    for (int k = 0; k < 25; ++k) {
        u = op.step(u, 0.0).first;
        const double cur = norm(*M, u);
        CHECK(cur <= prev * (1.0 + 1e-12));
        prev = cur;
    }
}

TEST_CASE("solver rejects non-physical setup") {
    auto mesh = generate_mesh(testutil::straight_channel(), 0.1);
    CHECK_THROWS_AS(StokesOperator(mesh, -1.0, 0.02), ContractError);
    CHECK_THROWS_AS(StokesOperator(mesh, 0.05, 0.0), ContractError);
    CHECK_THROWS_AS(simulate(mesh, 0.5, 0.05, 0.02, 0.0), ContractError);

    ParameterSample bad{.t = 0.0, .u0 = 2.0, .mu = 0.05};
    CHECK_THROWS_AS(bad.validate(), ContractError);
    ParameterSample good{.t = 0.25, .u0 = 0.5, .mu = 0.05};
    CHECK_NOTHROW(good.validate());
}

TEST_CASE("solve statistics count factorizations and solves") {
    auto mesh = generate_mesh(testutil::narrow_channel(), 0.1);
    SolveStats stats;
    simulate(mesh, 0.5, 0.05, 0.02, 0.5, &stats);
    CHECK(stats.factorizations == 1);
    CHECK(stats.solves == 25);
    CHECK(stats.max_rel_residual <= 1e-10);
}
