// Acceptance suite: one case per shipping criterion, each printing a single
// PASS/FAIL line with the measured quantities. The heavyweight fixtures (the
// default 3x3 atlas and its benchmark) are built once, single-threaded, and
// timed; later cases reuse them.

#include "mrom/errors.hpp"
#include "mrom/io.hpp"
#include "mrom/morpho.hpp"
#include "mrom/observe.hpp"
#include "mrom/parallel.hpp"
#include "mrom/pbdw.hpp"
#include "mrom/pipeline.hpp"
#include "mrom/stokes.hpp"
#include "mrom/transport.hpp"

#include <doctest.h>

#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mrom;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::cout << "[criterion " << id << "] " << name << ": " << (pass ? "PASS" : "FAIL")
              << (detail.empty() ? "" : " (" + detail + ")") << "\n"
              << std::flush;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

/// Default-scale atlas + benchmark, built once and timed single-threaded.
struct DeskSetup {
    Atlas atlas;
    BenchmarkSpec spec;
    BenchmarkReport report;
    double train_s = 0.0;
    double bench_s = 0.0;
};

const DeskSetup& desk() {
    static const DeskSetup d = [] {
        set_max_threads(1);
        DeskSetup out;
        auto t0 = std::chrono::steady_clock::now();
        out.atlas = train(TrainingConfig{});
        out.train_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        out.report = benchmark(out.atlas, out.spec);
        out.bench_s = seconds_since(t0);
        return out;
    }();
    return d;
}

/// Observation space of a mesh under the atlas' measurement setup.
ObservationSpace desk_observation(const std::shared_ptr<const Mesh>& mesh,
                                  const std::shared_ptr<const MassMatrix>& metric) {
    const TrainingConfig& cfg = desk().atlas.config;
    return make_observation_space(make_voxel_grid(mesh, cfg.voxel, cfg.beam), metric);
}

Subspace toy_space(const Eigen::MatrixXd& raw) {
    Subspace s;
    s.kind = FieldKind::velocity;
    s.basis = m_orthonormalize(raw, nullptr);
    return s;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = g(rng);
    return m;
}

} // namespace

TEST_CASE("criterion 1: exact recovery of reduced-space members") {
    const TemplateEntry& tpl = desk().atlas.templates[0];
    const ObservationSpace obs = desk_observation(tpl.mesh, tpl.basis.metric);

    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(101);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd c(tpl.basis.dim());
        for (int i = 0; i < c.size(); ++i) c[i] = g(rng);
        const Field u(tpl.mesh, FieldKind::velocity, tpl.basis.basis * c);
        const Eigen::VectorXd y = measure(u, obs.grid);
        const ReconstructionResult r = reconstruct(obs.mix * y, tpl.basis, obs.space);
        worst = std::max(worst, norm(*tpl.basis.metric, r.estimate - u.coeffs) /
                                    norm(*tpl.basis.metric, u.coeffs));
    }
    const double secs = seconds_since(t0);

    const bool pass = worst <= 1e-9 && secs < 10.0;
    report(1, "exact recovery of reduced-space members", pass,
           "max rel err " + fmt(worst) + ", " + fmt(secs) + " s for 50 members");
    CHECK(pass);
}

TEST_CASE("criterion 2: agreement with the dense constrained-minimization oracle") {
    const int d = 50, n = 3, m = 6;
    std::mt19937 rng(202);
    double worst = 0.0;
    int trials = 0;
    while (trials < 100) {
        const Subspace V = toy_space(random_matrix(d, n, rng));
        const Subspace W = toy_space(random_matrix(d, m, rng));
        if (inf_sup_beta(V, W) <= 1e-6) continue; // oracle degenerates too
        ++trials;
        Eigen::VectorXd y(m);
        for (int i = 0; i < m; ++i) y[i] = std::normal_distribution<double>()(rng);

        // Oracle: minimize ||(I - P_V) v||^2 subject to W^T v = y via the
        // full KKT system in the ambient space.
        const Eigen::MatrixXd Q =
            Eigen::MatrixXd::Identity(d, d) - V.basis * V.basis.transpose();
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d + m, d + m);
        K.topLeftCorner(d, d) = Q;
        K.topRightCorner(d, m) = W.basis;
        K.bottomLeftCorner(m, d) = W.basis.transpose();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + m);
        rhs.tail(m) = y;
        const Eigen::VectorXd v = Eigen::FullPivLU<Eigen::MatrixXd>(K).solve(rhs).head(d);

        const ReconstructionResult r = reconstruct(y, V, W);
        worst = std::max(worst, (r.estimate - v).norm() / v.norm());
    }
    const bool pass = worst <= 1e-8;
    report(2, "agreement with the dense constrained-minimization oracle", pass,
           "max rel diff " + fmt(worst) + " over 100 trials");
    CHECK(pass);
}

TEST_CASE("criterion 3: a-posteriori stability bound on flow snapshots") {
    const TemplateEntry& tpl = desk().atlas.templates[0];
    const ObservationSpace obs = desk_observation(tpl.mesh, tpl.basis.metric);

    std::mt19937 rng(303);
    std::uniform_real_distribution<double> u0s(0.2, 1.0), mus(0.01, 0.1);
    double worst_slack = 0.0;
    int count = 0;
    bool all_hold = true;
    for (int run = 0; run < 4; ++run) {
        const Trajectory traj = simulate(tpl.mesh, u0s(rng), mus(rng), 0.02, 0.5);
        for (const Field& u : traj.velocity) {
            const Eigen::VectorXd y = measure(u, obs.grid);
            const ReconstructionResult r = reconstruct(obs.mix * y, tpl.basis, obs.space);
            const ErrorBoundReport rep = error_bound_check(u, r, tpl.basis);
            all_hold = all_hold && rep.holds;
            if (rep.bound > 0.0) worst_slack = std::max(worst_slack, rep.error / rep.bound);
            ++count;
        }
    }
    const bool pass = all_hold && count == 100;
    report(3, "a-posteriori stability bound on flow snapshots", pass,
           "holds for " + std::to_string(count) + " snapshots, max error/bound " +
               fmt(worst_slack));
    CHECK(pass);
}

TEST_CASE("criterion 4: stability-accuracy trade-off over the reduced dimension") {
    const DeskSetup& dsk = desk();
    const TemplateEntry& tpl = dsk.atlas.templates[0];
    const ObservationSpace obs0 = desk_observation(tpl.mesh, tpl.basis.metric);

    bool beta_monotone = true;
    double prev = 2.0;
    for (int nn = 1; nn <= tpl.basis.dim(); ++nn) {
        const double b = inf_sup_beta(tpl.basis.head(nn), obs0.space);
        beta_monotone = beta_monotone && b <= prev + 1e-14;
        prev = b;
    }

    // Interior error minimum on a test geometry reconstructed through the
    // selected template's transported basis.
    const std::vector<GeometryDescriptor> tests = dsk.spec.test_geometries(dsk.atlas.config);
    int found = -1, found_nstar = 0, found_m = 0;
    for (std::size_t ti = 0; ti < tests.size() && found < 0; ++ti) {
        const auto mesh = generate_mesh(tests[ti], dsk.atlas.config.h);
        const auto metric = make_mass_matrix(mesh, FieldKind::velocity);
        const ObservationSpace obs = desk_observation(mesh, metric);
        const Subspace v_hat =
            transport_subspace(dsk.atlas.templates[dsk.report.targets[ti].bt].basis, mesh);
        std::vector<Field> val;
        for (const auto& [u0, mu] : {std::pair{0.8, 0.03}, std::pair{0.4, 0.07}}) {
            const Trajectory traj = simulate(mesh, u0, mu, 0.02, 0.5);
            val.insert(val.end(), traj.velocity.begin(), traj.velocity.end());
        }
        const SweepResult sw = sweep_n(val, v_hat, obs.space, ErrorMode::mean_square);
        const int m = obs.grid.m();
        if (sw.n_star > 1 && sw.n_star < m) {
            found = static_cast<int>(ti);
            found_nstar = sw.n_star;
            found_m = m;
            io::atomic_write("acceptance_sweep_curve.csv", false, [&](std::ostream& os) {
                os << "n,error,beta\n";
                for (std::size_t i = 0; i < sw.n.size(); ++i)
                    os << sw.n[i] << "," << io::format_double(sw.error[i]) << ","
                       << io::format_double(sw.beta[i]) << "\n";
            });
        }
    }

    const bool pass = beta_monotone && found >= 0;
    report(4, "stability-accuracy trade-off over the reduced dimension", pass,
           std::string("beta non-increasing: ") + (beta_monotone ? "yes" : "NO") +
               (found >= 0 ? ", test geometry " + std::to_string(found) + " has n* = " +
                                 std::to_string(found_nstar) + " in (1, m = " +
                                 std::to_string(found_m) +
                                 "), curve in acceptance_sweep_curve.csv"
                           : ", no interior minimum found"));
    CHECK(pass);
}

TEST_CASE("criterion 5: stability loss bounded by the subspace perturbation") {
    const int d = 20, n = 3, m = 8;
    std::mt19937 rng(505);
    std::uniform_real_distribution<double> eps(0.01, 0.4);
    int accepted = 0, attempts = 0;
    double min_margin = 1e300;
    bool all_hold = true;
    while (accepted < 100 && ++attempts < 10000) {
        const Subspace V = toy_space(random_matrix(d, n, rng));
        const Subspace W = toy_space(random_matrix(d, m, rng));
        const Subspace Vh = toy_space(V.basis + eps(rng) * random_matrix(d, n, rng));
        const double beta = inf_sup_beta(V, W);
        const double delta = sphere_hausdorff(Vh, V);
        if (!(delta < beta)) continue;
        ++accepted;
        const double lhs = std::pow(inf_sup_beta(Vh, W), 2);
        const double rhs = 1.0 - std::pow(1.0 - beta + delta, 2);
        all_hold = all_hold && lhs >= rhs - 1e-9;
        min_margin = std::min(min_margin, lhs - rhs);
    }
    const bool pass = all_hold && accepted == 100;
    report(5, "stability loss bounded by the subspace perturbation", pass,
           std::to_string(accepted) + " admissible trials, min margin " + fmt(min_margin));
    CHECK(pass);
}

TEST_CASE("criterion 6: subspace-sphere distance against direct sampling") {
    std::mt19937 rng(606);

    const Subspace A = toy_space(random_matrix(10, 2, rng));
    Subspace copy = A;
    const double d_same = sphere_hausdorff(A, copy);

    Subspace E01, E23;
    E01.basis = Eigen::MatrixXd::Zero(10, 2);
    E01.basis(0, 0) = E01.basis(1, 1) = 1.0;
    E23.basis = Eigen::MatrixXd::Zero(10, 2);
    E23.basis(2, 0) = E23.basis(3, 1) = 1.0;
    const double d_orth = sphere_hausdorff(E01, E23);

    // Sampling oracle: the worst distance of a unit vector of either sphere
    // to the other subspace, over many sampled sphere points.
    const auto sampled = [&rng](const Subspace& S, const Subspace& T) {
        std::normal_distribution<double> g(0.0, 1.0);
        double worst = 0.0;
        for (int s = 0; s < 20000; ++s) {
            Eigen::VectorXd c(S.dim());
            for (int i = 0; i < c.size(); ++i) c[i] = g(rng);
            const Eigen::VectorXd u = (S.basis * c).normalized();
            const double proj2 = (T.basis.transpose() * u).squaredNorm();
            worst = std::max(worst, std::sqrt(std::max(0.0, 1.0 - proj2)));
        }
        return worst;
    };

    double worst_rel = 0.0;
    for (int pair = 0; pair < 20; ++pair) {
        const Subspace P = toy_space(random_matrix(10, 2, rng));
        const Subspace Q = toy_space(random_matrix(10, 2, rng));
        const double formula = sphere_hausdorff(P, Q);
        const double mc = std::max(sampled(P, Q), sampled(Q, P));
        worst_rel = std::max(worst_rel, std::abs(mc - formula) / formula);
    }

    const bool pass = d_same <= 1e-9 && std::abs(d_orth - 1.0) <= 1e-12 && worst_rel <= 0.02;
    report(6, "subspace-sphere distance against direct sampling", pass,
           "identical " + fmt(d_same) + ", |orthogonal - 1| " + fmt(std::abs(d_orth - 1.0)) +
               ", max sampling deviation " + fmt(100.0 * worst_rel) + "% over 20 pairs");
    CHECK(pass);
}

TEST_CASE("criterion 7: embedding reproduces exact euclidean configurations") {
    std::mt19937 rng(707);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int K = std::uniform_int_distribution<int>(3, 20)(rng);
        const int q = std::uniform_int_distribution<int>(1, 3)(rng);
        const Eigen::MatrixXd pts = random_matrix(q, K, rng);
        Eigen::MatrixXd D(K, K);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) D(i, j) = (pts.col(i) - pts.col(j)).squaredNorm();
        const MdsResult m = mds(D, q);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                worst = std::max(worst, std::abs((m.coords.col(i) - m.coords.col(j)).norm() -
                                                 (pts.col(i) - pts.col(j)).norm()));
    }

    Eigen::MatrixXd tri = Eigen::MatrixXd::Ones(3, 3);
    tri.diagonal().setZero();
    const MdsResult t = mds(tri, 2);
    const double ev_err =
        std::max(std::abs(t.eigenvalues[0] - 0.5), std::abs(t.eigenvalues[1] - 0.5));

    const bool pass = worst <= 1e-8 && ev_err <= 1e-10;
    report(7, "embedding reproduces exact euclidean configurations", pass,
           "max distance error " + fmt(worst) + " over 20 configurations, "
           "equilateral spectrum error " + fmt(ev_err));
    CHECK(pass);
}

TEST_CASE("criterion 8: flow solver validation on the straight channel") {
    const auto t0 = std::chrono::steady_clock::now();

    const auto poiseuille_error = [](double h) {
        const auto mesh = generate_mesh(testutil::straight_channel(), h);
        const auto [u, p] = solve_steady(mesh, 1.0, 0.035, /*dt=*/2.0);
        const auto M = make_mass_matrix(mesh, FieldKind::velocity);
        const double R = mesh->descriptor.height / 2.0;
        Field exact(mesh, FieldKind::velocity);
        for (int i = 0; i < mesh->n_nodes(); ++i) {
            const double y = mesh->nodes[i].y();
            exact.at(i, 0) = 1.0 - (y / R) * (y / R);
        }
        const Field diff(mesh, FieldKind::velocity, Eigen::VectorXd(u.coeffs - exact.coeffs));
        return norm(*M, diff) / norm(*M, exact);
    };

    const double e8 = poiseuille_error(0.08);
    const double e4 = poiseuille_error(0.04);
    const double e2 = poiseuille_error(0.02);
    const double order1 = std::log2(e8 / e4);
    const double order2 = std::log2(e4 / e2);

    // Flux balance at every transient step, normalized by the peak
    // through-flux (steps at the sine zero crossings carry almost no flow).
    const auto mesh = generate_mesh(testutil::straight_channel(), 0.04);
    const Trajectory traj = simulate(mesh, 0.8, 0.03, 0.02, 0.5);
    double peak = 0.0;
    for (const Field& u : traj.velocity)
        peak = std::max(peak, std::abs(boundary_flux(u, BoundaryTag::inflow)));
    double worst_flux = 0.0;
    for (const Field& u : traj.velocity)
        worst_flux = std::max(worst_flux,
                              std::abs(boundary_flux(u, BoundaryTag::inflow) +
                                       boundary_flux(u, BoundaryTag::outflow)) /
                                  peak);
    const double secs = seconds_since(t0);

    const bool pass =
        e2 <= 0.02 && order1 >= 1.8 && order2 >= 1.8 && worst_flux <= 0.01 && secs < 120.0;
    report(8, "flow solver validation on the straight channel", pass,
           "rel err " + fmt(e2) + " at h=0.02, orders " + fmt(order1) + "/" + fmt(order2) +
               ", worst flux mismatch " + fmt(100.0 * worst_flux) + "%, " + fmt(secs) + " s");
    CHECK(pass);
}

TEST_CASE("criterion 9: transporting onto the same geometry is the identity") {
    const TemplateEntry& tpl = desk().atlas.templates[0];
    const VolumetricMap map = make_volumetric_map(tpl.mesh, tpl.geom);
    const double disp = map.displacement.coeffs.lpNorm<Eigen::Infinity>();

    const Subspace v_hat = transport_subspace(tpl.basis, tpl.mesh);
    const double beta = inf_sup_beta(v_hat, tpl.basis);

    const bool pass = disp <= 1e-12 && beta >= 1.0 - 1e-9;
    report(9, "transporting onto the same geometry is the identity", pass,
           "max displacement " + fmt(disp) + ", beta " + fmt(beta));
    CHECK(pass);
}

TEST_CASE("criterion 10: mass-conservation post-process reduces the divergence") {
    const GeometryDescriptor src_geom{0.14, 2.0, 2.5, 5.0, 0.4};
    const GeometryDescriptor dst_geom{0.26, 2.0, 2.5, 5.0, 0.4};
    const auto src = generate_mesh(src_geom, 0.05);
    const auto dst = generate_mesh(dst_geom, 0.05);

    const Trajectory traj = simulate(src, 1.0, 0.03, 0.05, 0.5);
    const VolumetricMap map = make_volumetric_map(src, dst_geom);
    const Field dhat = push_forward(map.displacement, map, dst);

    int improved = 0;
    double worst_ratio = 0.0;
    for (const Field& u : traj.velocity) {
        const Field plain = push_forward(u, map, dst);
        const Field fixed = piola(plain, dhat);
        const double ratio = divergence_l2(fixed) / divergence_l2(plain);
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio <= 1.0) ++improved;
    }

    const bool pass = improved == static_cast<int>(traj.velocity.size());
    report(10, "mass-conservation post-process reduces the divergence", pass,
           std::to_string(improved) + "/" + std::to_string(traj.velocity.size()) +
               " snapshots improved, worst with/without ratio " + fmt(worst_ratio));
    CHECK(pass);
}

TEST_CASE("criterion 11: selected template ranks in the top 2 on every test geometry") {
    const DeskSetup& dsk = desk();
    bool pass = dsk.report.targets.size() == 4;
    std::string ranks;
    for (const TargetReport& tr : dsk.report.targets) {
        pass = pass && tr.bt_rank <= 2;
        ranks += (ranks.empty() ? "" : ", ") + std::to_string(tr.bt_rank);
    }
    const double total_s = dsk.train_s + dsk.bench_s;
    pass = pass && total_s < 1800.0;
    report(11, "selected template ranks in the top 2 on every test geometry", pass,
           "ranks " + ranks + "; train " + fmt(dsk.train_s) + " s + benchmark " +
               fmt(dsk.bench_s) + " s single-threaded");
    CHECK(pass);
}

TEST_CASE("criterion 12: transported basis tracks the natively trained one") {
    const DeskSetup& dsk = desk();
    bool pass = !dsk.report.targets.empty();
    std::string ratios;
    for (const TargetReport& tr : dsk.report.targets) {
        pass = pass && tr.native_max_ratio <= 0.05;
        ratios += (ratios.empty() ? "" : ", ") + fmt(100.0 * tr.native_max_ratio) + "%";
    }
    report(12, "transported basis tracks the natively trained one", pass,
           "max estimate gap per geometry: " + ratios + " (threshold 5%)");
    CHECK(pass);
}

TEST_CASE("criterion 13: retraining with the same seed is bit-identical") {
    const DeskSetup& dsk = desk();

    // Second run with full parallelism: scheduling must not leak into the
    // artifacts.
    set_max_threads(0);
    const Atlas again = train(TrainingConfig{});
    const BenchmarkReport report2 = benchmark(again, dsk.spec);
    set_max_threads(1);

    bool pass = again.distance == dsk.atlas.distance &&
                again.embedding.coords == dsk.atlas.embedding.coords &&
                again.embedding.w_map == dsk.atlas.embedding.w_map;
    for (std::size_t k = 0; k < dsk.atlas.templates.size(); ++k)
        pass = pass && again.templates[k].basis.basis == dsk.atlas.templates[k].basis.basis;

    pass = pass && report2.targets.size() == dsk.report.targets.size();
    for (std::size_t t = 0; pass && t < report2.targets.size(); ++t) {
        const TargetReport& a = dsk.report.targets[t];
        const TargetReport& b = report2.targets[t];
        pass = a.curves == b.curves && a.integrated == b.integrated && a.bt == b.bt &&
               a.bt_rank == b.bt_rank && a.native_max_ratio == b.native_max_ratio;
    }

    // The rendered reports agree byte for byte.
    namespace fs = std::filesystem;
    const fs::path tmp =
        fs::temp_directory_path() / ("mrom_accept_" + std::to_string(std::random_device{}()));
    save_benchmark_report(dsk.report, (tmp / "a").string());
    save_benchmark_report(report2, (tmp / "b").string());
    const auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    for (const std::string f :
         {"curves_0.csv", "curves_1.csv", "curves_2.csv", "curves_3.csv", "selection.csv",
          "native_compare.csv"})
        pass = pass && slurp(tmp / "a" / f) == slurp(tmp / "b" / f);
    fs::remove_all(tmp);

    report(13, "retraining with the same seed is bit-identical", pass,
           "distances, bases, embedding, and benchmark reports compared bitwise; "
           "second run fully parallel");
    CHECK(pass);
}
