// Command-line front end: every stage of the methodology as a subcommand,
// from meshing a single geometry up to training an atlas and benchmarking
// it on test geometries. All heavy lifting lives in the library; this file
// only parses arguments, moves data between files, and prints summaries.

#include "mrom/errors.hpp"
#include "mrom/io.hpp"
#include "mrom/morpho.hpp"
#include "mrom/observe.hpp"
#include "mrom/parallel.hpp"
#include "mrom/pbdw.hpp"
#include "mrom/pipeline.hpp"
#include "mrom/stokes.hpp"
#include "mrom/transport.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

using namespace mrom;

Eigen::Vector2d parse_beam(const std::vector<double>& v) {
    if (v.size() != 2) throw ContractError("beam needs exactly two components");
    Eigen::Vector2d b(v[0], v[1]);
    const double n = b.norm();
    if (!(n > 0.0)) throw ContractError("beam direction must be nonzero");
    return b / n;
}

std::optional<std::pair<double, double>> parse_band(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    if (v.size() != 2) throw ContractError("band needs exactly two values: ymin,ymax");
    return std::make_pair(v[0], v[1]);
}

ErrorMode parse_mode(const std::string& s) {
    if (s == "ms") return ErrorMode::mean_square;
    if (s == "wc") return ErrorMode::worst_case;
    return error_mode_from_string(s);
}

/// Subspace from a basis file and the mesh it lives on.
Subspace load_subspace(const std::string& basis_path,
                       const std::shared_ptr<const Mesh>& mesh) {
    const io::BasisFile bf = io::read_basis_file(basis_path);
    if (bf.basis.rows() != 2 * mesh->n_nodes())
        throw ContractError("basis file " + basis_path + " has " +
                            std::to_string(bf.basis.rows()) + " rows; the mesh needs " +
                            std::to_string(2 * mesh->n_nodes()));
    Subspace V;
    V.mesh = mesh;
    V.kind = FieldKind::velocity;
    V.metric = make_mass_matrix(mesh, FieldKind::velocity);
    V.basis = bf.basis;
    return V;
}

/// One atlas-style template directory: geometry.txt, mesh.txt, basis.bin.
TemplateEntry load_template_dir(const std::string& dir) {
    TemplateEntry t;
    t.geom = io::read_geometry_file(dir + "/geometry.txt");
    t.mesh = read_mesh_file(dir + "/mesh.txt");
    if (!(t.mesh->descriptor == t.geom))
        throw ContractError("template " + dir + ": mesh was generated for a different "
                                                "geometry than geometry.txt describes");
    t.basis = load_subspace(dir + "/basis.bin", t.mesh);
    return t;
}

/// Observation-space spec file (key = value): mesh, voxel, beam, band.
ObservationSpace load_observation_spec(const std::string& path,
                                       std::shared_ptr<const Mesh>& mesh_out) {
    const io::Config cfg = io::Config::parse_file(path);
    const std::string mesh_path = cfg.get_string("mesh");
    const double voxel = cfg.get_double("voxel");
    const Eigen::Vector2d beam = parse_beam(cfg.get_doubles("beam"));
    std::optional<std::pair<double, double>> band;
    if (cfg.has("band")) band = parse_band(cfg.get_doubles("band"));
    cfg.reject_unknown();

    mesh_out = read_mesh_file(mesh_path);
    const VoxelGrid grid = make_voxel_grid(mesh_out, voxel, beam, band);
    return make_observation_space(grid, make_mass_matrix(mesh_out, FieldKind::velocity));
}

int run(int argc, char** argv) {
    CLI::App app{"Reduced-model state estimation across a family of channel geometries"};
    app.require_subcommand(1);
    // Long-form help only: the mesh-size option is spelled --h.
    app.set_help_flag("--help", "Print this help message and exit");
    // Option callbacks of the main app run before any subcommand callback,
    // so the thread cap is in place before work starts.
    app.add_option_function<int>(
        "--threads", [](int t) { set_max_threads(t); },
        "Worker threads for training and benchmarking (0 = all cores)");

    // ---- mesh ----------------------------------------------------------
    auto* c_mesh = app.add_subcommand("mesh", "Generate a triangle mesh for a geometry");
    std::string mesh_geom, mesh_out;
    double mesh_h = 0.05;
    c_mesh->add_option("--geom", mesh_geom, "Geometry file")->required();
    c_mesh->add_option("--h", mesh_h, "Nominal element size")->required();
    c_mesh->add_option("--out", mesh_out, "Output mesh file")->required();
    c_mesh->callback([&] {
        const auto mesh = generate_mesh(io::read_geometry_file(mesh_geom), mesh_h);
        write_mesh_file(mesh_out, *mesh);
        std::cout << "mesh: " << mesh->n_nodes() << " nodes, " << mesh->n_triangles()
                  << " triangles -> " << mesh_out << "\n";
    });

    // ---- simulate ------------------------------------------------------
    auto* c_sim = app.add_subcommand("simulate", "Run the transient flow problem");
    std::string sim_geom, sim_out;
    double sim_u0 = 1.0, sim_mu = 0.03, sim_dt = 0.02, sim_tend = 0.5, sim_h = 0.05;
    bool sim_steady = false;
    c_sim->add_option("--geom", sim_geom, "Geometry file")->required();
    c_sim->add_option("--u0", sim_u0, "Inflow amplitude")->capture_default_str();
    c_sim->add_option("--mu", sim_mu, "Viscosity")->capture_default_str();
    c_sim->add_option("--dt", sim_dt, "Time step")->capture_default_str();
    c_sim->add_option("--tend", sim_tend, "Final time")->capture_default_str();
    c_sim->add_option("--h", sim_h, "Mesh size")->capture_default_str();
    c_sim->add_option("--out", sim_out, "Output snapshot file")->required();
    c_sim->add_flag("--steady", sim_steady,
                    "Constant-inflow steady solve instead of the transient problem");
    c_sim->callback([&] {
        const auto mesh = generate_mesh(io::read_geometry_file(sim_geom), sim_h);
        if (sim_steady) {
            const auto [u, p] = solve_steady(mesh, sim_u0, sim_mu, sim_dt);
            io::write_snapshots_file(sim_out, {u});
            std::cout << "steady state -> " << sim_out << "\n";
        } else {
            const Trajectory traj = simulate(mesh, sim_u0, sim_mu, sim_dt, sim_tend);
            io::write_snapshots_file(sim_out, traj.velocity);
            std::cout << traj.velocity.size() << " snapshots -> " << sim_out << "\n";
        }
    });

    // ---- pod -----------------------------------------------------------
    auto* c_pod = app.add_subcommand("pod", "Compress snapshots to a reduced basis");
    std::vector<std::string> pod_snaps;
    std::string pod_mesh, pod_out;
    int pod_n = 20;
    c_pod->add_option("--snaps", pod_snaps, "Snapshot files")->required()->expected(-1);
    c_pod->add_option("--mesh", pod_mesh, "Mesh the snapshots live on")->required();
    c_pod->add_option("--n", pod_n, "Number of modes")->capture_default_str();
    c_pod->add_option("--out", pod_out, "Output basis file")->required();
    c_pod->callback([&] {
        const auto mesh = read_mesh_file(pod_mesh);
        std::vector<Field> snaps;
        for (const std::string& f : pod_snaps) {
            std::vector<Field> part = io::read_snapshots_file(f, mesh, FieldKind::velocity);
            snaps.insert(snaps.end(), std::make_move_iterator(part.begin()),
                         std::make_move_iterator(part.end()));
        }
        const auto metric = make_mass_matrix(mesh, FieldKind::velocity);
        const PodResult pr = pod(snaps, metric, pod_n);
        io::write_basis_file(pod_out, pr.space.basis, pr.singular_values);
        std::cout << "basis: " << pr.space.dim() << " modes from " << snaps.size()
                  << " snapshots -> " << pod_out << "\n";
    });

    // ---- measure -------------------------------------------------------
    auto* c_meas = app.add_subcommand("measure", "Apply the voxel measurements to a field");
    std::string meas_mesh, meas_snaps, meas_out;
    double meas_voxel = 0.25;
    std::vector<double> meas_beam{std::sqrt(0.5), std::sqrt(0.5)};
    std::vector<double> meas_band;
    int meas_index = 0;
    c_meas->add_option("--mesh", meas_mesh, "Mesh file")->required();
    c_meas->add_option("--snaps", meas_snaps, "Snapshot file")->required();
    c_meas->add_option("--voxel", meas_voxel, "Voxel side")->capture_default_str();
    c_meas->add_option("--beam", meas_beam, "Beam direction bx,by")
        ->delimiter(',')
        ->capture_default_str();
    c_meas->add_option("--band", meas_band, "Restrict voxels to ymin,ymax")->delimiter(',');
    c_meas->add_option("--index", meas_index, "Which snapshot of the file to measure")
        ->capture_default_str();
    c_meas->add_option("--out", meas_out, "Output measurement file")->required();
    c_meas->callback([&] {
        const auto mesh = read_mesh_file(meas_mesh);
        const auto snaps = io::read_snapshots_file(meas_snaps, mesh, FieldKind::velocity);
        if (meas_index < 0 || meas_index >= static_cast<int>(snaps.size()))
            throw ContractError("snapshot index " + std::to_string(meas_index) +
                                " out of range; file has " + std::to_string(snaps.size()));
        const VoxelGrid grid =
            make_voxel_grid(mesh, meas_voxel, parse_beam(meas_beam), parse_band(meas_band));
        io::write_measurements_file(meas_out, measure(snaps[meas_index], grid));
        std::cout << grid.m() << " measurements -> " << meas_out << "\n";
    });

    // ---- reconstruct ---------------------------------------------------
    auto* c_rec = app.add_subcommand("reconstruct",
                                     "Estimate a field from measurements and a basis");
    std::string rec_basis, rec_wspace, rec_meas, rec_out;
    c_rec->add_option("--basis", rec_basis, "Reduced basis file")->required();
    c_rec->add_option("--wspace", rec_wspace,
                      "Observation spec file (mesh, voxel, beam[, band])")
        ->required();
    c_rec->add_option("--measurements", rec_meas, "Measurement file")->required();
    c_rec->add_option("--out", rec_out, "Output snapshot file")->required();
    c_rec->callback([&] {
        std::shared_ptr<const Mesh> mesh;
        const ObservationSpace obs = load_observation_spec(rec_wspace, mesh);
        const Subspace V = load_subspace(rec_basis, mesh);
        const Eigen::VectorXd y = io::read_measurements_file(rec_meas);
        if (y.size() != obs.grid.m())
            throw ContractError("measurement file has " + std::to_string(y.size()) +
                                " values; the voxel grid has " +
                                std::to_string(obs.grid.m()));
        const ReconstructionResult r = reconstruct(obs.mix * y, V, obs.space);
        io::write_snapshots_file(rec_out, {r.estimate_field()});
        std::cout << "estimate (beta = " << r.beta << ") -> " << rec_out << "\n";
    });

    // ---- sweep-n -------------------------------------------------------
    auto* c_sweep = app.add_subcommand(
        "sweep-n", "Reconstruction error and stability vs. reduced dimension");
    std::string sw_basis, sw_wspace, sw_out, sw_mode = "ms";
    std::vector<std::string> sw_snaps;
    int sw_nmax = -1;
    c_sweep->add_option("--basis", sw_basis, "Full reduced basis file")->required();
    c_sweep->add_option("--wspace", sw_wspace,
                        "Observation spec file (mesh, voxel, beam[, band])")
        ->required();
    c_sweep->add_option("--snaps", sw_snaps, "Validation snapshot files")
        ->required()
        ->expected(-1);
    c_sweep->add_option("--mode", sw_mode, "Error aggregation: ms or wc")
        ->capture_default_str();
    c_sweep->add_option("--nmax", sw_nmax, "Largest n (default: basis dimension)")
        ->capture_default_str();
    c_sweep->add_option("--out", sw_out, "Output curve CSV (columns n,error,beta)")
        ->required();
    c_sweep->callback([&] {
        std::shared_ptr<const Mesh> mesh;
        const ObservationSpace obs = load_observation_spec(sw_wspace, mesh);
        const Subspace V = load_subspace(sw_basis, mesh);
        std::vector<Field> val;
        for (const std::string& f : sw_snaps) {
            auto part = io::read_snapshots_file(f, mesh, FieldKind::velocity);
            val.insert(val.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
        }
        const SweepResult sr = sweep_n(val, V, obs.space, parse_mode(sw_mode), sw_nmax);
        io::atomic_write(sw_out, false, [&](std::ostream& os) {
            os << "n,error,beta\n";
            for (std::size_t i = 0; i < sr.n.size(); ++i)
                os << sr.n[i] << "," << io::format_double(sr.error[i]) << ","
                   << io::format_double(sr.beta[i]) << "\n";
        });
        std::cout << "swept n = 1.." << sr.n.back() << ", best n = " << sr.n_star
                  << " -> " << sw_out << "\n";
    });

    // ---- transport -----------------------------------------------------
    auto* c_tr = app.add_subcommand("transport",
                                    "Carry a reduced basis onto another geometry");
    std::string tr_sgeom, tr_dgeom, tr_basis, tr_smesh, tr_dmesh, tr_out;
    bool tr_no_piola = false;
    c_tr->add_option("--src-geom", tr_sgeom, "Source geometry file")->required();
    c_tr->add_option("--dst-geom", tr_dgeom, "Target geometry file")->required();
    c_tr->add_option("--basis", tr_basis, "Basis file on the source mesh")->required();
    c_tr->add_option("--src-mesh", tr_smesh, "Source mesh file")->required();
    c_tr->add_option("--dst-mesh", tr_dmesh, "Target mesh file")->required();
    c_tr->add_option("--out", tr_out, "Output basis file")->required();
    c_tr->add_flag("--no-piola", tr_no_piola,
                   "Plain interpolation without the mass-conservation post-process");
    c_tr->callback([&] {
        const GeometryDescriptor src_geom = io::read_geometry_file(tr_sgeom);
        const GeometryDescriptor dst_geom = io::read_geometry_file(tr_dgeom);
        const auto src_mesh = read_mesh_file(tr_smesh);
        const auto dst_mesh = read_mesh_file(tr_dmesh);
        if (!(src_mesh->descriptor == src_geom))
            throw ContractError("--src-mesh was generated for a different geometry "
                                "than --src-geom describes");
        if (!(dst_mesh->descriptor == dst_geom))
            throw ContractError("--dst-mesh was generated for a different geometry "
                                "than --dst-geom describes");
        const Subspace V = load_subspace(tr_basis, src_mesh);

        Subspace out;
        if (tr_no_piola) {
            // Same pipeline as transport_subspace minus the Piola factor:
            // interpolate each basis function and re-orthonormalize.
            const VolumetricMap map = make_volumetric_map(src_mesh, dst_geom);
            Eigen::MatrixXd X(2 * dst_mesh->n_nodes(), V.dim());
            for (int j = 0; j < V.dim(); ++j) {
                const Field col(src_mesh, FieldKind::velocity, V.basis.col(j));
                X.col(j) = push_forward(col, map, dst_mesh).coeffs;
            }
            out.mesh = dst_mesh;
            out.kind = FieldKind::velocity;
            out.metric = make_mass_matrix(dst_mesh, FieldKind::velocity);
            out.basis = m_orthonormalize(X, out.metric, 1e-10);
            if (out.basis.cols() == 0)
                throw IllPosedError("transport: all transported directions collapsed");
        } else {
            out = transport_subspace(V, dst_mesh);
        }
        io::write_basis_file(tr_out, out.basis, Eigen::VectorXd::Ones(out.dim()));
        std::cout << "transported " << V.dim() << " -> " << out.dim() << " modes -> "
                  << tr_out << "\n";
    });

    // ---- distmat -------------------------------------------------------
    auto* c_dm = app.add_subcommand("distmat",
                                    "Pairwise reduced-model distances between templates");
    std::vector<std::string> dm_templates;
    std::string dm_out;
    c_dm->add_option("--templates", dm_templates,
                     "Template directories (geometry.txt, mesh.txt, basis.bin)")
        ->required()
        ->expected(-1);
    c_dm->add_option("--out", dm_out, "Output distance CSV")->required();
    c_dm->callback([&] {
        std::vector<TemplateEntry> entries;
        for (const std::string& dir : dm_templates) entries.push_back(load_template_dir(dir));
        io::write_csv_matrix_file(dm_out, distance_matrix(entries));
        std::cout << entries.size() << " x " << entries.size() << " distances -> "
                  << dm_out << "\n";
    });

    // ---- mds -----------------------------------------------------------
    auto* c_mds = app.add_subcommand("mds", "Euclidean embedding of a distance matrix");
    std::string mds_dist, mds_out;
    int mds_p = 2;
    c_mds->add_option("--dist", mds_dist, "Squared-distance CSV")->required();
    c_mds->add_option("--p", mds_p, "Embedding dimension")->capture_default_str();
    c_mds->add_option("--out", mds_out, "Output coordinates CSV (p x K)")->required();
    c_mds->callback([&] {
        const MdsResult m = mds(io::read_csv_matrix_file(mds_dist), mds_p);
        io::write_csv_matrix_file(mds_out, m.coords);
        std::cout << "eigenvalues:";
        for (int i = 0; i < m.eigenvalues.size(); ++i) std::cout << " " << m.eigenvalues[i];
        std::cout << "\ndiscarded mass: " << m.discarded_mass
                  << (m.padded ? " (padded)" : "") << "\ncoordinates -> " << mds_out << "\n";
    });

    // ---- fit-embedding -------------------------------------------------
    auto* c_fit = app.add_subcommand(
        "fit-embedding", "Fit the feature-to-embedding map over the template registry");
    std::vector<std::string> fit_geoms;
    std::string fit_dist, fit_out;
    int fit_p = 2;
    double fit_spacing = 0.05, fit_height = 0.6;
    c_fit->add_option("--geoms", fit_geoms, "Template geometry files (grid order)")
        ->required()
        ->expected(-1);
    c_fit->add_option("--dist", fit_dist, "Squared-distance CSV")->required();
    c_fit->add_option("--p", fit_p, "Embedding dimension")->capture_default_str();
    c_fit->add_option("--grid-spacing", fit_spacing, "Feature grid cell size")
        ->capture_default_str();
    c_fit->add_option("--grid-height", fit_height, "Feature grid vertical extent")
        ->capture_default_str();
    c_fit->add_option("--out", fit_out, "Output embedding model file")->required();
    c_fit->callback([&] {
        std::vector<GeometryDescriptor> geoms;
        for (const std::string& f : fit_geoms) geoms.push_back(io::read_geometry_file(f));
        if (geoms.empty()) throw ContractError("no template geometries given");
        const FeatureGrid grid =
            make_feature_grid(geoms.front().length, fit_height, fit_spacing);
        const EmbeddingModel model =
            fit_embedding_model(geoms, grid, io::read_csv_matrix_file(fit_dist), fit_p);
        io::write_embedding_file(fit_out, model);
        std::cout << "embedding model (p = " << model.p << ", " << geoms.size()
                  << " templates) -> " << fit_out << "\n";
    });

    // ---- best-template -------------------------------------------------
    auto* c_bt = app.add_subcommand("best-template",
                                    "Pick the nearest template for a geometry");
    std::string bt_geom, bt_model;
    c_bt->add_option("--geom", bt_geom, "Geometry file")->required();
    c_bt->add_option("--model", bt_model, "Embedding model file")->required();
    c_bt->callback([&] {
        const EmbeddingModel model = io::read_embedding_file(bt_model);
        std::cout << best_template(io::read_geometry_file(bt_geom), model) << "\n";
    });

    // ---- train ---------------------------------------------------------
    auto* c_train = app.add_subcommand("train", "Train an atlas from a config file");
    std::string train_config, train_dir;
    c_train->add_option("--config", train_config, "Config file")->required();
    c_train->add_option("--out-dir", train_dir, "Atlas output directory")->required();
    c_train->callback([&] {
        const PipelineConfig pc = PipelineConfig::parse_file(train_config);
        const Atlas atlas = train(pc.train);
        save_atlas(atlas, train_dir);
        std::cout << "atlas: " << atlas.templates.size() << " templates, n = "
                  << atlas.config.n << " -> " << train_dir << "\n";
    });

    // ---- estimate ------------------------------------------------------
    auto* c_est = app.add_subcommand(
        "estimate", "Reconstruct a field on a new geometry from measurements");
    std::string est_atlas, est_geom, est_meas, est_out;
    c_est->add_option("--atlas", est_atlas, "Atlas directory")->required();
    c_est->add_option("--geom", est_geom, "Target geometry file")->required();
    c_est->add_option("--measurements", est_meas, "Measurement file")->required();
    c_est->add_option("--out", est_out, "Output snapshot file")->required();
    c_est->callback([&] {
        const Atlas atlas = load_atlas(est_atlas);
        const GeometryDescriptor target = io::read_geometry_file(est_geom);
        const EstimateResult r =
            estimate(atlas, target, io::read_measurements_file(est_meas));
        io::write_snapshots_file(est_out, {r.reconstruction.estimate_field()});
        std::cout << "template " << r.template_index
                  << (r.matched_template ? " (exact match)" : " (transported)")
                  << ", beta = " << r.reconstruction.beta << " -> " << est_out << "\n";
    });

    // ---- benchmark -----------------------------------------------------
    auto* c_bench = app.add_subcommand("benchmark",
                                       "Evaluate an atlas on test geometries");
    std::string bench_atlas, bench_config, bench_out;
    c_bench->add_option("--atlas", bench_atlas, "Atlas directory")->required();
    c_bench->add_option("--config", bench_config, "Config file (benchmark section)")
        ->required();
    c_bench->add_option("--out", bench_out, "Report output directory")->required();
    c_bench->callback([&] {
        const Atlas atlas = load_atlas(bench_atlas);
        const PipelineConfig pc = PipelineConfig::parse_file(bench_config);
        const BenchmarkReport report = benchmark(atlas, pc.bench);
        save_benchmark_report(report, bench_out);
        for (std::size_t t = 0; t < report.targets.size(); ++t)
            std::cout << "target " << t << ": template " << report.targets[t].bt
                      << " (rank " << report.targets[t].bt_rank << "), native ratio "
                      << report.targets[t].native_max_ratio << "\n";
        std::cout << "report -> " << bench_out << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError&) {
        throw; // unreachable: CLI11_PARSE already exited
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
