#include "mrom/pipeline.hpp"

#include "mrom/errors.hpp"
#include "mrom/instrument.hpp"
#include "mrom/parallel.hpp"
#include "mrom/rom.hpp"
#include "mrom/transport.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <utility>

namespace mrom {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out += (i ? ", " : "") + io::format_double(values[i]);
    return out;
}

void check_distinct(const std::vector<double>& values, const std::string& what) {
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j)
            if (values[i] == values[j])
                throw ContractError("training config: duplicate " + what + " value " +
                                    io::format_double(values[i]) +
                                    " would produce identical templates");
}

std::pair<double, double> range_from(const io::Config& cfg, const std::string& key,
                                     double lo, double hi) {
    const std::vector<double> v = cfg.get_doubles_or(key, {lo, hi});
    if (v.size() != 2)
        throw IoError("config key '" + key + "' must hold exactly two numbers (min, max)");
    return {v[0], v[1]};
}

} // namespace

int TrainingConfig::K() const {
    return static_cast<int>(throat_radius_values.size() * throat_center_values.size());
}

std::vector<GeometryDescriptor> TrainingConfig::template_grid() const {
    std::vector<GeometryDescriptor> geoms;
    geoms.reserve(static_cast<std::size_t>(K()));
    for (const double sr : throat_radius_values)
        for (const double sx : throat_center_values) {
            GeometryDescriptor g;
            g.throat_radius = sr;
            g.throat_length = throat_length;
            g.throat_center = sx;
            g.length = length;
            g.height = height;
            geoms.push_back(g);
        }
    return geoms;
}

FeatureGrid TrainingConfig::feature_grid() const {
    return make_feature_grid(length, feature_height, feature_spacing);
}

void TrainingConfig::validate() const {
    if (throat_radius_values.empty() || throat_center_values.empty())
        throw ContractError("training config: empty template parameter list");
    if (K() < 2)
        throw ContractError("training config: a single template admits no distance matrix; "
                            "provide at least two (K >= 2)");
    check_distinct(throat_radius_values, "throat_radius");
    check_distinct(throat_center_values, "throat_center");
    // A throat half-height equal to height/2 makes the bump amplitude zero:
    // every throat position then yields the same straight channel, i.e.
    // duplicate templates in disguise.
    if (throat_center_values.size() > 1)
        for (const double sr : throat_radius_values)
            if (sr == height / 2.0)
                throw ContractError(
                    "training config: throat_radius = height/2 is the straight channel for "
                    "every throat_center; the grid would contain duplicate templates");
    for (const GeometryDescriptor& g : template_grid())
        g.validate();

    if (samples < 1)
        throw ContractError("training config: need at least one parameter sample");
    if (!(u0_min <= u0_max) || !(mu_min <= mu_max))
        throw ContractError("training config: empty sampling range");
    if (!(dt > 0.0) || !(t_end >= dt))
        throw ContractError("training config: need 0 < dt <= t_end");
    ParameterSample{0.0, u0_min, mu_min}.validate();
    ParameterSample{t_end, u0_max, mu_max}.validate();

    if (!(h > 0.0))
        throw ContractError("training config: mesh size must be positive");
    if (n < 1)
        throw ContractError("training config: reduced dimension must be >= 1");
    if (!(voxel > 0.0))
        throw ContractError("training config: voxel side must be positive");
    if (std::abs(beam.norm() - 1.0) > 1e-12)
        throw ContractError("training config: beam direction must be a unit vector");
    if (p < 1 || p > K())
        throw ContractError("training config: embedding dimension must lie in [1, K]");
    if (!(feature_spacing > 0.0))
        throw ContractError("training config: feature grid spacing must be positive");
    double r_max = height / 2.0;
    for (const double sr : throat_radius_values)
        r_max = std::max(r_max, sr);
    if (feature_height / 2.0 < r_max - 1e-12)
        throw ContractError("training config: feature grid height " +
                            io::format_double(feature_height) +
                            " does not cover the tallest template (needs >= " +
                            io::format_double(2.0 * r_max) + ")");

    // Occupancy sampling quantizes wall positions; templates whose walls
    // never straddle a sample level collapse onto one feature vector and the
    // embedding cannot tell them apart. Fail loudly instead.
    {
        const FeatureGrid fg = feature_grid();
        const std::vector<GeometryDescriptor> geoms = template_grid();
        std::vector<Eigen::VectorXd> features(geoms.size());
        for (std::size_t k = 0; k < geoms.size(); ++k)
            features[k] = voxelize(geoms[k], fg).values;
        for (std::size_t i = 0; i < geoms.size(); ++i)
            for (std::size_t j = i + 1; j < geoms.size(); ++j)
                if (features[i] == features[j])
                    throw ContractError(
                        "training config: templates " + std::to_string(i) + " and " +
                        std::to_string(j) +
                        " have identical feature vectors; reduce embedding.grid_spacing "
                        "so distinct wall heights straddle a sample level");
    }
}

TrainingConfig TrainingConfig::from_config(const io::Config& cfg) {
    TrainingConfig tc;
    tc.throat_radius_values =
        cfg.get_doubles_or("templates.throat_radius", tc.throat_radius_values);
    tc.throat_center_values =
        cfg.get_doubles_or("templates.throat_center", tc.throat_center_values);
    tc.throat_length = cfg.get_double_or("templates.throat_length", tc.throat_length);
    tc.length = cfg.get_double_or("templates.length", tc.length);
    tc.height = cfg.get_double_or("templates.height", tc.height);

    tc.samples = cfg.get_int_or("sampling.samples", tc.samples);
    tc.seed = static_cast<unsigned>(cfg.get_int_or("sampling.seed", static_cast<int>(tc.seed)));
    std::tie(tc.u0_min, tc.u0_max) = range_from(cfg, "sampling.u0", tc.u0_min, tc.u0_max);
    std::tie(tc.mu_min, tc.mu_max) = range_from(cfg, "sampling.mu", tc.mu_min, tc.mu_max);
    tc.dt = cfg.get_double_or("sampling.dt", tc.dt);
    tc.t_end = cfg.get_double_or("sampling.t_end", tc.t_end);

    tc.h = cfg.get_double_or("discretization.h", tc.h);
    tc.n = cfg.get_int_or("reduction.n", tc.n);

    tc.voxel = cfg.get_double_or("observation.voxel", tc.voxel);
    const std::vector<double> beam =
        cfg.get_doubles_or("observation.beam", {tc.beam.x(), tc.beam.y()});
    if (beam.size() != 2)
        throw IoError("config key 'observation.beam' must hold two numbers");
    const Eigen::Vector2d b(beam[0], beam[1]);
    if (!(b.norm() > 0.0))
        throw IoError("config key 'observation.beam' must be a nonzero direction");
    tc.beam = b.normalized();

    tc.p = cfg.get_int_or("embedding.p", tc.p);
    tc.feature_spacing = cfg.get_double_or("embedding.grid_spacing", tc.feature_spacing);
    tc.feature_height = cfg.get_double_or("embedding.grid_height", tc.feature_height);

    tc.validate();
    return tc;
}

std::string TrainingConfig::canonical_text() const {
    std::ostringstream os;
    os << "[templates]\n";
    os << "throat_radius = " << join_doubles(throat_radius_values) << "\n";
    os << "throat_center = " << join_doubles(throat_center_values) << "\n";
    os << "throat_length = " << io::format_double(throat_length) << "\n";
    os << "length = " << io::format_double(length) << "\n";
    os << "height = " << io::format_double(height) << "\n";
    os << "[sampling]\n";
    os << "samples = " << samples << "\n";
    os << "seed = " << seed << "\n";
    os << "u0 = " << io::format_double(u0_min) << ", " << io::format_double(u0_max) << "\n";
    os << "mu = " << io::format_double(mu_min) << ", " << io::format_double(mu_max) << "\n";
    os << "dt = " << io::format_double(dt) << "\n";
    os << "t_end = " << io::format_double(t_end) << "\n";
    os << "[discretization]\n";
    os << "h = " << io::format_double(h) << "\n";
    os << "[reduction]\n";
    os << "n = " << n << "\n";
    os << "[observation]\n";
    os << "voxel = " << io::format_double(voxel) << "\n";
    os << "beam = " << io::format_double(beam.x()) << ", " << io::format_double(beam.y())
       << "\n";
    os << "[embedding]\n";
    os << "p = " << p << "\n";
    os << "grid_spacing = " << io::format_double(feature_spacing) << "\n";
    os << "grid_height = " << io::format_double(feature_height) << "\n";
    return os.str();
}

std::vector<GeometryDescriptor> BenchmarkSpec::test_geometries(const TrainingConfig& cfg) const {
    validate();
    std::vector<GeometryDescriptor> geoms;
    geoms.reserve(test_throat_radius.size());
    for (std::size_t i = 0; i < test_throat_radius.size(); ++i) {
        GeometryDescriptor g;
        g.throat_radius = test_throat_radius[i];
        g.throat_length = cfg.throat_length;
        g.throat_center = test_throat_center[i];
        g.length = cfg.length;
        g.height = cfg.height;
        g.validate();
        geoms.push_back(g);
    }
    return geoms;
}

void BenchmarkSpec::validate() const {
    if (test_throat_radius.empty() ||
        test_throat_radius.size() != test_throat_center.size())
        throw ContractError("benchmark config: test_throat_radius and test_throat_center "
                            "must be nonempty lists of equal length (they are zipped)");
    if (n_target < 1)
        throw ContractError("benchmark config: need at least one ground truth per geometry");
}

BenchmarkSpec BenchmarkSpec::from_config(const io::Config& cfg) {
    BenchmarkSpec spec;
    spec.test_throat_radius =
        cfg.get_doubles_or("benchmark.test_throat_radius", spec.test_throat_radius);
    spec.test_throat_center =
        cfg.get_doubles_or("benchmark.test_throat_center", spec.test_throat_center);
    spec.n_target = cfg.get_int_or("benchmark.n_target", spec.n_target);
    spec.seed =
        static_cast<unsigned>(cfg.get_int_or("benchmark.seed", static_cast<int>(spec.seed)));
    spec.validate();
    return spec;
}

PipelineConfig PipelineConfig::parse(const io::Config& cfg) {
    PipelineConfig pc;
    pc.train = TrainingConfig::from_config(cfg);
    pc.bench = BenchmarkSpec::from_config(cfg);
    cfg.reject_unknown();
    return pc;
}

PipelineConfig PipelineConfig::parse_file(const std::string& path) {
    return parse(io::Config::parse_file(path));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

/// Rethrow any failure with the offline stage name and template id attached.
template <typename F>
auto run_stage(const std::string& stage, int template_id, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        std::string where = "train: stage '" + stage + "' failed";
        if (template_id >= 0)
            where += " for template " + std::to_string(template_id);
        throw Error(where + ": " + e.what());
    }
}

struct ParameterDraw {
    double u0 = 0.0;
    double mu = 0.0;
};

/// All random draws are made up front from one seeded stream in a fixed
/// order, so results do not depend on how the work is scheduled.
std::vector<std::vector<ParameterDraw>> draw_parameters(std::mt19937& rng, int groups,
                                                        int per_group, double u0_min,
                                                        double u0_max, double mu_min,
                                                        double mu_max) {
    std::uniform_real_distribution<double> du(u0_min, u0_max);
    std::uniform_real_distribution<double> dm(mu_min, mu_max);
    std::vector<std::vector<ParameterDraw>> draws(static_cast<std::size_t>(groups));
    for (auto& group : draws) {
        group.resize(static_cast<std::size_t>(per_group));
        for (ParameterDraw& d : group) {
            d.u0 = du(rng);
            d.mu = dm(rng);
        }
    }
    return draws;
}

std::vector<Field> snapshot_set(const std::shared_ptr<const Mesh>& mesh,
                                const std::vector<ParameterDraw>& draws, double dt,
                                double t_end) {
    std::vector<Field> snaps;
    for (const ParameterDraw& d : draws) {
        Trajectory traj = simulate(mesh, d.u0, d.mu, dt, t_end);
        for (Field& u : traj.velocity)
            snaps.push_back(std::move(u));
    }
    return snaps;
}

} // namespace

Atlas train(const TrainingConfig& cfg) {
    cfg.validate();
    const std::vector<GeometryDescriptor> geoms = cfg.template_grid();
    const int K = static_cast<int>(geoms.size());

    std::mt19937 rng(cfg.seed);
    const auto draws = draw_parameters(rng, K, cfg.samples, cfg.u0_min, cfg.u0_max,
                                       cfg.mu_min, cfg.mu_max);

    Atlas atlas;
    atlas.config = cfg;
    atlas.templates.resize(static_cast<std::size_t>(K));
    atlas.singular_values.resize(static_cast<std::size_t>(K));

    parallel_for(K, [&](int k) {
        const auto mesh =
            run_stage("mesh", k, [&] { return generate_mesh(geoms[static_cast<std::size_t>(k)], cfg.h); });
        const std::vector<Field> snaps = run_stage("simulate", k, [&] {
            return snapshot_set(mesh, draws[static_cast<std::size_t>(k)], cfg.dt, cfg.t_end);
        });
        const PodResult pod_result = run_stage("pod", k, [&] {
            return pod(snaps, make_mass_matrix(mesh, FieldKind::velocity), cfg.n);
        });
        atlas.templates[static_cast<std::size_t>(k)] =
            TemplateEntry{geoms[static_cast<std::size_t>(k)], mesh, pod_result.space};
        atlas.singular_values[static_cast<std::size_t>(k)] = pod_result.singular_values;
    });

    atlas.distance =
        run_stage("distance_matrix", -1, [&] { return distance_matrix(atlas.templates); });
    atlas.embedding = run_stage("fit_embedding", -1, [&] {
        return fit_embedding_model(geoms, cfg.feature_grid(), atlas.distance, cfg.p);
    });
    return atlas;
}

// ---------------------------------------------------------------------------
// Atlas persistence
// ---------------------------------------------------------------------------

namespace {

std::string template_dir_name(int k) { return "template_" + std::to_string(k); }

} // namespace

void save_atlas(const Atlas& atlas, const std::string& dir) {
    const std::string canonical = atlas.config.canonical_text();
    std::vector<std::string> files;

    const auto emit = [&](const std::string& rel, bool binary,
                          const std::function<void(std::ostream&)>& writer) {
        io::atomic_write((fs::path(dir) / rel).string(), binary, writer);
        files.push_back(rel);
    };

    emit("config.txt", false, [&](std::ostream& os) { os << canonical; });
    emit("distance.csv", false,
         [&](std::ostream& os) { io::write_csv_matrix(os, atlas.distance); });
    io::write_embedding_file((fs::path(dir) / "embedding.bin").string(), atlas.embedding);
    files.push_back("embedding.bin");

    for (std::size_t k = 0; k < atlas.templates.size(); ++k) {
        const TemplateEntry& tpl = atlas.templates[k];
        const std::string base = template_dir_name(static_cast<int>(k));
        io::write_geometry_file((fs::path(dir) / base / "geometry.txt").string(), tpl.geom);
        files.push_back(base + "/geometry.txt");
        emit(base + "/mesh.txt", false, [&](std::ostream& os) { write_mesh(os, *tpl.mesh); });
        io::write_basis_file((fs::path(dir) / base / "basis.bin").string(), tpl.basis.basis,
                             atlas.singular_values[k]);
        files.push_back(base + "/basis.bin");
    }

    nlohmann::json manifest;
    manifest["config_hash"] = io::fnv1a_hex(canonical);
    manifest["seed"] = atlas.config.seed;
    manifest["templates"] = atlas.templates.size();
    manifest["files"] = files;
    io::atomic_write((fs::path(dir) / "manifest.json").string(), false,
                     [&](std::ostream& os) { os << manifest.dump(2) << "\n"; });
}

Atlas load_atlas(const std::string& dir) {
    const io::Config cfg = io::Config::parse_file((fs::path(dir) / "config.txt").string());
    Atlas atlas;
    atlas.config = TrainingConfig::from_config(cfg);
    cfg.reject_unknown();

    std::ifstream ms((fs::path(dir) / "manifest.json").string());
    if (!ms)
        throw IoError("cannot open '" + dir + "/manifest.json'");
    nlohmann::json manifest;
    try {
        ms >> manifest;
    } catch (const std::exception& e) {
        throw IoError("atlas manifest: " + std::string(e.what()));
    }
    const std::string expected = io::fnv1a_hex(atlas.config.canonical_text());
    if (manifest.value("config_hash", "") != expected)
        throw IoError("atlas '" + dir + "': manifest config hash does not match config.txt");

    atlas.distance = io::read_csv_matrix_file((fs::path(dir) / "distance.csv").string());
    atlas.embedding = io::read_embedding_file((fs::path(dir) / "embedding.bin").string());

    const int K = atlas.config.K();
    if (atlas.distance.rows() != K || atlas.distance.cols() != K)
        throw IoError("atlas '" + dir + "': distance matrix is not K x K");
    atlas.templates.resize(static_cast<std::size_t>(K));
    atlas.singular_values.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const fs::path base = fs::path(dir) / template_dir_name(k);
        const GeometryDescriptor geom = io::read_geometry_file((base / "geometry.txt").string());
        const auto mesh = read_mesh_file((base / "mesh.txt").string());
        const io::BasisFile basis = io::read_basis_file((base / "basis.bin").string());
        Subspace space;
        space.mesh = mesh;
        space.kind = FieldKind::velocity;
        space.metric = make_mass_matrix(mesh, FieldKind::velocity);
        space.basis = basis.basis;
        atlas.templates[static_cast<std::size_t>(k)] = TemplateEntry{geom, mesh, space};
        atlas.singular_values[static_cast<std::size_t>(k)] = basis.singular_values;
    }
    return atlas;
}

// ---------------------------------------------------------------------------
// Online estimation
// ---------------------------------------------------------------------------

namespace {

int find_matching_template(const Atlas& atlas, const GeometryDescriptor& g) {
    constexpr double tol = 1e-12;
    for (std::size_t k = 0; k < atlas.templates.size(); ++k) {
        const GeometryDescriptor& t = atlas.templates[k].geom;
        if (std::abs(t.throat_radius - g.throat_radius) <= tol &&
            std::abs(t.throat_length - g.throat_length) <= tol &&
            std::abs(t.throat_center - g.throat_center) <= tol &&
            std::abs(t.length - g.length) <= tol && std::abs(t.height - g.height) <= tol)
            return static_cast<int>(k);
    }
    return -1;
}

ObservationSpace observation_on(const std::shared_ptr<const Mesh>& mesh,
                                const TrainingConfig& cfg) {
    return make_observation_space(make_voxel_grid(mesh, cfg.voxel, cfg.beam),
                                  make_mass_matrix(mesh, FieldKind::velocity));
}

} // namespace

EstimateResult prepare_target(const Atlas& atlas, const GeometryDescriptor& target) {
    target.validate();
    EstimateResult out;
    const int match = find_matching_template(atlas, target);
    if (match >= 0) {
        out.matched_template = true;
        out.template_index = match;
        out.mesh = atlas.templates[static_cast<std::size_t>(match)].mesh;
        out.basis = atlas.templates[static_cast<std::size_t>(match)].basis;
    } else {
        out.mesh = generate_mesh(target, atlas.config.h);
        out.template_index = best_template(target, atlas.embedding);
        out.basis = transport_subspace(
            atlas.templates[static_cast<std::size_t>(out.template_index)].basis, out.mesh);
    }
    out.obs = observation_on(out.mesh, atlas.config);
    return out;
}

EstimateResult estimate(const Atlas& atlas, const GeometryDescriptor& target,
                        const Eigen::VectorXd& measurements) {
    // The estimation path must never pay for a flow solve or a basis
    // compression on the target; verified against the work counters below.
    // (The counters are process-wide: running estimate concurrently with
    // training would trip this check.)
    const instrument::WorkCount before = instrument::snapshot();

    EstimateResult out = prepare_target(atlas, target);
    if (measurements.size() != out.obs.grid.m())
        throw ContractError("estimate: got " + std::to_string(measurements.size()) +
                            " measurements for a grid of " +
                            std::to_string(out.obs.grid.m()) + " voxels");
    const double beta = inf_sup_beta(out.basis, out.obs.space);
    if (beta <= 1e-12)
        throw IllPosedError(
            "estimate: stability constant beta(V, W) = " + io::format_double(beta) +
            " <= 1e-12; the transported basis is unstable against this measurement grid "
            "- reduce the reduced dimension n");
    const Eigen::VectorXd y_ortho = out.obs.mix * measurements;
    out.reconstruction = reconstruct(y_ortho, out.basis, out.obs.space);

    if (!(instrument::snapshot() == before))
        throw ContractError("estimate: the online path ran a flow solve or a basis "
                            "compression on the target geometry");
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

namespace {

/// sqrt of the trapezoidal time integral of |u(t)|^2 over [0, T], with the
/// flow starting from rest (u(0) = 0).
double trajectory_time_norm(const Trajectory& traj, const MassMatrix& M) {
    double acc = 0.0;
    double prev_t = 0.0;
    double prev_sq = 0.0;
    for (std::size_t j = 0; j < traj.velocity.size(); ++j) {
        const double nj = norm(M, traj.velocity[j]);
        const double sq = nj * nj;
        acc += (traj.times[j] - prev_t) * (sq + prev_sq) / 2.0;
        prev_t = traj.times[j];
        prev_sq = sq;
    }
    return std::sqrt(acc);
}

double trapezoid(const std::vector<double>& t, const Eigen::VectorXd& y) {
    double acc = 0.0;
    for (std::size_t j = 1; j < t.size(); ++j)
        acc += (t[j] - t[j - 1]) * (y[static_cast<Eigen::Index>(j)] +
                                    y[static_cast<Eigen::Index>(j - 1)]) /
               2.0;
    return acc;
}

} // namespace

BenchmarkReport benchmark(const Atlas& atlas, const std::vector<GeometryDescriptor>& tests,
                          int n_target, unsigned seed) {
    if (tests.empty())
        throw ContractError("benchmark: empty test set");
    if (n_target < 1)
        throw ContractError("benchmark: need at least one ground truth per geometry");
    const TrainingConfig& cfg = atlas.config;
    const int K = static_cast<int>(atlas.templates.size());

    // Ground-truth draws and native-basis training draws for every target,
    // all taken up front from one stream (deterministic, schedule-free).
    std::mt19937 rng(seed);
    std::vector<std::vector<ParameterDraw>> gt_draws;
    std::vector<std::vector<ParameterDraw>> native_draws;
    for (std::size_t i = 0; i < tests.size(); ++i) {
        gt_draws.push_back(draw_parameters(rng, 1, n_target, cfg.u0_min, cfg.u0_max,
                                           cfg.mu_min, cfg.mu_max)[0]);
        native_draws.push_back(draw_parameters(rng, 1, cfg.samples, cfg.u0_min, cfg.u0_max,
                                               cfg.mu_min, cfg.mu_max)[0]);
    }

    BenchmarkReport report;
    for (std::size_t ti = 0; ti < tests.size(); ++ti) {
        const GeometryDescriptor& target = tests[ti];
        target.validate();
        TargetReport tr;
        tr.geom = target;

        // --- test-only region: the target is solved and compressed here,
        // emulating data acquisition and the native-model baseline ---
        const auto mesh = generate_mesh(target, cfg.h);
        const auto metric = make_mass_matrix(mesh, FieldKind::velocity);
        std::vector<Trajectory> ground_truth;
        ground_truth.reserve(static_cast<std::size_t>(n_target));
        for (const ParameterDraw& d : gt_draws[ti])
            ground_truth.push_back(simulate(mesh, d.u0, d.mu, cfg.dt, cfg.t_end));
        const Subspace native =
            pod(snapshot_set(mesh, native_draws[ti], cfg.dt, cfg.t_end), metric, cfg.n).space;

        tr.times = ground_truth.front().times;
        const int T = static_cast<int>(tr.times.size());

        // Per-trajectory normalization of the error curves.
        Eigen::VectorXd denom(n_target);
        for (int i = 0; i < n_target; ++i)
            denom[i] = trajectory_time_norm(ground_truth[static_cast<std::size_t>(i)], *metric);

        const ObservationSpace obs = observation_on(mesh, cfg);
        // Observed coordinates of every ground-truth snapshot, shared by all
        // template reconstructions.
        std::vector<std::vector<Eigen::VectorXd>> omega(static_cast<std::size_t>(n_target));
        for (int i = 0; i < n_target; ++i) {
            omega[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(T));
            for (int j = 0; j < T; ++j)
                omega[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    observed_coords(obs,
                                    ground_truth[static_cast<std::size_t>(i)]
                                        .velocity[static_cast<std::size_t>(j)]);
        }

        // --- online region: transports and reconstructions only ---
        const instrument::WorkCount flat = instrument::snapshot();

        tr.bt = best_template(target, atlas.embedding);
        tr.curves.resize(K, T);
        std::vector<Subspace> transported(static_cast<std::size_t>(K));
        parallel_for(K, [&](int k) {
            const Subspace v_hat =
                transport_subspace(atlas.templates[static_cast<std::size_t>(k)].basis, mesh);
            transported[static_cast<std::size_t>(k)] = v_hat;
            for (int j = 0; j < T; ++j) {
                double mean_err = 0.0;
                for (int i = 0; i < n_target; ++i) {
                    const ReconstructionResult rec = reconstruct(
                        omega[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], v_hat,
                        obs.space);
                    const Field& u = ground_truth[static_cast<std::size_t>(i)]
                                         .velocity[static_cast<std::size_t>(j)];
                    mean_err += norm(*metric, u.coeffs - rec.estimate) / denom[i];
                }
                tr.curves(k, j) = mean_err / n_target;
            }
        });

        if (!(instrument::snapshot() == flat))
            throw ContractError("benchmark: the reconstruction region ran a flow solve or a "
                                "basis compression on the target geometry");

        tr.integrated.resize(K);
        for (int k = 0; k < K; ++k)
            tr.integrated[k] = trapezoid(tr.times, tr.curves.row(k).transpose());
        tr.bt_rank = 1;
        for (int k = 0; k < K; ++k)
            if (tr.integrated[k] < tr.integrated[tr.bt])
                ++tr.bt_rank;

        // --- test-only native comparison: reconstruct the same observations
        // with the natively trained basis and with the transported one ---
        double max_ratio = 0.0;
        for (int i = 0; i < n_target; ++i) {
            // One ground-truth field per trajectory, taken mid-window where
            // the inflow forcing peaks.
            int j_star = 0;
            for (int j = 1; j < T; ++j)
                if (std::abs(tr.times[static_cast<std::size_t>(j)] - cfg.t_end / 2.0) <
                    std::abs(tr.times[static_cast<std::size_t>(j_star)] - cfg.t_end / 2.0))
                    j_star = j;
            const Field& u_gt = ground_truth[static_cast<std::size_t>(i)]
                                    .velocity[static_cast<std::size_t>(j_star)];
            const Eigen::VectorXd& w =
                omega[static_cast<std::size_t>(i)][static_cast<std::size_t>(j_star)];
            const ReconstructionResult a_native = reconstruct(w, native, obs.space);
            const ReconstructionResult a_transported =
                reconstruct(w, transported[static_cast<std::size_t>(tr.bt)], obs.space);
            const double ratio =
                norm(*metric, a_native.estimate - a_transported.estimate) /
                norm(*metric, u_gt);
            max_ratio = std::max(max_ratio, ratio);
        }
        tr.native_max_ratio = max_ratio;

        report.targets.push_back(std::move(tr));
    }
    return report;
}

BenchmarkReport benchmark(const Atlas& atlas, const BenchmarkSpec& spec) {
    return benchmark(atlas, spec.test_geometries(atlas.config), spec.n_target, spec.seed);
}

void save_benchmark_report(const BenchmarkReport& report, const std::string& dir) {
    for (std::size_t ti = 0; ti < report.targets.size(); ++ti) {
        const TargetReport& tr = report.targets[ti];
        const std::string path =
            (fs::path(dir) / ("curves_" + std::to_string(ti) + ".csv")).string();
        io::atomic_write(path, false, [&](std::ostream& os) {
            const int K = static_cast<int>(tr.curves.rows());
            os << "t";
            for (int k = 0; k < K; ++k)
                os << ",tpl_" << k;
            os << "\n";
            os << "bt"; // marker row: 1 flags the selected template's column
            for (int k = 0; k < K; ++k)
                os << "," << (k == tr.bt ? 1 : 0);
            os << "\n";
            for (std::size_t j = 0; j < tr.times.size(); ++j) {
                os << io::format_double(tr.times[j]);
                for (int k = 0; k < K; ++k)
                    os << "," << io::format_double(tr.curves(k, static_cast<Eigen::Index>(j)));
                os << "\n";
            }
        });
    }
    io::atomic_write((fs::path(dir) / "selection.csv").string(), false, [&](std::ostream& os) {
        os << "target,bt_template,rank\n";
        for (std::size_t ti = 0; ti < report.targets.size(); ++ti)
            os << ti << "," << report.targets[ti].bt << "," << report.targets[ti].bt_rank
               << "\n";
    });
    io::atomic_write((fs::path(dir) / "native_compare.csv").string(), false,
                     [&](std::ostream& os) {
                         os << "target,max_ratio\n";
                         for (std::size_t ti = 0; ti < report.targets.size(); ++ti)
                             os << ti << ","
                                << io::format_double(report.targets[ti].native_max_ratio)
                                << "\n";
                     });
}

} // namespace mrom
