#ifndef MROM_PIPELINE_HPP
#define MROM_PIPELINE_HPP

#include "mrom/io.hpp"
#include "mrom/morpho.hpp"
#include "mrom/observe.hpp"
#include "mrom/pbdw.hpp"
#include "mrom/stokes.hpp"

#include <memory>
#include <string>
#include <vector>

namespace mrom {

/// Knobs of the offline training phase. Defaults are the desk-scale setup:
/// a 3x3 template grid over (throat half-height, throat position), 10
/// parameter draws x 25 time steps per template, 10 modes. The production
/// scale of the same study (K = 64 templates, 12,800 snapshots, n = 20)
/// is reached purely through these knobs.
struct TrainingConfig {
    // [templates] product grid over the two varying shape parameters;
    // throat_length stays fixed across the atlas
    std::vector<double> throat_radius_values{0.14, 0.165, 0.19};
    std::vector<double> throat_center_values{2.2, 2.5, 2.8};
    double throat_length = 2.0;
    double length = 5.0;
    double height = 0.4;

    // [sampling] inflow-amplitude / viscosity draws and the time grid
    int samples = 10;
    unsigned seed = 1234;
    double u0_min = 0.2;
    double u0_max = 1.0;
    double mu_min = 0.01;
    double mu_max = 0.1;
    double dt = 0.02;
    double t_end = 0.5;

    // [discretization]
    double h = 0.05;

    // [reduction]
    int n = 10;

    // [observation]
    double voxel = 0.25;
    Eigen::Vector2d beam{std::sqrt(0.5), std::sqrt(0.5)};

    // [embedding]
    int p = 2;
    /// Feature-grid cell size. Occupancy sampling resolves wall heights in
    /// steps of spacing / 4, so this must be small enough that every pair of
    /// distinct templates straddles a sample level; 0.05 resolves the
    /// default radius set, whose tightest gap to the straight wall is 0.01.
    double feature_spacing = 0.05;
    /// Vertical extent of the geometry-feature grid. Must cover the tallest
    /// admissible shape (bulges reach above the straight walls when the
    /// throat half-height exceeds height/2); shapes clipped by the grid
    /// would collapse onto the straight channel's feature vector.
    double feature_height = 0.6;

    int K() const;
    /// Template geometries in row-major (radius-major) grid order.
    std::vector<GeometryDescriptor> template_grid() const;
    FeatureGrid feature_grid() const;

    /// Throws ContractError/GeometryError on an unusable setup; in
    /// particular K = 1 (a single template admits no distance matrix) and
    /// parameter ranges outside the admissible sample box are rejected.
    void validate() const;

    static TrainingConfig from_config(const io::Config& cfg);
    /// Canonical config-file rendering; its hash stamps the manifest.
    std::string canonical_text() const;
};

/// Benchmark setup: test geometries (the two lists are zipped, not crossed)
/// and the number of ground-truth trajectories per geometry.
struct BenchmarkSpec {
    std::vector<double> test_throat_radius{0.15, 0.175, 0.155, 0.185};
    std::vector<double> test_throat_center{2.35, 2.65, 2.7, 2.3};
    int n_target = 4;
    unsigned seed = 777;

    std::vector<GeometryDescriptor> test_geometries(const TrainingConfig& cfg) const;
    void validate() const;
    static BenchmarkSpec from_config(const io::Config& cfg);
};

/// One config file drives both phases; parsing consumes every key and
/// rejects the rest, so misspelled knobs fail loudly instead of silently
/// falling back to defaults.
struct PipelineConfig {
    TrainingConfig train;
    BenchmarkSpec bench;

    static PipelineConfig parse(const io::Config& cfg);
    static PipelineConfig parse_file(const std::string& path);
};

/// Trained artifact: template registry with reduced bases, their pairwise
/// squared distances, and the shape-embedding model used for selection.
struct Atlas {
    TrainingConfig config;
    std::vector<TemplateEntry> templates;
    std::vector<Eigen::VectorXd> singular_values; // full POD spectrum per template
    Eigen::MatrixXd distance;                     // K x K
    EmbeddingModel embedding;
};

/// Offline phase: mesh every template, simulate the sampled parameters,
/// compress to a reduced basis, compute pairwise distances, and fit the
/// shape embedding. Any stage failure is rethrown with the stage name and
/// template id. Deterministic for a fixed config (the parameter draws are
/// made up front from a single seeded stream, independent of scheduling).
Atlas train(const TrainingConfig& cfg);

/// Persist / restore an atlas directory: config.txt, manifest.json,
/// distance.csv, embedding.bin, and per-template geometry/mesh/basis files.
/// The manifest records the config hash, the seed, and the file list;
/// load_atlas re-checks the hash.
void save_atlas(const Atlas& atlas, const std::string& dir);
Atlas load_atlas(const std::string& dir);

/// One online reconstruction.
struct EstimateResult {
    std::shared_ptr<const Mesh> mesh; // target mesh (the template's if matched)
    ObservationSpace obs;             // W_m built on the target
    Subspace basis;                   // reduced basis used (transported or precomputed)
    int template_index = -1;
    bool matched_template = false; // exact descriptor match short-circuit
    ReconstructionResult reconstruction;
};

/// The measurement setup estimate() assumes: voxel grid and observation
/// space on the target mesh (or on the matching template's stored mesh).
EstimateResult prepare_target(const Atlas& atlas, const GeometryDescriptor& target);

/// Online phase: build the observation space, select and transport the best
/// template's basis (or reuse a matching template's), and reconstruct from
/// the raw voxel measurements. Never runs a flow solve or a basis
/// compression on the target; this is enforced with work counters and a
/// ContractError. Throws IllPosedError (suggesting a smaller n) when the
/// stability constant of the transported basis against W_m is ~ 0.
EstimateResult estimate(const Atlas& atlas, const GeometryDescriptor& target,
                        const Eigen::VectorXd& measurements);

/// Per-test-geometry benchmark outcome. `curves` row k is the average
/// relative reconstruction-error curve when transporting template k.
struct TargetReport {
    GeometryDescriptor geom;
    std::vector<double> times;  // snapshot times of the ground truths
    Eigen::MatrixXd curves;     // K x T
    Eigen::VectorXd integrated; // K, trapezoidal time integral of each curve
    int bt = -1;                // template picked by the embedding
    int bt_rank = 0;            // 1-based rank of bt by integrated error
    /// Test-only comparison: max over ground truths of
    /// |reconstruction with the natively trained basis - reconstruction
    /// with the transported basis| / |ground truth|.
    double native_max_ratio = 0.0;
};

struct BenchmarkReport {
    std::vector<TargetReport> targets;
};

/// Evaluate the full methodology on test geometries: simulate ground
/// truths, reconstruct every snapshot through every template, rank the
/// embedding's selection, and run the native-basis comparison. Ground-truth
/// generation and the native basis are the only places a target geometry is
/// ever solved or compressed; the reconstruction region is counter-checked
/// like estimate().
BenchmarkReport benchmark(const Atlas& atlas, const std::vector<GeometryDescriptor>& tests,
                          int n_target, unsigned seed);
BenchmarkReport benchmark(const Atlas& atlas, const BenchmarkSpec& spec);

/// Write curves_<target>.csv (t column, one column per template, and a
/// marker row flagging the selected template), selection.csv
/// (target,bt_template,rank) and native_compare.csv (target,max_ratio).
void save_benchmark_report(const BenchmarkReport& report, const std::string& dir);

} // namespace mrom

#endif
