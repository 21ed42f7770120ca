#pragma once

// Command implementations shared by the CLI and the end-to-end tests.

#include "meshvae/features.hpp"
#include "meshvae/simplify.hpp"
#include "meshvae/vae.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace meshvae::apps {

enum class LambdaMode { absolute, bbox };

struct RunConfig {
    std::filesystem::path dataset_dir;
    std::string reference;            // file name inside dataset_dir
    std::filesystem::path labels;     // optional "name<TAB>label" file
    std::size_t levels = 1;
    double lambda = 0.001;
    LambdaMode lambda_mode = LambdaMode::absolute;
    ArchSpec arch;
    TrainConfig train;
    std::filesystem::path output_dir = "out";

    /// INI text: sections dataset, hierarchy, model, train, output. Relative
    /// paths resolve against `base_dir`. Unknown keys and missing paths throw
    /// InputError.
    static RunConfig parse(std::istream& in, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);

    double effective_lambda(const Mesh& reference_mesh) const;
};

// Output layout under RunConfig::output_dir.
std::filesystem::path hierarchy_dir(const RunConfig& cfg);
std::filesystem::path features_path(const RunConfig& cfg);
std::filesystem::path shape_list_path(const RunConfig& cfg);
std::filesystem::path checkpoint_path(const RunConfig& cfg);
std::filesystem::path loss_log_path(const RunConfig& cfg);

/// OBJ files of the dataset directory, sorted by name.
std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& dir);

Hierarchy cmd_hierarchy(const RunConfig& cfg, std::ostream& log);
FeatureSet cmd_features(const RunConfig& cfg, std::ostream& log);

struct TrainSummary {
    double initial_loss = 0.0; // mean codes (ε = 0), before the first step
    double final_loss = 0.0;   // same, after the last step
    std::vector<EpochRecord> log;
};
TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log);

struct GenerateOptions {
    std::size_t count = 1;
    std::uint64_t seed = 0;
    std::optional<std::size_t> label;
    bool mean = false; // z = 0 instead of sampling
};
struct Neighbor {
    std::string generated;
    std::string nearest;
    double distance = 0.0; // mean per-vertex distance after centroid alignment
};
std::vector<Neighbor> cmd_generate(const RunConfig& cfg, const GenerateOptions& opts, std::ostream& log);

struct InterpolateOptions {
    std::string from; // dataset file name or index
    std::string to;
    std::size_t steps = 10;
    std::optional<std::size_t> label;
};
/// Writes interpolate/frame_####.obj; returns the written paths.
std::vector<std::filesystem::path> cmd_interpolate(const RunConfig& cfg, const InterpolateOptions& opts,
                                                   std::ostream& log);

struct EmbeddingResult {
    std::vector<std::string> names;
    std::vector<std::array<double, 2>> coordinates;
    std::array<std::size_t, 2> dimensions{};
    std::vector<double> variances;
    std::size_t self_intersections = 0; // of the closed polyline through the points in order
};
/// Picks the two latent dimensions of largest variance (ties to the lower index).
EmbeddingResult embed_codes(const std::vector<Eigen::VectorXd>& means);
EmbeddingResult cmd_embed(const RunConfig& cfg, std::ostream& log);

struct EvalRow {
    std::string name;
    double rms = 0.0;         // raw positions
    double rms_aligned = 0.0; // after matching centroids
};
struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_rms = 0.0;
    double mean_rms_aligned = 0.0;
    double bbox_diagonal = 0.0; // of the reference mesh
};
double rms_distance(std::span<const Vec3> a, std::span<const Vec3> b);
double rms_distance_aligned(std::span<const Vec3> a, std::span<const Vec3> b);
/// `data_dir` defaults to the training dataset.
EvalReport cmd_eval(const RunConfig& cfg, const std::optional<std::filesystem::path>& data_dir, std::ostream& log);

/// A loaded model with everything needed to decode to positions.
struct Model {
    Hierarchy hierarchy;
    FeatureSet features;
    std::vector<std::string> shape_names;
    VaeNetwork network;

    static Model load(const RunConfig& cfg);

    const Mesh& base() const { return hierarchy.levels[0].mesh; }
    const Adjacency& adjacency() const { return hierarchy.levels[0].adjacency; }
    std::vector<Vec3> positions(const DenseMatrix& scaled) const;
    std::vector<Vec3> decode_positions(const Eigen::VectorXd& z, std::span<const double> condition) const;
};

} // namespace meshvae::apps
