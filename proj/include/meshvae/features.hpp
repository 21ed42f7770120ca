#pragma once

// Per-vertex deformation representation: a rotation (axis-angle) and the six
// entries of a symmetric stretch, relative to a base mesh.

#include "meshvae/mesh.hpp"
#include "meshvae/sparse.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace meshvae {

inline constexpr std::size_t feature_dim = 9;

struct PolarFactors {
    Mat3 rotation; // proper: det = +1
    Mat3 stretch;  // symmetric
};

/// T = R·S via the SVD, with the sign flip placed on the smallest singular
/// value so R is always a proper rotation.
PolarFactors polar_decompose(const Mat3& t);

/// Axis-angle vector with angle in [0, π].
Vec3 rotation_log(const Mat3& r);
Mat3 rotation_exp(const Vec3& w);

/// Per-edge cotangent weights aligned with `adj.edges`, clamped to >= 1e-6.
std::vector<double> cotangent_weights(const Mesh& mesh, const Adjacency& adj);

struct GradientResult {
    std::vector<Mat3> gradients;
    std::vector<VertexId> regularized; // vertices whose 3x3 system was singular
};

/// Least-squares local affine map of each one-ring from `base` to `deformed`.
GradientResult deformation_gradients(const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj);

namespace kernels::serial {
GradientResult deformation_gradients(const Mesh& base, std::span<const Vec3> deformed, const Adjacency& adj);
} // namespace kernels::serial

/// Raw (unscaled) V x 9 features: log R, then s11 s12 s13 s22 s23 s33.
DenseMatrix raw_features(std::span<const Mat3> gradients);
std::vector<Mat3> gradients_from_raw(const DenseMatrix& raw);

struct ColumnScale {
    double a = 1.0;
    double b = 0.0;

    bool operator==(const ColumnScale&) const = default;
};

/// Column-wise affine map x -> a x + b into the network's input range.
struct ScaleParams {
    std::array<ColumnScale, feature_dim> columns{};

    /// Fits the map sending each column's [min, max] to [-0.95, 0.95]; a
    /// column narrower than 1e-12 maps to 0 (a = 1, b = -min).
    static ScaleParams fit(std::span<const DenseMatrix> raw);

    DenseMatrix apply(const DenseMatrix& raw) const;
    DenseMatrix invert(const DenseMatrix& scaled) const;

    bool operator==(const ScaleParams&) const = default;
};

struct FeatureSet {
    std::vector<DenseMatrix> shapes; // scaled, V x 9 each
    ScaleParams scale;
    std::string reference;

    std::size_t vertex_count() const { return shapes.empty() ? 0 : static_cast<std::size_t>(shapes[0].rows()); }
};

/// Features of every shape relative to `base`, scaled over the whole dataset.
/// Throws InputError for an empty dataset or mismatched connectivity.
FeatureSet encode_features(const Mesh& base, std::span<const Mesh> shapes, const Adjacency& adj);

/// Scaled features of one more shape under existing scaling.
DenseMatrix encode_with_scale(const Mesh& base, const Mesh& shape, const Adjacency& adj, const ScaleParams& scale);

std::vector<Mat3> decode_features(const DenseMatrix& scaled, const ScaleParams& scale);

struct Anchor {
    VertexId vertex = 0;
    Vec3 position = Vec3::Zero();
};

/// Positions minimizing Σ_edges c_ij |(p'_i - p'_j) - ½(T_i + T_j)(p_i - p_j)|²
/// with the anchor vertex fixed. Throws NumericalError when the solve fails.
std::vector<Vec3> reconstruct_positions(const Mesh& base, std::span<const Mat3> gradients, const Adjacency& adj,
                                        const Anchor& anchor);

/// Default gauge: vertex 0 at its base position.
std::vector<Vec3> reconstruct_positions(const Mesh& base, std::span<const Mat3> gradients, const Adjacency& adj);

/// Energy minimized by reconstruct_positions.
double reconstruction_energy(const Mesh& base, std::span<const Mat3> gradients, const Adjacency& adj,
                             std::span<const Vec3> positions);

// Binary feature file ("MVAE-FEAT").
void write_feature_file(std::ostream& out, const FeatureSet& features);
FeatureSet read_feature_file(std::istream& in);
void save_features(const std::filesystem::path& path, const FeatureSet& features);
FeatureSet load_features(const std::filesystem::path& path);

} // namespace meshvae
