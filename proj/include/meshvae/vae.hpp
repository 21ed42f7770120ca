#pragma once

// Variational auto-encoder over per-vertex deformation features, with
// Chebyshev convolutions and contraction pooling between hierarchy levels.

#include "meshvae/features.hpp"
#include "meshvae/gconv.hpp"
#include "meshvae/pooling.hpp"
#include "meshvae/simplify.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace meshvae {

/// Layer string over {C, P} plus widths. "CCPC" is two convolutions, a
/// pooling step, and a final convolution.
struct ArchSpec {
    std::string layers = "CCPC";
    std::size_t width = 9;
    std::size_t latent = 128;
    std::size_t order = 3;         // Chebyshev terms H
    std::size_t condition_dim = 0; // one-hot classes; 0 is unconditional

    std::size_t pool_count() const;
    std::size_t conv_count() const;
    /// Throws InputError for an empty string, unknown letters, a trailing
    /// P, or more pooling steps than `hierarchy_depth`.
    void validate(std::size_t hierarchy_depth) const;
};

struct TrainConfig {
    double alpha = 0.3;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2 = 1e-5;
    std::size_t epochs = 1;
    std::size_t batch_size = 0; // 0: full batch
    std::uint64_t seed = 0;
};

/// All trainable tensors. Convolution stacks hold `order` matrices of
/// C_in x C_out; the decoder stacks are listed in application order.
struct VaeParams {
    ArchSpec arch;
    std::size_t pooled_vertices = 0; // V_p, vertex count after the last pooling
    std::uint64_t seed = 0;

    std::vector<std::vector<DenseMatrix>> encoder;
    DenseMatrix fc_mean;      // (V_p * width) x latent, also used transposed by the decoder
    DenseMatrix fc_dev;       // (V_p * width) x latent
    DenseMatrix fc_condition; // condition_dim x (V_p * width); empty when unconditional
    std::vector<std::vector<DenseMatrix>> decoder;

    struct NamedTensor {
        std::string name;
        DenseMatrix* tensor;
    };
    struct ConstNamedTensor {
        std::string name;
        const DenseMatrix* tensor;
    };

    /// Declaration order: encoder stacks, fc_mean, fc_dev, fc_condition (if
    /// conditional), decoder stacks.
    std::vector<NamedTensor> tensors();
    std::vector<ConstNamedTensor> tensors() const;

    VaeParams zeros_like() const;
    bool operator==(const VaeParams& other) const;
};

std::size_t count_parameters(const VaeParams& params);

/// Same count from shapes alone: `level_sizes[k]` is the vertex count at
/// hierarchy level k, at least up to the deepest pooled level.
std::size_t count_parameters(const ArchSpec& arch, std::span<const std::size_t> level_sizes);

/// Uniform Glorot initialization. Decoder stacks start as transposes of the
/// matching encoder stacks (condition rows dropped) and train independently.
VaeParams init_params(const ArchSpec& arch, std::span<const std::size_t> level_sizes, std::uint64_t seed);
VaeParams build_model(const Hierarchy& hierarchy, const ArchSpec& arch, std::uint64_t seed);

struct LatentCode {
    Eigen::VectorXd mean;
    Eigen::VectorXd deviation; // sigmoid output, in (0, 1)
    Eigen::VectorXd noise;     // ε used for `sample`
    Eigen::VectorXd sample;    // mean + deviation ⊙ noise
};

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mean, const Eigen::VectorXd& deviation,
                               const Eigen::VectorXd& noise);

/// Closed-form KL(N(μ, σ²) || N(0, I)), σ clamped to >= 1e-6 inside the log.
double kl_divergence(const Eigen::VectorXd& mean, const Eigen::VectorXd& deviation);

std::vector<double> one_hot(std::size_t index, std::size_t classes);

/// One training example: scaled features and an optional one-hot condition.
struct Example {
    const DenseMatrix* features = nullptr;
    std::vector<double> condition;
};

struct LossBreakdown {
    double reconstruction = 0.0; // (1/2M') Σ |X - X̂|²
    double kl = 0.0;             // alpha/M' Σ KL
    double l2 = 0.0;             // l2 Σ w²
    double total() const { return reconstruction + kl + l2; }
};

/// Convolution/pooling operators for the levels an architecture uses.
class VaeNetwork {
public:
    VaeNetwork(const Hierarchy& hierarchy, VaeParams params);

    const VaeParams& params() const { return params_; }
    VaeParams& params() { return params_; }
    std::size_t vertex_count() const { return level_sizes_.front(); }

    /// Mean and deviation; `noise`/`sample` are left empty.
    LatentCode encode(const DenseMatrix& x, std::span<const double> condition = {}) const;
    DenseMatrix decode(const Eigen::VectorXd& z, std::span<const double> condition = {}) const;

    /// Batch loss and its exact gradient (excluding the L2 term, which
    /// adam_step adds). `noise[i]` is ε for example i. Per-example passes run
    /// in parallel; gradients are summed in example order.
    LossBreakdown loss_and_gradient(std::span<const Example> batch, std::span<const Eigen::VectorXd> noise,
                                    double alpha, double l2, VaeParams* gradient) const;
    LossBreakdown loss_and_gradient_serial(std::span<const Example> batch, std::span<const Eigen::VectorXd> noise,
                                           double alpha, double l2, VaeParams* gradient) const;

private:
    struct Trace;
    void check_input(const DenseMatrix& x, std::span<const double> condition) const;
    DenseMatrix encoder_input(const DenseMatrix& x, std::span<const double> condition) const;
    DenseMatrix run_encoder(DenseMatrix h, Trace* trace) const;
    DenseMatrix run_decoder(const Eigen::VectorXd& z, std::span<const double> condition, Trace* trace) const;
    void forward(const Example& ex, const Eigen::VectorXd& noise, Trace& trace) const;
    // Fills the per-example gradient pieces of `trace`.
    void backward(const Example& ex, Trace& trace, double batch_scale, double alpha) const;
    LossBreakdown run_batch(std::span<const Example> batch, std::span<const Eigen::VectorXd> noise, double alpha,
                            double l2, VaeParams* gradient, bool parallel) const;

    VaeParams params_;
    std::vector<std::size_t> level_sizes_;
    std::vector<std::shared_ptr<const SparseMatrix>> laplacians_; // scaled, per level
    std::vector<PoolOperator> pools_;                              // level k -> k+1
};

struct AdamState {
    VaeParams first_moment;
    VaeParams second_moment;
    std::uint64_t step = 0;

    static AdamState for_params(const VaeParams& params);
};

/// Bias-corrected Adam on raw arrays.
void adam_update(std::span<double> weights, std::span<const double> gradient, std::span<double> first_moment,
                 std::span<double> second_moment, std::uint64_t step, const TrainConfig& config);

/// Adds 2·l2·w to the gradient, then takes one Adam step.
void adam_step(VaeParams& params, const VaeParams& gradient, AdamState& state, const TrainConfig& config);

double l2_penalty(const VaeParams& params, double l2);

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double reconstruction = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

struct TrainResult {
    VaeParams params;
    std::vector<EpochRecord> log;
};

/// `labels` holds one class per shape when the architecture is conditional.
/// Throws NumericalError naming the first non-finite quantity.
TrainResult train(const FeatureSet& dataset, const Hierarchy& hierarchy, const ArchSpec& arch,
                  const TrainConfig& config, std::span<const std::size_t> labels = {},
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Checkpoint file ("MVAE-CKPT").
void write_checkpoint(std::ostream& out, const VaeParams& params, const ContentHash& hierarchy);
struct Checkpoint {
    VaeParams params;
    ContentHash hierarchy{};
};
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const VaeParams& params, const ContentHash& hierarchy);
/// Refuses (InputError) when `expected` is given and differs from the stored hash.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ContentHash>& expected = {});

} // namespace meshvae
