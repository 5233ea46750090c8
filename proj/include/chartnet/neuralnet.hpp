#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chartnet/chart_encoder.hpp"
#include "chartnet/labeler.hpp"
#include "chartnet/rng.hpp"
#include "chartnet/tensor.hpp"

namespace chartnet {

/// Layer extents of the fixed stack: input -> conv 3x3 -> relu -> conv 3x3 ->
/// relu -> maxpool 2x2 -> dropout -> flatten -> dense -> relu -> dropout ->
/// dense -> softmax. Defaults are the production sizes; tests shrink them.
struct ArchitectureSpec {
    int input_h = 30;
    int input_w = 30;
    int input_c = 1;
    int conv1_out = 32;
    int conv2_out = 64;
    int dense_hidden = 128;
    int classes = 3;

    int flat_size() const { return (input_h / 2) * (input_w / 2) * conv2_out; }

    bool operator==(const ArchitectureSpec&) const = default;
};

struct ModelConfig {
    enum class Optimizer { Sgd, Adam };

    int epochs = 100;
    int batch_size = 1028;
    double learning_rate = 0.01;
    std::uint64_t seed = 42;
    double dropout1 = 0.25;
    double dropout2 = 0.50;
    Optimizer optimizer = Optimizer::Sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    ArchitectureSpec arch;

    bool operator==(const ModelConfig&) const = default;
};

/// 3x3 convolution parameters. kernels is (3*3*in_channels) x out_channels
/// row-major: index ((dr*3 + dc)*in_channels + i)*out_channels + o.
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> kernels;
    std::vector<double> biases;

    bool operator==(const ConvLayer&) const = default;
};

/// weights is out_dim x in_dim row-major: index o*in_dim + j.
struct DenseLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    bool operator==(const DenseLayer&) const = default;
};

struct CnnModel {
    ConvLayer conv1;
    ConvLayer conv2;
    DenseLayer dense1;
    DenseLayer dense2;
    ModelConfig config;

    /// Glorot-uniform weights from the seeded generator, zero biases.
    static CnnModel initialize(const ModelConfig& config);

    std::size_t parameter_count() const;

    bool operator==(const CnnModel&) const = default;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0;
    double accuracy = 0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::optional<double> validation_accuracy;
};

// --- layer operations ---

/// Cross-correlation with zero same-padding plus per-channel bias.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

Tensor relu(const Tensor& input);

struct PoolResult {
    Tensor output;
    /// Input flat index of each block maximum; ties go to the smallest index.
    std::vector<int> argmax;
};
PoolResult maxpool_2x2(const Tensor& input);

struct DropoutResult {
    Tensor output;
    /// One byte per element, 1 = kept. Empty when dropout was a no-op.
    std::vector<std::uint8_t> mask;
};
/// Inverted dropout: survivors are scaled by 1/(1-rate) at training time,
/// inference is the identity.
DropoutResult dropout(const Tensor& input, double rate, bool training, Rng& rng);

std::vector<double> dense_forward(const std::vector<double>& input, const DenseLayer& layer);

/// Numerically stable softmax (max subtraction).
std::vector<double> softmax(const std::vector<double>& logits);

/// -log(probs[target]) floored at 1e-12.
double cross_entropy_loss(const std::vector<double>& probs, TrendLabel target);

// --- training ---

/// Per-sample forward cache needed to backpropagate.
struct SampleTrace {
    Tensor input;
    Tensor conv1_pre;
    Tensor conv2_pre;
    Tensor pool_out;
    std::vector<int> pool_argmax;
    std::vector<std::uint8_t> drop1_mask;
    std::vector<double> drop1_out;
    std::vector<double> dense1_pre;
    std::vector<std::uint8_t> drop2_mask;
    std::vector<double> drop2_out;
    std::vector<double> probs;
    double loss = 0;
};

/// Gradient storage mirrors the parameter layout.
struct Gradients {
    ConvLayer conv1;
    ConvLayer conv2;
    DenseLayer dense1;
    DenseLayer dense2;

    static Gradients zeros_like(const CnnModel& model);
};

/// Training-mode forward pass over a batch, recording dropout masks and pool
/// argmaxes for backward().
std::vector<SampleTrace> forward_train(const CnnModel& model, std::span<const Tensor> inputs, Rng& rng);

/// Gradients of the mean batch loss. Requires the traces of a matching
/// forward pass; throws a state error otherwise.
Gradients backward(const CnnModel& model, const std::vector<SampleTrace>& traces,
                   std::span<const TrendLabel> targets);

struct BatchGradients {
    double mean_loss = 0;
    std::size_t correct = 0;
    Gradients grads;
};
/// Fused forward + backward; streams one sample at a time.
BatchGradients compute_gradients(const CnnModel& model, std::span<const Tensor> inputs,
                                 std::span<const TrendLabel> targets, Rng& rng);

/// Training-mode mean loss only; finite-difference checks re-seed the rng so
/// repeated calls see identical dropout masks.
double batch_loss(const CnnModel& model, std::span<const Tensor> inputs,
                  std::span<const TrendLabel> targets, Rng& rng);

/// Seeded, bit-deterministic minibatch training of the fixed stack.
std::pair<CnnModel, TrainReport> train(const LabeledDataset& dataset, const ModelConfig& config,
                                       const LabeledDataset* validation = nullptr);

/// Inference-mode forward pass; returns class probabilities.
std::vector<double> forward_inference(const CnnModel& model, const Tensor& input);

/// Label and probabilities for one chart image; argmax ties resolve to the
/// lowest label value.
std::pair<TrendLabel, std::array<double, 3>> predict(const CnnModel& model, const ChartImage& image);

Tensor image_to_tensor(const ChartImage& image);

// --- persistence ---

/// Versioned binary container: magic, JSON header (architecture + config),
/// then raw little-endian parameter arrays. Round-trips exactly.
void save_model(const CnnModel& model, std::ostream& out);
CnnModel load_model(std::istream& in);
void save_model_file(const CnnModel& model, const std::string& path);
CnnModel load_model_file(const std::string& path);

}  // namespace chartnet
