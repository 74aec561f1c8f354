#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ppe/grid_env.hpp"

namespace ppe {

enum class LayerKind : std::uint8_t { Conv = 0, HalfPlaneMax = 1 };
enum class Activation : std::uint8_t { None = 0, ReLU = 1, Logistic = 2 };

/// One layer of the encoder.
///
/// Conv: `kernel` x `kernel` convolution (1 or 3) with same padding, bias and
/// activation. HalfPlaneMax: parameter-free global context. For each input
/// channel it appends four maps holding the maximum over the half-plane
/// above, below, left of and right of each cell (inclusive), so
/// out_ch = 5 * in_ch. This is how the network learns where the start and
/// goal are relative to every cell.
struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 3;
    Activation activation = Activation::ReLU;

    static LayerSpec conv(int in, int out, int kernel, Activation act);
    static LayerSpec half_plane_max(int channels);

    std::size_t weight_count() const noexcept;
    std::size_t bias_count() const noexcept;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using Architecture = std::vector<LayerSpec>;

/// 1x1 marker conv -> half-plane context -> 1x1 mixer -> four 3x3 convs.
Architecture default_architecture();

/// Purely local stack of four 3x3 convs (receptive field 9). Kept for
/// comparison; it cannot localize endpoints on large grids.
Architecture local_architecture();

/// Throws IncompatibleArchitecture unless the layers chain, kernels are 1 or
/// 3, and only the final layer (a 1-channel conv) uses the logistic.
void validate_architecture(const Architecture& arch);

/// Sum over conv layers of in * out * k^2 + out.
std::size_t parameter_count(const Architecture& arch);

/// Weights and biases for every layer (empty for HalfPlaneMax).
/// Conv weights are laid out [out][in][ky][kx].
struct ParameterSet {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static ParameterSet zeros_like(const Architecture& arch);
    std::size_t size() const noexcept;
    double& at(std::size_t flat_index);
    double at(std::size_t flat_index) const;
    void add(const ParameterSet& other);
    void scale(double factor);
    bool all_finite() const noexcept;

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EncoderModel {
    Architecture arch;
    ParameterSet params;
    std::uint64_t init_seed = 0;
    std::uint32_t version = kCheckpointVersion;

    std::size_t parameter_count() const noexcept { return params.size(); }
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
EncoderModel init_model(const Architecture& arch, std::uint64_t seed);

/// Channel-major tensor, shape channels x height x width.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w) : channels(c), height(h), width(w), data(std::size_t(c) * h * w) {}
    std::size_t plane() const noexcept { return std::size_t(height) * width; }
};

/// RGB image scaled to [0, 1], 3 x H x W.
Tensor3 encode_input(const ImageRGB& image);
Tensor3 encode_input(const GridScene& scene);

struct RegionProbabilities {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major, each in [kProbClamp, 1 - kProbClamp]
};

inline constexpr double kProbClamp = 1e-7;

/// Throws ShapeMismatch when the input channel count differs from the model.
RegionProbabilities forward(const EncoderModel& model, const Tensor3& input);

struct LossWeighting {
    enum class Kind : std::uint8_t { Uniform, Gaussian };
    Kind kind = Kind::Uniform;
    double sigma = 1.0;

    static LossWeighting uniform() { return {}; }
    static LossWeighting gaussian(double sigma) { return {Kind::Gaussian, sigma}; }
};

/// Manhattan distance from each cell to the nearest path cell.
std::vector<int> distance_to_path(const PathLabel& label);

/// Per-cell loss weights: all ones (Uniform) or exp(-d^2 / (2 sigma^2)).
std::vector<double> loss_weights(const PathLabel& label, const LossWeighting& weighting);

/// Mean weighted binary cross-entropy. Path cells are additionally scaled by
/// `positive_weight`; 1 gives the standard loss.
double loss(const RegionProbabilities& pred, const PathLabel& label,
            const LossWeighting& weighting, double positive_weight = 1.0);

/// A training example: encoded input plus the path label it is scored on.
struct Sample {
    Tensor3 input;
    PathLabel label;
};

Sample make_sample(const GridScene& scene, const PathLabel& label);
Sample make_sample(const GridScene& scene);

struct BatchGradient {
    ParameterSet grads;
    double loss = 0.0;  // batch-mean loss at the current parameters
};

/// Gradient of the batch-mean loss. Per-sample gradients are summed in
/// batch order. Throws ShapeMismatch or std::invalid_argument (empty batch).
BatchGradient backward(const EncoderModel& model, std::span<const Sample> batch,
                       const LossWeighting& weighting, double positive_weight = 1.0);

enum class OptimizerKind : std::uint8_t { SGD, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    double learning_rate = 1e-3;
    OptimizerConfig optimizer;
    LossWeighting weighting;
    double positive_weight = 1.0;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    void validate() const;
};

struct TrainResult {
    EncoderModel model;
    std::vector<double> history;  // mean sample loss per epoch
};

/// Mini-batch training. Each epoch visits the dataset in an order drawn from
/// cfg.seed. Throws DivergenceDetected on a non-finite loss.
TrainResult train(EncoderModel model, std::span<const Sample> dataset, const TrainConfig& cfg);

/// Max relative error |a - n| / max(|a|, |n|, 1e-12) between the analytic
/// gradient and a central difference with step h, over up to `max_params`
/// parameters sampled with `seed` (all parameters when the model is small).
double grad_check(const EncoderModel& model, const Sample& sample, double h,
                  const LossWeighting& weighting = {}, double positive_weight = 1.0,
                  std::size_t max_params = 256, std::uint64_t seed = 0);

}  // namespace ppe
