#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gse/signal.hpp"

namespace gse {

// Unit-prediction enhancer. Audio (stacked FBank at 25 Hz) and the visual
// side-channel are projected, concatenated frame by frame, passed through a
// feed-forward trunk with depthwise temporal convolutions, upsampled to 50 Hz by
// a stride-2 kernel-4 transposed convolution and classified into units.

struct ModelShape {
    int audio_dim = 92;
    int visual_dim = 16;
    int hidden = 256;
    int depth = 2;
    int vocab = 100;
    int conv_kernel = 5;  // odd

    void validate() const;
    bool operator==(const ModelShape&) const = default;
};

enum class ParamGroup { AudioProj, VisualProj, Trunk, Upsampler, Head };

std::string to_string(ParamGroup group);

/// Groups that stay frozen during the first frozen_steps updates.
bool is_pretrained_group(ParamGroup group);

struct Affine {
    Eigen::MatrixXd weight;  // [out × in]
    Eigen::VectorXd bias;
};

struct TrunkBlock {
    Affine proj;
    Eigen::MatrixXd depthwise;  // [hidden × conv_kernel]
};

inline constexpr int kUpsampleKernel = 4;
inline constexpr int kUpsampleStride = 2;

struct ModelParams {
    ModelShape shape;
    Affine audio_proj;
    Affine visual_proj;
    std::vector<TrunkBlock> trunk;
    std::array<Eigen::MatrixXd, kUpsampleKernel> upsample;  // tap k: [hidden × hidden]
    Eigen::VectorXd upsample_bias;
    Affine head;

    // Fixed input normalisation (x - mean) * scale; not trained.
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;

    static ModelParams zeros(const ModelShape& shape);
    static ModelParams random(const ModelShape& shape, std::uint64_t seed);
};

/// Mutable view of one parameter tensor.
struct TensorRef {
    std::string name;
    ParamGroup group;
    double* data;
    std::size_t size;
};

/// Every trainable tensor, in a fixed order.
std::vector<TensorRef> tensors(ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

/// Intermediate values kept for the backward pass.
struct ForwardCache {
    Eigen::MatrixXd audio_in;   // normalised audio [audio_dim × T]
    Eigen::MatrixXd visual_in;  // [visual_dim × T]
    std::vector<Eigen::MatrixXd> block_in;   // [in × T]
    std::vector<Eigen::MatrixXd> block_pre;  // pre-activation [H × T]
    std::vector<Eigen::MatrixXd> block_act;  // GeLU output [H × T]
    Eigen::MatrixXd trunk_out;               // [H × T]
    Eigen::MatrixXd upsampled_pre;           // cropped transposed-conv output + bias [H × 2T]
    Eigen::MatrixXd upsampled;               // after GeLU [H × 2T]
    Eigen::MatrixXd log_probs;               // [C × 2T]
};

/// Log-probabilities [2T × C] for T input frames. Throws InputError when the
/// audio and visual frame counts differ or widths do not match the shape.
RowMatrix forward(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25);
void forward(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25, ForwardCache& cache);

/// 50 Hz hidden activations after the upsampler (inputs to the softmax head).
FeatureMatrix upsampler_activations(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25);

/// Argmax unit per 50 Hz frame.
std::vector<int> predict_units(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25);

struct Example {
    RowMatrix audio;   // [T × audio_dim]
    RowMatrix visual;  // [T × visual_dim]
    std::vector<int> target;  // 2T units
};

/// Summed negative log-likelihood of one example; gradients are accumulated
/// into `grads` scaled by `scale` (callers pass 1/total_frames for a mean).
/// With `head_only`, gradients of the pre-trained groups are skipped.
double accumulate_gradients(const ModelParams& params, const Example& example, double scale, ModelParams& grads,
                            bool head_only = false);

/// Mean per-frame cross-entropy and its full gradient.
struct LossAndGrad {
    double loss = 0.0;
    ModelParams grads;
};
LossAndGrad loss_and_grad(const ModelParams& params, const Example& example);

double gelu(double x);
double gelu_derivative(double x);

nlohmann::json to_json(const ModelShape& shape);
ModelShape model_shape_from_json(const nlohmann::json& j);

/// Tensors by name plus normalisation and shape.
nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);

}  // namespace gse
