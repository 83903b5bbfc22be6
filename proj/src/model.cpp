#include "gse/model.hpp"

#include <cmath>
#include <numbers>

#include "gse/error.hpp"
#include "gse/rng.hpp"

namespace gse {

void ModelShape::validate() const {
    if (audio_dim < 1 || visual_dim < 1 || hidden < 1 || depth < 1 || vocab < 2)
        throw ConfigError("model shape: all dimensions must be positive and vocab >= 2");
    if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("model shape: conv_kernel must be odd");
}

std::string to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::AudioProj: return "audio_proj";
        case ParamGroup::VisualProj: return "visual_proj";
        case ParamGroup::Trunk: return "trunk";
        case ParamGroup::Upsampler: return "upsampler";
        case ParamGroup::Head: return "head";
    }
    return "unknown";
}

bool is_pretrained_group(ParamGroup group) {
    return group == ParamGroup::AudioProj || group == ParamGroup::VisualProj || group == ParamGroup::Trunk;
}

namespace {

Affine zero_affine(int out, int in) { return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)}; }

void fill_gaussian(Eigen::MatrixXd& m, double stddev, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = stddev * rng.gaussian();
}

}  // namespace

ModelParams ModelParams::zeros(const ModelShape& shape) {
    shape.validate();
    const int h = shape.hidden;
    ModelParams p;
    p.shape = shape;
    p.audio_proj = zero_affine(h, shape.audio_dim);
    p.visual_proj = zero_affine(h, shape.visual_dim);
    for (int l = 0; l < shape.depth; ++l)
        p.trunk.push_back({zero_affine(h, l == 0 ? 2 * h : h), Eigen::MatrixXd::Zero(h, shape.conv_kernel)});
    for (auto& tap : p.upsample) tap = Eigen::MatrixXd::Zero(h, h);
    p.upsample_bias = Eigen::VectorXd::Zero(h);
    p.head = zero_affine(shape.vocab, h);
    p.input_mean = Eigen::VectorXd::Zero(shape.audio_dim);
    p.input_scale = Eigen::VectorXd::Ones(shape.audio_dim);
    return p;
}

ModelParams ModelParams::random(const ModelShape& shape, std::uint64_t seed) {
    ModelParams p = zeros(shape);
    Rng rng(seed);
    fill_gaussian(p.audio_proj.weight, 1.0 / std::sqrt(shape.audio_dim), rng);
    fill_gaussian(p.visual_proj.weight, 1.0 / std::sqrt(shape.visual_dim), rng);
    for (auto& block : p.trunk) {
        fill_gaussian(block.proj.weight, 1.0 / std::sqrt(static_cast<double>(block.proj.weight.cols())), rng);
        fill_gaussian(block.depthwise, 0.5 / std::sqrt(static_cast<double>(shape.conv_kernel)), rng);
    }
    for (auto& tap : p.upsample) fill_gaussian(tap, 1.0 / std::sqrt(2.0 * shape.hidden), rng);
    fill_gaussian(p.head.weight, 1.0 / std::sqrt(shape.hidden), rng);
    return p;
}

std::vector<TensorRef> tensors(ModelParams& p) {
    std::vector<TensorRef> out;
    auto add = [&out](std::string name, ParamGroup g, auto& t) {
        out.push_back({std::move(name), g, t.data(), static_cast<std::size_t>(t.size())});
    };
    add("audio_proj.weight", ParamGroup::AudioProj, p.audio_proj.weight);
    add("audio_proj.bias", ParamGroup::AudioProj, p.audio_proj.bias);
    add("visual_proj.weight", ParamGroup::VisualProj, p.visual_proj.weight);
    add("visual_proj.bias", ParamGroup::VisualProj, p.visual_proj.bias);
    for (std::size_t l = 0; l < p.trunk.size(); ++l) {
        const std::string prefix = "trunk." + std::to_string(l) + ".";
        add(prefix + "weight", ParamGroup::Trunk, p.trunk[l].proj.weight);
        add(prefix + "bias", ParamGroup::Trunk, p.trunk[l].proj.bias);
        add(prefix + "depthwise", ParamGroup::Trunk, p.trunk[l].depthwise);
    }
    for (int k = 0; k < kUpsampleKernel; ++k)
        add("upsample.tap" + std::to_string(k), ParamGroup::Upsampler, p.upsample[k]);
    add("upsample.bias", ParamGroup::Upsampler, p.upsample_bias);
    add("head.weight", ParamGroup::Head, p.head.weight);
    add("head.bias", ParamGroup::Head, p.head.bias);
    return out;
}

std::size_t parameter_count(const ModelParams& params) {
    std::size_t n = 0;
    for (const auto& t : tensors(const_cast<ModelParams&>(params))) n += t.size;
    return n;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

namespace {

Eigen::MatrixXd apply_gelu(const Eigen::MatrixXd& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

// out[c,t] = Σ_j taps[c,j] · in[c, t + j - K/2], zero outside [0,T).
Eigen::MatrixXd depthwise_conv(const Eigen::MatrixXd& in, const Eigen::MatrixXd& taps) {
    const Eigen::Index T = in.cols();
    const Eigen::Index K = taps.cols();
    const Eigen::Index half = K / 2;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.rows(), T);
    for (Eigen::Index j = 0; j < K; ++j) {
        const Eigen::Index shift = j - half;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
        const Eigen::Index hi = std::min<Eigen::Index>(T, T - shift);
        if (hi <= lo) continue;
        out.middleCols(lo, hi - lo).array() +=
            in.middleCols(lo + shift, hi - lo).array().colwise() * taps.col(j).array();
    }
    return out;
}

void check_inputs(const ModelParams& params, const RowMatrix& audio, const RowMatrix& visual) {
    if (audio.rows() != visual.rows())
        throw InputError("forward: audio has " + std::to_string(audio.rows()) + " frames, visual has " +
                         std::to_string(visual.rows()));
    if (audio.rows() < 1) throw InputError("forward: need at least one input frame");
    if (audio.cols() != params.shape.audio_dim) throw InputError("forward: audio width does not match model");
    if (visual.cols() != params.shape.visual_dim) throw InputError("forward: visual width does not match model");
}

// Cropped transposed convolution: full output index o = 2t + k for o ∈ [0, 2T+2),
// keeping o ∈ [1, 2T]. Column j of the result is o = j + 1.
Eigen::MatrixXd upsample(const std::array<Eigen::MatrixXd, kUpsampleKernel>& taps, const Eigen::MatrixXd& x) {
    const Eigen::Index T = x.cols();
    std::array<Eigen::MatrixXd, kUpsampleKernel> m;
    for (int k = 0; k < kUpsampleKernel; ++k) m[k] = taps[k] * x;
    Eigen::MatrixXd out(x.rows(), 2 * T);
    for (Eigen::Index s = 0; s < T; ++s) {
        out.col(2 * s) = m[1].col(s);
        if (s >= 1) out.col(2 * s) += m[3].col(s - 1);
        out.col(2 * s + 1) = m[2].col(s);
        if (s + 1 < T) out.col(2 * s + 1) += m[0].col(s + 1);
    }
    return out;
}

}  // namespace

void forward(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25, ForwardCache& c) {
    check_inputs(params, audio25, visual25);
    const int h = params.shape.hidden;
    const Eigen::Index T = audio25.rows();

    c.audio_in = ((audio25.rowwise() - params.input_mean.transpose()).array().rowwise() *
                  params.input_scale.transpose().array())
                     .matrix()
                     .transpose();
    c.visual_in = visual25.transpose();

    Eigen::MatrixXd x(2 * h, T);
    x.topRows(h) = (params.audio_proj.weight * c.audio_in).colwise() + params.audio_proj.bias;
    x.bottomRows(h) = (params.visual_proj.weight * c.visual_in).colwise() + params.visual_proj.bias;

    const auto depth = params.trunk.size();
    c.block_in.resize(depth);
    c.block_pre.resize(depth);
    c.block_act.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& block = params.trunk[l];
        c.block_in[l] = std::move(x);
        c.block_pre[l] = (block.proj.weight * c.block_in[l]).colwise() + block.proj.bias;
        c.block_act[l] = apply_gelu(c.block_pre[l]);
        x = c.block_act[l] + depthwise_conv(c.block_act[l], block.depthwise);
    }
    c.trunk_out = std::move(x);

    c.upsampled_pre = upsample(params.upsample, c.trunk_out).colwise() + params.upsample_bias;
    c.upsampled = apply_gelu(c.upsampled_pre);

    Eigen::MatrixXd logits = (params.head.weight * c.upsampled).colwise() + params.head.bias;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const double peak = logits.col(j).maxCoeff();
        const double lse = peak + std::log((logits.col(j).array() - peak).exp().sum());
        logits.col(j).array() -= lse;
    }
    c.log_probs = std::move(logits);
}

RowMatrix forward(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25) {
    ForwardCache cache;
    forward(params, audio25, visual25, cache);
    return cache.log_probs.transpose();
}

FeatureMatrix upsampler_activations(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25) {
    ForwardCache cache;
    forward(params, audio25, visual25, cache);
    FeatureMatrix out;
    out.kind = FeatureKind::Activations;
    out.frame_rate = 50.0;
    out.values = cache.upsampled.transpose();
    return out;
}

std::vector<int> predict_units(const ModelParams& params, const RowMatrix& audio25, const RowMatrix& visual25) {
    ForwardCache cache;
    forward(params, audio25, visual25, cache);
    std::vector<int> units(static_cast<std::size_t>(cache.log_probs.cols()));
    for (Eigen::Index j = 0; j < cache.log_probs.cols(); ++j) {
        Eigen::Index best;
        cache.log_probs.col(j).maxCoeff(&best);
        units[j] = static_cast<int>(best);
    }
    return units;
}

double accumulate_gradients(const ModelParams& params, const Example& ex, double scale, ModelParams& g,
                            bool head_only) {
    ForwardCache c;
    forward(params, ex.audio, ex.visual, c);
    const Eigen::Index frames = c.log_probs.cols();
    if (static_cast<Eigen::Index>(ex.target.size()) != frames)
        throw InputError("loss: target has " + std::to_string(ex.target.size()) + " frames, model produced " +
                         std::to_string(frames));

    double nll = 0.0;
    Eigen::MatrixXd d_logits = c.log_probs.array().exp();
    for (Eigen::Index j = 0; j < frames; ++j) {
        const int z = ex.target[j];
        if (z < 0 || z >= params.shape.vocab)
            throw InputError("loss: target unit " + std::to_string(z) + " outside vocabulary");
        nll -= c.log_probs(z, j);
        d_logits(z, j) -= 1.0;
    }
    d_logits *= scale;

    g.head.weight.noalias() += d_logits * c.upsampled.transpose();
    g.head.bias += d_logits.rowwise().sum();
    const Eigen::MatrixXd d_up =
        (params.head.weight.transpose() * d_logits).cwiseProduct(c.upsampled_pre.unaryExpr(&gelu_derivative));
    g.upsample_bias += d_up.rowwise().sum();

    // Adjoint of the cropped transposed convolution.
    const Eigen::Index T = c.trunk_out.cols();
    const Eigen::Index h = params.shape.hidden;
    std::array<Eigen::MatrixXd, kUpsampleKernel> dm;
    for (auto& m : dm) m = Eigen::MatrixXd::Zero(h, T);
    for (Eigen::Index s = 0; s < T; ++s) {
        dm[1].col(s) += d_up.col(2 * s);
        if (s >= 1) dm[3].col(s - 1) += d_up.col(2 * s);
        dm[2].col(s) += d_up.col(2 * s + 1);
        if (s + 1 < T) dm[0].col(s + 1) += d_up.col(2 * s + 1);
    }
    Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(h, T);
    for (int k = 0; k < kUpsampleKernel; ++k) {
        g.upsample[k].noalias() += dm[k] * c.trunk_out.transpose();
        if (!head_only) d_x.noalias() += params.upsample[k].transpose() * dm[k];
    }
    if (head_only) return nll;

    const Eigen::Index K = params.shape.conv_kernel;
    const Eigen::Index half = K / 2;
    for (std::size_t l = params.trunk.size(); l-- > 0;) {
        const auto& block = params.trunk[l];
        auto& gb = g.trunk[l];
        const Eigen::MatrixXd& act = c.block_act[l];
        // out = act + conv(act)
        Eigen::MatrixXd d_act = d_x;
        for (Eigen::Index j = 0; j < K; ++j) {
            const Eigen::Index shift = j - half;
            const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index hi = std::min<Eigen::Index>(T, T - shift);
            if (hi <= lo) continue;
            const auto d_out = d_x.middleCols(lo, hi - lo).array();
            const auto src = act.middleCols(lo + shift, hi - lo).array();
            gb.depthwise.col(j) += (d_out * src).rowwise().sum().matrix();
            d_act.middleCols(lo + shift, hi - lo).array() += d_out.colwise() * block.depthwise.col(j).array();
        }
        const Eigen::MatrixXd d_pre = d_act.cwiseProduct(c.block_pre[l].unaryExpr(&gelu_derivative));
        gb.proj.weight.noalias() += d_pre * c.block_in[l].transpose();
        gb.proj.bias += d_pre.rowwise().sum();
        d_x = block.proj.weight.transpose() * d_pre;
    }

    const auto d_audio = d_x.topRows(h);
    const auto d_visual = d_x.bottomRows(h);
    g.audio_proj.weight.noalias() += d_audio * c.audio_in.transpose();
    g.audio_proj.bias += d_audio.rowwise().sum();
    g.visual_proj.weight.noalias() += d_visual * c.visual_in.transpose();
    g.visual_proj.bias += d_visual.rowwise().sum();
    return nll;
}

LossAndGrad loss_and_grad(const ModelParams& params, const Example& example) {
    LossAndGrad out;
    out.grads = ModelParams::zeros(params.shape);
    const double frames = static_cast<double>(example.target.size());
    if (frames == 0) throw InputError("loss: empty target");
    out.loss = accumulate_gradients(params, example, 1.0 / frames, out.grads) / frames;
    return out;
}

nlohmann::json to_json(const ModelShape& s) {
    return {{"audio_dim", s.audio_dim}, {"visual_dim", s.visual_dim}, {"hidden", s.hidden},
            {"depth", s.depth},         {"vocab", s.vocab},           {"conv_kernel", s.conv_kernel}};
}

ModelShape model_shape_from_json(const nlohmann::json& j) {
    ModelShape s;
    s.audio_dim = j.at("audio_dim").get<int>();
    s.visual_dim = j.at("visual_dim").get<int>();
    s.hidden = j.at("hidden").get<int>();
    s.depth = j.at("depth").get<int>();
    s.vocab = j.at("vocab").get<int>();
    s.conv_kernel = j.at("conv_kernel").get<int>();
    s.validate();
    return s;
}

nlohmann::json params_to_json(const ModelParams& params) {
    nlohmann::json j;
    j["shape"] = to_json(params.shape);
    auto& t = j["tensors"];
    for (const auto& ref : tensors(const_cast<ModelParams&>(params)))
        t[ref.name] = std::vector<double>(ref.data, ref.data + ref.size);
    j["input_mean"] = std::vector<double>(params.input_mean.begin(), params.input_mean.end());
    j["input_scale"] = std::vector<double>(params.input_scale.begin(), params.input_scale.end());
    return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
    ModelParams p = ModelParams::zeros(model_shape_from_json(j.at("shape")));
    const auto& t = j.at("tensors");
    for (auto& ref : tensors(p)) {
        const auto values = t.at(ref.name).get<std::vector<double>>();
        if (values.size() != ref.size) throw IoError("checkpoint tensor " + ref.name + " has the wrong size");
        std::copy(values.begin(), values.end(), ref.data);
    }
    const auto mean = j.at("input_mean").get<std::vector<double>>();
    const auto scale = j.at("input_scale").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != p.shape.audio_dim || static_cast<int>(scale.size()) != p.shape.audio_dim)
        throw IoError("checkpoint normalisation has the wrong size");
    p.input_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), p.shape.audio_dim);
    p.input_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), p.shape.audio_dim);
    return p;
}

}  // namespace gse
