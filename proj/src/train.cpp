#include "gse/train.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>

#include "gse/corruption.hpp"
#include "gse/error.hpp"
#include "gse/rng.hpp"

namespace gse {

void TrainConfig::validate() const {
    if (total_updates < 1) throw ConfigError("train: total_updates must be positive");
    if (frozen_steps < 0 || frozen_steps > total_updates)
        throw ConfigError("train: frozen_steps must be in [0, total_updates]");
    if (warmup_pct < 0 || hold_pct < 0 || warmup_pct + hold_pct > 100.0)
        throw ConfigError("train: schedule percentages must satisfy t1 + t2 <= 100");
    if (!(peak_lr > 0.0)) throw ConfigError("train: peak_lr must be positive");
    if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ConfigError("train: mask_prob must be in [0,1)");
    if (mask_span < 1) throw ConfigError("train: mask_span must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"total_updates", c.total_updates}, {"frozen_steps", c.frozen_steps}, {"peak_lr", c.peak_lr},
            {"schedule", {c.warmup_pct, c.hold_pct, 100.0 - c.warmup_pct - c.hold_pct}},
            {"adam_betas", {c.adam_beta1, c.adam_beta2}}, {"adam_eps", c.adam_eps},
            {"mask_prob", c.mask_prob}, {"mask_span", c.mask_span}, {"batch_size", c.batch_size},
            {"eval_every", c.eval_every}, {"keep_best", c.keep_best}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    c.total_updates = j.value("total_updates", c.total_updates);
    c.frozen_steps = j.value("frozen_steps", c.frozen_steps);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        c.warmup_pct = s.at(0).get<double>();
        c.hold_pct = s.at(1).get<double>();
    }
    if (j.contains("adam_betas")) {
        c.adam_beta1 = j.at("adam_betas").at(0).get<double>();
        c.adam_beta2 = j.at("adam_betas").at(1).get<double>();
    }
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.mask_prob = j.value("mask_prob", c.mask_prob);
    c.mask_span = j.value("mask_span", c.mask_span);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.keep_best = j.value("keep_best", c.keep_best);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

double lr_at(int step, const TrainConfig& cfg) {
    const double total = cfg.total_updates;
    const double warm = total * cfg.warmup_pct / 100.0;
    const double hold = total * cfg.hold_pct / 100.0;
    const double decay = total - warm - hold;
    const double s = step;
    if (s < warm) return cfg.peak_lr * s / warm;
    if (s < warm + hold || decay <= 0.0) return cfg.peak_lr;
    const double frac = std::min(1.0, (s - warm - hold) / decay);
    return cfg.peak_lr * (1.0 - frac) + 0.05 * cfg.peak_lr * frac;
}

AdamState AdamState::zeros(const ModelShape& shape, double beta1, double beta2, double eps) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.m = ModelParams::zeros(shape);
    s.v = ModelParams::zeros(shape);
    return s;
}

namespace {

bool group_active(ParamGroup g, const std::vector<ParamGroup>& active) {
    return active.empty() || std::find(active.begin(), active.end(), g) != active.end();
}

constexpr ParamGroup kAllGroups[] = {ParamGroup::AudioProj, ParamGroup::VisualProj, ParamGroup::Trunk,
                                     ParamGroup::Upsampler, ParamGroup::Head};

}  // namespace

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               const std::vector<ParamGroup>& active) {
    auto p = tensors(params);
    auto g = tensors(const_cast<ModelParams&>(grads));
    auto m = tensors(state.m);
    auto v = tensors(state.v);
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
        throw ConfigError("adam_step: parameter, gradient and state shapes differ");

    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!group_active(p[i].group, active)) continue;
        for (std::size_t e = 0; e < p[i].size; ++e)
            if (!std::isfinite(g[i].data[e]))
                throw NumericError("adam_step: non-finite gradient in " + p[i].name + " at element " +
                                   std::to_string(e));
    }
    for (ParamGroup grp : kAllGroups)
        if (group_active(grp, active)) ++state.steps[grp];

    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!group_active(p[i].group, active)) continue;
        const double t = static_cast<double>(state.steps[p[i].group]);
        const double c1 = 1.0 - std::pow(state.beta1, t);
        const double c2 = 1.0 - std::pow(state.beta2, t);
        for (std::size_t e = 0; e < p[i].size; ++e) {
            const double ge = g[i].data[e];
            double& me = m[i].data[e];
            double& ve = v[i].data[e];
            me = state.beta1 * me + (1.0 - state.beta1) * ge;
            ve = state.beta2 * ve + (1.0 - state.beta2) * ge * ge;
            p[i].data[e] -= lr * (me / c1) / (std::sqrt(ve / c2) + state.eps);
        }
    }
}

nlohmann::json to_json(const AdamState& s) {
    nlohmann::json steps;
    for (const auto& [g, n] : s.steps) steps[to_string(g)] = n;
    return {{"beta1", s.beta1},
            {"beta2", s.beta2},
            {"eps", s.eps},
            {"steps", steps},
            {"m", params_to_json(s.m).at("tensors")},
            {"v", params_to_json(s.v).at("tensors")}};
}

AdamState adam_state_from_json(const nlohmann::json& j, const ModelShape& shape) {
    AdamState s = AdamState::zeros(shape, j.at("beta1").get<double>(), j.at("beta2").get<double>(),
                                   j.at("eps").get<double>());
    for (ParamGroup g : kAllGroups)
        if (j.at("steps").contains(to_string(g))) s.steps[g] = j.at("steps").at(to_string(g)).get<long>();
    auto load = [](const nlohmann::json& src, ModelParams& dst) {
        for (auto& ref : tensors(dst)) {
            const auto values = src.at(ref.name).get<std::vector<double>>();
            if (values.size() != ref.size) throw IoError("optimizer state " + ref.name + " has the wrong size");
            std::copy(values.begin(), values.end(), ref.data);
        }
    };
    load(j.at("m"), s.m);
    load(j.at("v"), s.v);
    return s;
}

RowMatrix spec_augment(const RowMatrix& audio25, double prob, int span, std::uint64_t seed) {
    if (!(prob >= 0.0 && prob < 1.0)) throw ConfigError("spec_augment: prob must be in [0,1)");
    if (span < 1) throw ConfigError("spec_augment: span must be >= 1");
    if (prob == 0.0) return audio25;
    const auto mask = sample_span_mask(static_cast<std::size_t>(audio25.rows()), span, prob, seed);
    RowMatrix out = audio25;
    for (Eigen::Index t = 0; t < out.rows(); ++t)
        if (mask[t] == 0) out.row(t).setZero();
    return out;
}

double unit_accuracy(const ModelParams& params, const std::vector<Example>& set) {
    std::vector<std::size_t> correct(set.size(), 0), total(set.size(), 0);
    const auto n = static_cast<std::ptrdiff_t>(set.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto units = predict_units(params, set[i].audio, set[i].visual);
        for (std::size_t j = 0; j < units.size(); ++j) correct[i] += units[j] == set[i].target[j];
        total[i] = units.size();
    }
    std::size_t c = 0, t = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        c += correct[i];
        t += total[i];
    }
    return t == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(t);
}

void fit_input_normalisation(ModelParams& params, const std::vector<Example>& train_set) {
    const int dim = params.shape.audio_dim;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = Eigen::VectorXd::Zero(dim);
    double frames = 0;
    for (const auto& ex : train_set) {
        sum += ex.audio.colwise().sum().transpose();
        sq += ex.audio.array().square().matrix().colwise().sum().transpose();
        frames += static_cast<double>(ex.audio.rows());
    }
    if (frames == 0) return;
    params.input_mean = sum / frames;
    const Eigen::VectorXd var = (sq / frames).array() - params.input_mean.array().square();
    params.input_scale = var.array().max(0.0).sqrt().max(1e-3).inverse();
}

namespace {

void add_into(ModelParams& dst, const ModelParams& src) {
    auto d = tensors(dst);
    auto s = tensors(const_cast<ModelParams&>(src));
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t e = 0; e < d[i].size; ++e) d[i].data[e] += s[i].data[e];
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ModelShape& shape, const std::vector<Example>& train_set,
                  const std::vector<Example>& heldout_set) {
    cfg.validate();
    shape.validate();
    if (train_set.empty()) throw ConfigError("train: empty training manifest");

    TrainResult result;
    result.params = ModelParams::random(shape, mix_seed(cfg.seed, 1));
    fit_input_normalisation(result.params, train_set);
    result.optimizer = AdamState::zeros(shape, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    ModelParams& params = result.params;

    Rng order_rng(mix_seed(cfg.seed, 2));
    std::vector<std::size_t> order(train_set.size());
    std::size_t cursor = order.size();
    auto next_index = [&]() {
        if (cursor == order.size()) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
            cursor = 0;
        }
        return order[cursor++];
    };

    const std::vector<ParamGroup> head_groups{ParamGroup::Upsampler, ParamGroup::Head};
    std::optional<ModelParams> best;
    result.best_heldout_acc = -1.0;

    for (int step = 1; step <= cfg.total_updates; ++step) {
        const int batch = std::min<int>(cfg.batch_size, static_cast<int>(train_set.size()));
        std::vector<std::size_t> members(static_cast<std::size_t>(batch));
        double frames = 0;
        for (auto& m : members) {
            m = next_index();
            frames += static_cast<double>(train_set[m].target.size());
        }
        const bool frozen = step <= cfg.frozen_steps;

        std::vector<ModelParams> grads(members.size());
        std::vector<double> nll(members.size(), 0.0);
        std::vector<std::exception_ptr> errors(members.size());
        const auto count = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            try {
                grads[i] = ModelParams::zeros(shape);
                const Example& ex = train_set[members[i]];
                const double scale = 1.0 / frames;
                if (cfg.mask_prob > 0.0) {
                    Example aug{spec_augment(ex.audio, cfg.mask_prob, cfg.mask_span,
                                             mix_seed(cfg.seed, 1000003ULL * static_cast<std::uint64_t>(step) + i)),
                                ex.visual, ex.target};
                    nll[i] = accumulate_gradients(params, aug, scale, grads[i], frozen);
                } else {
                    nll[i] = accumulate_gradients(params, ex, scale, grads[i], frozen);
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);

        ModelParams& total = grads.front();
        double loss = nll.front();
        for (std::size_t i = 1; i < grads.size(); ++i) {
            add_into(total, grads[i]);
            loss += nll[i];
        }
        loss /= frames;

        const double lr = lr_at(step, cfg);
        adam_step(params, total, result.optimizer, lr, frozen ? head_groups : std::vector<ParamGroup>{});

        TrainLogRow row{step, loss, lr, std::nullopt};
        if (!heldout_set.empty() && (step % cfg.eval_every == 0 || step == cfg.total_updates)) {
            const double acc = unit_accuracy(params, heldout_set);
            row.heldout_unit_acc = acc;
            if (acc > result.best_heldout_acc) {
                result.best_heldout_acc = acc;
                result.best_step = step;
                if (cfg.keep_best) best = params;
            }
        }
        result.log.push_back(row);
    }
    if (heldout_set.empty()) result.best_step = cfg.total_updates;
    if (cfg.keep_best && best) result.params = std::move(*best);
    return result;
}

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,loss,lr,heldout_unit_acc\n";
    char buf[128];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,", r.step, r.loss, r.lr);
        out << buf;
        if (r.heldout_unit_acc) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.heldout_unit_acc);
            out << buf;
        }
        out << '\n';
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json j;
    j["format"] = "gse-checkpoint";
    j["version"] = kCheckpointVersion;
    j["step"] = ckpt.step;
    j["config"] = to_json(ckpt.config);
    j["params"] = params_to_json(ckpt.params);
    j["optimizer"] = to_json(ckpt.optimizer);
    j["extra"] = ckpt.extra;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", "") != "gse-checkpoint") throw IoError(path.string() + ": not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw IoError(path.string() + ": unsupported checkpoint version");
    Checkpoint c;
    c.params = params_from_json(j.at("params"));
    c.optimizer = adam_state_from_json(j.at("optimizer"), c.params.shape);
    c.config = train_config_from_json(j.at("config"));
    c.step = j.at("step").get<int>();
    c.extra = j.value("extra", nlohmann::json::object());
    return c;
}

}  // namespace gse
