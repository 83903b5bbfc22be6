#include "gse/config.hpp"

#include <cstdlib>
#include <cstdio>
#include <fstream>

#include "gse/error.hpp"

namespace gse {

const TaskConfig& PipelineConfig::task(const std::string& name) const {
    for (const auto& t : tasks)
        if (t.name == name) return t;
    throw ConfigError("unknown task '" + name + "'");
}

PipelineConfig default_config() {
    PipelineConfig cfg;
    cfg.train.total_updates = 1500;
    cfg.train.peak_lr = 2e-3;
    cfg.train.warmup_pct = 10.0;
    cfg.train.eval_every = 100;
    // Frame-exact prototypes keep unit boundaries intact through resynthesis.
    cfg.vocoder.smooth = 1;

    TaskConfig inpaint;
    inpaint.name = "inpaint";
    inpaint.train = {CorruptionKind::Inpaint, -20.0, 20.0, 0.5, 20, "mixed"};
    for (double p : {0.3, 0.4, 0.5}) {
        char name[16];
        std::snprintf(name, sizeof name, "p%.1f", p);
        inpaint.splits.push_back({name, {CorruptionKind::Inpaint, -20.0, 20.0, p, 20, "mixed"}});
    }
    inpaint.seed = 4;

    TaskConfig denoise;
    denoise.name = "denoise";
    denoise.train = {CorruptionKind::Denoise, -20.0, 20.0, 0.5, 20, "mixed"};
    for (const auto& band : snr_levels())
        denoise.splits.push_back({band.name, {CorruptionKind::Denoise, band.lo_db, band.hi_db, 0.5, 20, "mixed"}});
    denoise.seed = 5;

    TaskConfig separate;
    separate.name = "separate";
    separate.train = {CorruptionKind::Separate, -20.0, 20.0, 0.5, 20, "mixed"};
    for (const auto& band : snr_levels())
        separate.splits.push_back({band.name, {CorruptionKind::Separate, band.lo_db, band.hi_db, 0.5, 20, "mixed"}});
    separate.seed = 6;

    cfg.tasks = {inpaint, denoise, separate};
    return cfg;
}

nlohmann::json to_json(const CorruptionParams& p) {
    return {{"kind", to_string(p.kind)},       {"snr_lo_db", p.snr_lo_db},     {"snr_hi_db", p.snr_hi_db},
            {"drop_prob", p.drop_prob},         {"span_frames", p.span_frames}, {"noise", p.noise}};
}

CorruptionParams corruption_params_from_json(const nlohmann::json& j, CorruptionParams p) {
    for (const auto& [key, value] : j.items())
        if (!to_json(p).contains(key)) throw ConfigError("unknown corruption key '" + key + "'");
    if (j.contains("kind")) p.kind = corruption_kind_from_string(j.at("kind").get<std::string>());
    p.snr_lo_db = j.value("snr_lo_db", p.snr_lo_db);
    p.snr_hi_db = j.value("snr_hi_db", p.snr_hi_db);
    p.drop_prob = j.value("drop_prob", p.drop_prob);
    p.span_frames = j.value("span_frames", p.span_frames);
    p.noise = j.value("noise", p.noise);
    if (p.snr_lo_db > p.snr_hi_db) throw ConfigError("corruption: snr_lo_db > snr_hi_db");
    if (p.kind == CorruptionKind::Inpaint && !(p.drop_prob > 0.0 && p.drop_prob < 1.0))
        throw ConfigError("corruption: drop_prob must be in (0,1)");
    if (p.noise != "mixed" && p.noise != "white" && p.noise != "pink" && p.noise != "babble")
        throw ConfigError("corruption: noise must be mixed, white, pink or babble");
    return p;
}

nlohmann::json to_json(const PipelineConfig& cfg) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : cfg.tasks) {
        nlohmann::json splits = nlohmann::json::array();
        for (const auto& s : t.splits) splits.push_back({{"name", s.name}, {"params", to_json(s.params)}});
        tasks.push_back({{"name", t.name}, {"train", to_json(t.train)}, {"splits", splits}, {"seed", t.seed}});
    }
    const auto& v = cfg.vocoder;
    return {
        {"corpus",
         {{"num_train", cfg.corpus.num_train},
          {"num_valid", cfg.corpus.num_valid},
          {"num_test", cfg.corpus.num_test},
          {"min_seconds", cfg.corpus.min_seconds},
          {"max_seconds", cfg.corpus.max_seconds},
          {"seed", cfg.corpus.seed}}},
        {"tokenizer",
         {{"codebook_size", cfg.tokenizer.codebook_size},
          {"max_iters", cfg.tokenizer.max_iters},
          {"seed", cfg.tokenizer.seed}}},
        {"vocoder",
         {{"fft_len", v.fft_len},
          {"win_len", v.win_len},
          {"hop", v.hop},
          {"n_mels", v.n_mels},
          {"smooth", v.smooth},
          {"griffin_lim_iters", v.griffin_lim_iters},
          {"momentum", v.momentum},
          {"seed", v.seed}}},
        {"model",
         {{"hidden", cfg.model.hidden},
          {"depth", cfg.model.depth},
          {"conv_kernel", cfg.model.conv_kernel},
          {"visual_dim", cfg.model.visual_dim},
          {"informativeness", cfg.model.informativeness},
          {"seed", cfg.model.seed}}},
        {"train", to_json(cfg.train)},
        {"tasks", tasks},
        {"eval", {{"max_lag_ms", cfg.eval.max_lag_ms}, {"methods", cfg.eval.methods}}},
    };
}

namespace {

// Recursively overlays `user` onto `base`, rejecting keys absent from `base`.
void merge_checked(nlohmann::json& base, const nlohmann::json& user, const std::string& where) {
    if (!user.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        if (key == "tasks" && where.empty()) {
            base[key] = value;
        } else if (base[key].is_object()) {
            merge_checked(base[key], value, path);
        } else {
            base[key] = value;
        }
    }
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& user) {
    nlohmann::json merged = to_json(default_config());
    merge_checked(merged, user, "");
    try {
        PipelineConfig cfg;
        const auto& c = merged.at("corpus");
        cfg.corpus = {c.at("num_train").get<int>(),      c.at("num_valid").get<int>(),
                      c.at("num_test").get<int>(),       c.at("min_seconds").get<double>(),
                      c.at("max_seconds").get<double>(), c.at("seed").get<std::uint64_t>()};
        if (cfg.corpus.num_train < 1 || cfg.corpus.num_valid < 0 || cfg.corpus.num_test < 0)
            throw ConfigError("corpus: split sizes must be non-negative with at least one training utterance");
        const auto& t = merged.at("tokenizer");
        cfg.tokenizer = {t.at("codebook_size").get<int>(), t.at("max_iters").get<int>(),
                         t.at("seed").get<std::uint64_t>()};
        if (cfg.tokenizer.codebook_size < 1 || cfg.tokenizer.max_iters < 1)
            throw ConfigError("tokenizer: codebook_size and max_iters must be positive");
        const auto& v = merged.at("vocoder");
        cfg.vocoder.fft_len = v.at("fft_len").get<int>();
        cfg.vocoder.win_len = v.at("win_len").get<int>();
        cfg.vocoder.hop = v.at("hop").get<int>();
        cfg.vocoder.n_mels = v.at("n_mels").get<int>();
        cfg.vocoder.smooth = v.at("smooth").get<int>();
        cfg.vocoder.griffin_lim_iters = v.at("griffin_lim_iters").get<int>();
        cfg.vocoder.momentum = v.at("momentum").get<double>();
        cfg.vocoder.seed = v.at("seed").get<std::uint64_t>();
        if (cfg.vocoder.hop != 320) throw ConfigError("vocoder: hop must be 320 samples (50 Hz units)");
        const auto& m = merged.at("model");
        cfg.model = {m.at("hidden").get<int>(),       m.at("depth").get<int>(),
                     m.at("conv_kernel").get<int>(),  m.at("visual_dim").get<int>(),
                     m.at("informativeness").get<double>(), m.at("seed").get<std::uint64_t>()};
        if (!(cfg.model.informativeness >= 0.0 && cfg.model.informativeness <= 1.0))
            throw ConfigError("model: informativeness must be in [0,1]");
        if (cfg.model.visual_dim < 2 || cfg.model.visual_dim % 2 != 0)
            throw ConfigError("model: visual_dim must be even and >= 2");
        cfg.train = train_config_from_json(merged.at("train"));
        for (const auto& tj : merged.at("tasks")) {
            TaskConfig task;
            task.name = tj.at("name").get<std::string>();
            task.seed = tj.value("seed", std::uint64_t{4});
            task.train = corruption_params_from_json(tj.at("train"));
            for (const auto& sj : tj.value("splits", nlohmann::json::array())) {
                EvalSplit split{sj.at("name").get<std::string>(), {}};
                split.params = corruption_params_from_json(sj.value("params", nlohmann::json::object()), task.train);
                task.splits.push_back(split);
            }
            for (const auto& other : cfg.tasks)
                if (other.name == task.name) throw ConfigError("duplicate task name '" + task.name + "'");
            cfg.tasks.push_back(task);
        }
        const auto& e = merged.at("eval");
        cfg.eval.max_lag_ms = e.at("max_lag_ms").get<double>();
        cfg.eval.methods = e.at("methods").get<std::vector<std::string>>();
        for (const auto& method : cfg.eval.methods)
            if (method != "input" && method != "resynthesis" && method != "enhanced" && method != "silence")
                throw ConfigError("eval: unknown method '" + method + "'");
        return cfg;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;
    }
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

void override_seeds(nlohmann::json& j, std::uint64_t seed) {
    if (j.is_object()) {
        for (auto& [key, value] : j.items()) {
            if (key == "seed")
                value = seed;
            else
                override_seeds(value, seed);
        }
    } else if (j.is_array()) {
        for (auto& item : j) override_seeds(item, seed);
    }
}

std::optional<std::uint64_t> seed_from_environment() {
    const char* raw = std::getenv("GSE_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (end == raw || *end != '\0' || raw[0] == '-') throw ConfigError("GSE_SEED must be an unsigned integer");
    return static_cast<std::uint64_t>(v);
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace gse
