#include "gse/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gse/beamformer.hpp"
#include "gse/config.hpp"
#include "gse/corpus.hpp"
#include "gse/error.hpp"
#include "gse/manifest.hpp"
#include "gse/metrics.hpp"
#include "gse/pipeline.hpp"
#include "gse/rng.hpp"
#include "gse/wav.hpp"

namespace gse {

namespace fs = std::filesystem;

namespace {

// Stable string hash for deriving per-split seeds.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string rel(const fs::path& target, const fs::path& base) { return fs::relative(target, base).generic_string(); }

std::vector<int> read_ints(const fs::path& path) {
    const auto seqs = read_units(path);
    if (seqs.size() != 1) throw IoError(path.string() + ": expected exactly one line");
    return seqs.front().units;
}

void write_ints(const fs::path& path, const std::vector<int>& values) { write_units(path, {UnitSequence{values, 50.0}}); }

struct RunContext {
    fs::path dir;
    PipelineConfig cfg;

    fs::path corpus_manifest() const { return dir / "corpus" / "manifest.jsonl"; }
    fs::path codebook_path() const { return dir / "tokenizer" / "codebook.json"; }
    fs::path prototypes_path() const { return dir / "tokenizer" / "prototypes.json"; }
    fs::path corrupt_dir(const std::string& task, const std::string& split) const {
        return dir / "corrupt" / task / split;
    }
    fs::path model_dir(const std::string& name) const { return dir / "models" / name; }
    fs::path enhance_dir(const std::string& task, const std::string& split, const std::string& method) const {
        return dir / "enhance" / task / split / method;
    }
    fs::path eval_dir(const std::string& task, const std::string& split) const { return dir / "eval" / task / split; }
};

struct CommonOptions {
    std::string run_dir;
    std::string config;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--run-dir", o.run_dir, "Run directory holding all artifacts")->required();
    cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.sets, "Override a config key, e.g. --set train.total_updates=200");
}

// Resolves the configuration and writes the snapshot on first use. Later
// invocations must resolve to the same configuration.
RunContext open_run(const CommonOptions& o) {
    RunContext ctx;
    ctx.dir = o.run_dir;
    const fs::path snapshot = ctx.dir / "config.json";
    nlohmann::json user = nlohmann::json::object();
    if (!o.config.empty()) {
        try {
            user = nlohmann::json::parse(read_text(o.config));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(o.config + ": " + e.what());
        }
    } else if (fs::exists(snapshot)) {
        user = nlohmann::json::parse(read_text(snapshot));
    }
    for (const auto& s : o.sets) apply_override(user, s);
    if (const auto seed = seed_from_environment()) {
        nlohmann::json full = to_json(config_from_json(user));
        override_seeds(full, *seed);
        user = full;
    }
    ctx.cfg = config_from_json(user);
    const std::string resolved = to_json(ctx.cfg).dump(2) + "\n";
    if (fs::exists(snapshot)) {
        if (read_text(snapshot) != resolved)
            throw ConfigError("run directory " + ctx.dir.string() +
                              " was created with a different configuration; use a new --run-dir");
    } else {
        write_text(snapshot, resolved);
    }
    return ctx;
}

struct LoadedCorpus {
    Manifest manifest;
    std::vector<CorpusItem> items;  // manifest order
    std::map<std::string, std::size_t> index;
};

LoadedCorpus load_corpus(const RunContext& ctx) {
    if (!fs::exists(ctx.corpus_manifest()))
        throw IoError("missing " + ctx.corpus_manifest().string() + "; run gen-corpus first");
    LoadedCorpus c;
    c.manifest = load_manifest(ctx.corpus_manifest());
    c.items.resize(c.manifest.records.size());
    for (std::size_t i = 0; i < c.manifest.records.size(); ++i) {
        const auto& r = c.manifest.records[i];
        auto& item = c.items[i];
        item.id = r.id;
        item.split = r.split;
        item.wave = read_wav(c.manifest.resolve(r.clean_path));
        if (!r.symbols_path.empty()) item.symbols = read_ints(c.manifest.resolve(r.symbols_path));
        c.index[r.id] = i;
    }
    return c;
}

TokenizerArtifacts load_tokenizer(const RunContext& ctx) {
    if (!fs::exists(ctx.codebook_path()))
        throw IoError("missing " + ctx.codebook_path().string() + "; run `tokenize fit` first");
    return {load_codebook(ctx.codebook_path()), load_prototypes(ctx.prototypes_path())};
}

UnitSequence clean_units(const Manifest& m, const ManifestRecord& r) {
    if (r.units_path.empty()) throw IoError("utterance " + r.id + " has no units; run `tokenize quantize` first");
    return UnitSequence{read_ints(m.resolve(r.units_path)), 50.0};
}

// ---- gen-corpus ----------------------------------------------------------

void cmd_gen_corpus(const RunContext& ctx) {
    const auto corpus = generate_corpus(ctx.cfg.corpus);
    const fs::path base = ctx.corpus_manifest().parent_path();
    Manifest m;
    m.base_dir = base;
    m.records.resize(corpus.size());
    const auto count = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto& item = corpus[i];
        auto& r = m.records[i];
        r.id = item.id;
        r.split = item.split;
        r.clean_path = "clean/" + item.id + ".wav";
        r.symbols_path = "symbols/" + item.id + ".txt";
        write_wav(base / r.clean_path, item.wave, WavEncoding::Float32);
        write_ints(base / r.symbols_path, item.symbols);
    }
    write_manifest(ctx.corpus_manifest(), m);
    std::cout << "wrote " << corpus.size() << " utterances to " << base.string() << "\n";
}

// ---- tokenize --------------------------------------------------------------

void cmd_tokenize_fit(const RunContext& ctx) {
    const auto corpus = load_corpus(ctx);
    std::vector<const Waveform*> waves;
    for (const auto& item : corpus.items)
        if (item.split == "train") waves.push_back(&item.wave);
    const auto art = fit_tokenizer(waves, ctx.cfg.tokenizer, ctx.cfg.vocoder);
    save_codebook(ctx.codebook_path(), art.codebook);
    save_prototypes(ctx.prototypes_path(), art.prototypes);
    std::printf("codebook K=%d dim=%d inertia=%.6f\n", art.codebook.size(), art.codebook.dim(),
                art.codebook.training_inertia);
}

void cmd_tokenize_quantize(const RunContext& ctx, const std::string& input, const std::string& output) {
    const auto codebook = load_tokenizer(ctx).codebook;
    if (!input.empty()) {
        if (output.empty()) throw ConfigError("--input requires --output");
        write_units(output, {tokenize(read_wav(input), codebook)});
        return;
    }
    const auto corpus = load_corpus(ctx);
    Manifest m = corpus.manifest;
    const auto count = static_cast<std::ptrdiff_t>(m.records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        auto& r = m.records[i];
        r.units_path = "units/" + r.id + ".txt";
        write_units(m.resolve(r.units_path), {tokenize(corpus.items[i].wave, codebook)});
    }
    write_manifest(ctx.corpus_manifest(), m);
    std::cout << "quantized " << m.records.size() << " utterances\n";
}

// ---- corrupt ---------------------------------------------------------------

struct CorruptRequest {
    std::string task;
    std::string split;
    std::optional<double> drop;
    std::optional<int> span;
    std::string level;
    std::string noise;
};

std::vector<EvalSplit> resolve_splits(const TaskConfig& task, const CorruptRequest& req) {
    const bool custom = req.drop || req.span || !req.level.empty() || !req.noise.empty();
    if (!custom) {
        if (req.split.empty()) {
            std::vector<EvalSplit> all{{"train", task.train}};
            all.insert(all.end(), task.splits.begin(), task.splits.end());
            return all;
        }
        if (req.split == "train") return {{"train", task.train}};
        for (const auto& s : task.splits)
            if (s.name == req.split) return {s};
        throw ConfigError("task '" + task.name + "' has no split '" + req.split + "'");
    }
    EvalSplit s{req.split, task.train};
    if (req.split == "train") s.params = task.train;
    for (const auto& known : task.splits)
        if (known.name == req.split) s.params = known.params;
    if (req.drop) s.params.drop_prob = *req.drop;
    if (req.span) s.params.span_frames = *req.span;
    if (!req.level.empty()) {
        const auto& band = snr_level(req.level);
        s.params.snr_lo_db = band.lo_db;
        s.params.snr_hi_db = band.hi_db;
    }
    if (!req.noise.empty()) s.params.noise = req.noise;
    s.params = corruption_params_from_json(to_json(s.params));
    if (s.name.empty()) {
        char buf[64];
        if (s.params.kind == CorruptionKind::Inpaint)
            std::snprintf(buf, sizeof buf, "p%.2f-s%d", s.params.drop_prob, s.params.span_frames);
        else if (!req.level.empty())
            std::snprintf(buf, sizeof buf, "%s", req.level.c_str());
        else
            std::snprintf(buf, sizeof buf, "snr%g_%g", s.params.snr_lo_db, s.params.snr_hi_db);
        s.name = buf;
        if (!req.noise.empty()) s.name += "-" + req.noise;
    }
    return {s};
}

void corrupt_split(const RunContext& ctx, const LoadedCorpus& corpus, const TaskConfig& task, const EvalSplit& split) {
    const fs::path out = ctx.corrupt_dir(task.name, split.name);
    // Training data covers train and valid utterances; evaluation splits cover test.
    const bool training = split.name == "train";
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        const auto& s = corpus.items[i].split;
        if (training ? (s == "train" || s == "valid") : s == "test") members.push_back(i);
    }
    if (members.empty()) throw ConfigError("no utterances for split '" + split.name + "'");
    std::map<std::string, std::vector<const CorpusItem*>> pools;
    for (const auto& item : corpus.items) pools[item.split].push_back(&item);

    const std::uint64_t split_seed = mix_seed(task.seed, fnv1a(split.name));
    Manifest m;
    m.base_dir = out;
    m.records.resize(members.size());
    std::vector<double> dropped(members.size(), 0.0), frames(members.size(), 0.0);
    const auto count = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
        const auto& item = corpus.items[members[k]];
        const auto& src = corpus.manifest.records[members[k]];
        const auto rec = corrupt_item(item, split.params, pools.at(item.split), mix_seed(split_seed, fnv1a(item.id)));
        auto& r = m.records[k];
        r.id = item.id;
        r.split = item.split;
        r.clean_path = rel(corpus.manifest.resolve(src.clean_path), out);
        r.symbols_path = src.symbols_path.empty() ? "" : rel(corpus.manifest.resolve(src.symbols_path), out);
        r.units_path = src.units_path.empty() ? "" : rel(corpus.manifest.resolve(src.units_path), out);
        r.corrupted_path = "wav/" + item.id + ".wav";
        r.sidecar_path = "sidecar/" + item.id + ".json";
        write_wav(out / r.corrupted_path, rec.corrupted, WavEncoding::Float32);
        nlohmann::json side = to_json(rec);
        side["id"] = item.id;
        write_text(out / r.sidecar_path, side.dump() + "\n");
        for (auto v : rec.mask) dropped[k] += v == 0 ? 1.0 : 0.0;
        frames[k] = static_cast<double>(rec.mask.size());
    }
    write_manifest(out / "manifest.jsonl", m);
    double d = 0.0, f = 0.0;
    for (std::size_t k = 0; k < members.size(); ++k) {
        d += dropped[k];
        f += frames[k];
    }
    std::printf("%s/%s: %zu utterances, dropped fraction %.4f\n", task.name.c_str(), split.name.c_str(),
                members.size(), f > 0 ? d / f : 0.0);
}

void cmd_corrupt(const RunContext& ctx, const CorruptRequest& req) {
    const auto corpus = load_corpus(ctx);
    const auto& task = ctx.cfg.task(req.task);
    for (const auto& split : resolve_splits(task, req)) corrupt_split(ctx, corpus, task, split);
}

// ---- train -----------------------------------------------------------------

struct SplitData {
    Manifest manifest;
    std::vector<Example> examples;
    std::vector<Waveform> corrupted;
};

SplitData load_split(const RunContext& ctx, const std::string& task, const std::string& split,
                     const ModelConfig& model) {
    const fs::path path = ctx.corrupt_dir(task, split) / "manifest.jsonl";
    if (!fs::exists(path))
        throw IoError("missing " + path.string() + "; run `corrupt --task " + task + "` first");
    SplitData d;
    d.manifest = load_manifest(path);
    const auto n = d.manifest.records.size();
    d.examples.resize(n);
    d.corrupted.resize(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            const auto& r = d.manifest.records[i];
            d.corrupted[i] = read_wav(d.manifest.resolve(r.corrupted_path));
            const auto symbols = read_ints(d.manifest.resolve(r.symbols_path));
            d.examples[i] = make_example(d.corrupted[i], symbols, clean_units(d.manifest, r), model,
                                         mix_seed(model.seed, fnv1a(r.id)));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return d;
}

void cmd_train(const RunContext& ctx, const std::string& task_name, std::string name,
               std::optional<double> informativeness) {
    const auto& task = ctx.cfg.task(task_name);
    if (name.empty()) name = task.name;
    ModelConfig model = ctx.cfg.model;
    if (informativeness) model.informativeness = *informativeness;
    if (!(model.informativeness >= 0.0 && model.informativeness <= 1.0))
        throw ConfigError("--informativeness must be in [0,1]");
    const auto codebook = load_tokenizer(ctx).codebook;
    auto data = load_split(ctx, task.name, "train", model);
    std::vector<Example> train_set, heldout;
    for (std::size_t i = 0; i < data.examples.size(); ++i)
        (data.manifest.records[i].split == "train" ? train_set : heldout).push_back(std::move(data.examples[i]));
    if (heldout.empty()) heldout = train_set;
    const auto shape = model_shape(model, codebook.size());
    const auto result = train(ctx.cfg.train, shape, train_set, heldout);

    Checkpoint ck;
    ck.params = result.params;
    ck.optimizer = result.optimizer;
    ck.config = ctx.cfg.train;
    ck.step = ctx.cfg.train.total_updates;
    ck.extra = {{"task", task.name},
                {"informativeness", model.informativeness},
                {"best_step", result.best_step},
                {"best_heldout_unit_acc", result.best_heldout_acc}};
    save_checkpoint(ctx.model_dir(name) / "checkpoint.json", ck);
    write_train_log(ctx.model_dir(name) / "train_log.csv", result.log);
    std::printf("model %s: best held-out unit accuracy %.4f at step %d\n", name.c_str(), result.best_heldout_acc,
                result.best_step);
}

// ---- enhance ---------------------------------------------------------------

const std::vector<std::string> kMethods{"input", "resynthesis", "enhanced", "silence"};

void cmd_enhance(const RunContext& ctx, const std::string& task_name, const std::string& split,
                 std::string model_name, const std::vector<std::string>& methods) {
    const auto& task = ctx.cfg.task(task_name);
    if (model_name.empty()) model_name = task.name;
    const auto tok = load_tokenizer(ctx);
    const bool need_model = std::find(methods.begin(), methods.end(), "enhanced") != methods.end();
    std::optional<Checkpoint> ck;
    ModelConfig model = ctx.cfg.model;
    if (need_model) {
        const fs::path path = ctx.model_dir(model_name) / "checkpoint.json";
        if (!fs::exists(path)) throw IoError("missing " + path.string() + "; run `train` first");
        ck = load_checkpoint(path);
        model.informativeness = ck->extra.value("informativeness", model.informativeness);
    }
    const auto data = load_split(ctx, task.name, split, model);
    for (const auto& method : methods) {
        if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end())
            throw ConfigError("unknown method '" + method + "'");
        const fs::path out = ctx.enhance_dir(task.name, split, method);
        Manifest m;
        m.base_dir = out;
        m.records.resize(data.manifest.records.size());
        const auto count = static_cast<std::ptrdiff_t>(m.records.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const auto& src = data.manifest.records[i];
            const Waveform& corrupted = data.corrupted[i];
            const std::size_t n = corrupted.num_samples();
            Waveform result;
            std::optional<UnitSequence> units;
            if (method == "input") {
                result = corrupted;
            } else if (method == "silence") {
                result = Waveform::zeros(n, 1, corrupted.sample_rate);
            } else if (method == "resynthesis") {
                units = tokenize(corrupted, tok.codebook);
            } else {
                units = enhance_units(ck->params, data.examples[i]);
            }
            if (units) result = resynthesize(*units, tok.prototypes, ctx.cfg.vocoder, n);
            auto& r = m.records[i];
            r = src;
            r.clean_path = rel(data.manifest.resolve(src.clean_path), out);
            r.symbols_path = src.symbols_path.empty() ? "" : rel(data.manifest.resolve(src.symbols_path), out);
            r.units_path = "";
            r.sidecar_path = rel(data.manifest.resolve(src.sidecar_path), out);
            r.corrupted_path = "wav/" + src.id + ".wav";
            write_wav(out / r.corrupted_path, result, WavEncoding::Pcm16);
            if (units) {
                r.units_path = "units/" + src.id + ".txt";
                write_units(out / r.units_path, {*units});
            }
        }
        write_manifest(out / "manifest.jsonl", m);
        std::printf("%s/%s/%s: %zu outputs\n", task.name.c_str(), split.c_str(), method.c_str(), m.records.size());
    }
}

// ---- evaluate --------------------------------------------------------------

void cmd_evaluate_pair(const std::string& ref, const std::string& deg, const std::string& codebook_path,
                       const std::string& output, double max_lag_ms) {
    const Waveform a = read_wav(ref);
    const Waveform b = read_wav(deg);
    UtteranceScores s;
    if (!codebook_path.empty()) {
        s = score_output(fs::path(deg).stem().string(), "pair", a, b, load_codebook(codebook_path), max_lag_ms);
    } else {
        s.id = fs::path(deg).stem().string();
        s.split = "pair";
        s.estoi = estoi(a, b);
        s.mcd_db = mcd(a, b);
        s.si_snr_db = si_snr(a, b);
        s.uer = std::numeric_limits<double>::quiet_NaN();  // no codebook, no units
        try {
            const auto sync = sync_offset(a, b, max_lag_ms);
            s.sync_offset_ms = sync.offset_ms;
            s.sync_confidence = sync.confidence;
        } catch (const DegenerateInputError&) {
        }
    }
    const auto csv = to_csv(make_report({s}));
    if (output.empty())
        std::cout << csv;
    else
        write_text(output, csv);
}

void cmd_evaluate(const RunContext& ctx, const std::string& task_name, const std::string& split,
                  const std::vector<std::string>& methods) {
    const auto& task = ctx.cfg.task(task_name);
    const auto codebook = load_tokenizer(ctx).codebook;
    for (const auto& method : methods) {
        const fs::path path = ctx.enhance_dir(task.name, split, method) / "manifest.jsonl";
        if (!fs::exists(path)) throw IoError("missing " + path.string() + "; run `enhance` first");
        const auto m = load_manifest(path);
        std::vector<UtteranceScores> rows(m.records.size());
        std::vector<std::exception_ptr> errors(rows.size());
        const auto count = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            try {
                const auto& r = m.records[i];
                rows[i] = score_output(r.id, r.split, read_wav(m.resolve(r.clean_path)),
                                       read_wav(m.resolve(r.corrupted_path)), codebook, ctx.cfg.eval.max_lag_ms);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
        const auto report = make_report(std::move(rows));
        const fs::path out = ctx.eval_dir(task.name, split);
        write_text(out / (method + ".csv"), to_csv(report));
        auto summary = summary_json(report);
        summary["task"] = task.name;
        summary["split"] = split;
        summary["method"] = method;
        write_text(out / (method + ".json"), summary.dump(2) + "\n");
        std::printf("%s/%s/%s: UER %.4f ESTOI %.4f MCD %.3f dB\n", task.name.c_str(), split.c_str(),
                    method.c_str(), report.aggregate.uer, report.aggregate.estoi, report.aggregate.mcd_db);
    }
}

// ---- report ----------------------------------------------------------------

void cmd_report(const RunContext& ctx) {
    std::vector<std::string> columns;
    std::map<std::string, std::map<std::string, nlohmann::json>> cells;  // method → column → summary
    for (const auto& task : ctx.cfg.tasks)
        for (const auto& split : task.splits) {
            const std::string col = task.name + "/" + split.name;
            bool any = false;
            for (const auto& method : ctx.cfg.eval.methods) {
                const fs::path p = ctx.eval_dir(task.name, split.name) / (method + ".json");
                if (!fs::exists(p)) continue;
                cells[method][col] = nlohmann::json::parse(read_text(p));
                any = true;
            }
            if (any) columns.push_back(col);
        }
    if (columns.empty()) throw IoError("no evaluation results under " + (ctx.dir / "eval").string());

    std::string csv = "metric,method";
    for (const auto& c : columns) csv += "," + c;
    csv += "\n";
    nlohmann::ordered_json js;
    char buf[64];
    for (const char* metric : {"uer", "estoi", "mcd_db", "si_snr_db", "sync_confidence"}) {
        for (const auto& method : ctx.cfg.eval.methods) {
            csv += std::string(metric) + "," + method;
            for (const auto& c : columns) {
                const auto it = cells[method].find(c);
                if (it == cells[method].end()) {
                    csv += ",";
                    continue;
                }
                const double v = it->second.at(metric).get<double>();
                std::snprintf(buf, sizeof buf, ",%.6f", v);
                csv += buf;
                js[metric][method][c] = v;
            }
            csv += "\n";
        }
    }
    write_text(ctx.dir / "report.csv", csv);
    write_text(ctx.dir / "report.json", js.dump(2) + "\n");

    std::printf("%-12s", "UER");
    for (const auto& c : columns) std::printf(" %16s", c.c_str());
    std::printf("\n");
    for (const auto& method : ctx.cfg.eval.methods) {
        std::printf("%-12s", method.c_str());
        for (const auto& c : columns) {
            const auto it = cells[method].find(c);
            if (it == cells[method].end())
                std::printf(" %16s", "-");
            else
                std::printf(" %16.4f", it->second.at("uer").get<double>());
        }
        std::printf("\n");
    }
}

// ---- run (all stages) ------------------------------------------------------

void cmd_run(const RunContext& ctx) {
    cmd_gen_corpus(ctx);
    cmd_tokenize_fit(ctx);
    cmd_tokenize_quantize(ctx, "", "");
    for (const auto& task : ctx.cfg.tasks) {
        cmd_corrupt(ctx, {task.name, "", std::nullopt, std::nullopt, "", ""});
        cmd_train(ctx, task.name, "", std::nullopt);
        for (const auto& split : task.splits) {
            cmd_enhance(ctx, task.name, split.name, "", ctx.cfg.eval.methods);
            cmd_evaluate(ctx, task.name, split.name, ctx.cfg.eval.methods);
        }
    }
    cmd_report(ctx);
}

// ---- array tools -----------------------------------------------------------

Eigen::Vector3d parse_direction(const std::string& text) {
    std::stringstream ss(text);
    std::vector<double> v;
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            v.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw ConfigError("direction '" + text + "' must be three comma-separated numbers");
        }
    }
    if (v.size() != 3) throw ConfigError("direction '" + text + "' must be three comma-separated numbers");
    Eigen::Vector3d d(v[0], v[1], v[2]);
    if (d.norm() == 0.0) throw ConfigError("direction must be non-zero");
    return d.normalized();
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Generalized speech enhancement pipeline on a synthetic corpus"};
    app.require_subcommand(1);

    CommonOptions common;

    auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus and its manifest");
    add_common(gen, common);

    CorruptRequest creq;
    auto* corrupt = app.add_subcommand("corrupt", "Corrupt corpus utterances for a task");
    add_common(corrupt, common);
    corrupt->add_option("--task", creq.task, "Task name from the config")->required();
    corrupt->add_option("--split", creq.split, "Split name (train or one of the task's evaluation splits)");
    corrupt->add_option("--drop", creq.drop, "Inpainting drop probability");
    corrupt->add_option("--span", creq.span, "Inpainting span length in 20 ms frames");
    corrupt->add_option("--level", creq.level, "SNR level lvl1..lvl4");
    corrupt->add_option("--noise", creq.noise, "Noise kind: white, pink, babble or mixed");

    auto* tokenize_cmd = app.add_subcommand("tokenize", "Fit the unit codebook or quantize audio");
    tokenize_cmd->require_subcommand(1);
    auto* tok_fit = tokenize_cmd->add_subcommand("fit", "Fit k-means units and vocoder prototypes");
    add_common(tok_fit, common);
    std::string q_input, q_output;
    auto* tok_q = tokenize_cmd->add_subcommand("quantize", "Write unit sequences");
    add_common(tok_q, common);
    tok_q->add_option("--input", q_input, "Quantize a single WAV instead of the corpus")->check(CLI::ExistingFile);
    tok_q->add_option("--output", q_output, "Unit file for --input");

    std::string task_name, model_name;
    std::optional<double> informativeness;
    auto* train_cmd = app.add_subcommand("train", "Train the unit predictor for a task");
    add_common(train_cmd, common);
    train_cmd->add_option("--task", task_name, "Task name")->required();
    train_cmd->add_option("--name", model_name, "Model name (defaults to the task name)");
    train_cmd->add_option("--informativeness", informativeness, "Keep rate of the visual side-channel");

    std::string split_name;
    std::vector<std::string> methods;
    auto* enhance = app.add_subcommand("enhance", "Produce outputs for an evaluation split");
    add_common(enhance, common);
    enhance->add_option("--task", task_name, "Task name")->required();
    enhance->add_option("--split", split_name, "Evaluation split")->required();
    enhance->add_option("--model", model_name, "Model name (defaults to the task name)");
    enhance->add_option("--method", methods, "input, resynthesis, enhanced or silence (default: all)");

    std::string ref, deg, codebook_path, output;
    double max_lag_ms = 200.0;
    auto* evaluate = app.add_subcommand("evaluate", "Score outputs against clean references");
    evaluate->add_option("--run-dir", common.run_dir, "Run directory");
    evaluate->add_option("--config", common.config, "JSON configuration file")->check(CLI::ExistingFile);
    evaluate->add_option("--set", common.sets, "Override a config key");
    evaluate->add_option("--task", task_name, "Task name");
    evaluate->add_option("--split", split_name, "Evaluation split");
    evaluate->add_option("--method", methods, "Methods to score (default: all)");
    evaluate->add_option("--ref", ref, "Reference WAV (pair mode)")->check(CLI::ExistingFile);
    evaluate->add_option("--deg", deg, "Degraded WAV (pair mode)")->check(CLI::ExistingFile);
    evaluate->add_option("--codebook", codebook_path, "Codebook for UER in pair mode")->check(CLI::ExistingFile);
    evaluate->add_option("--output", output, "CSV path in pair mode (default: stdout)");
    evaluate->add_option("--max-lag-ms", max_lag_ms, "Sync search window in pair mode");

    auto* report = app.add_subcommand("report", "Aggregate evaluation results into method × split tables");
    add_common(report, common);

    auto* run = app.add_subcommand("run", "Run every stage for every configured task");
    add_common(run, common);

    std::string in_path, out_path, target_out, noise_out;
    double spacing = 0.05, snr_db = 0.0, loading = 1e-2;
    std::string direction = "1,0,0";
    std::uint64_t seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Simulate a 4-mic square-array capture of a mono WAV");
    simulate->add_option("--input", in_path, "Mono source WAV")->required()->check(CLI::ExistingFile);
    simulate->add_option("--output", out_path, "Multichannel capture WAV")->required();
    simulate->add_option("--target-out", target_out, "Noiseless multichannel image");
    simulate->add_option("--noise-out", noise_out, "Diffuse noise component");
    simulate->add_option("--spacing", spacing, "Array side length in metres");
    simulate->add_option("--direction", direction, "Propagation direction x,y,z");
    simulate->add_option("--snr", snr_db, "Diffuse SNR at the reference microphone in dB");
    simulate->add_option("--seed", seed, "Noise seed");

    auto* beamform_cmd = app.add_subcommand("beamform", "Diffuse-noise MVDR beamforming of a 4-mic capture");
    beamform_cmd->add_option("--input", in_path, "Multichannel capture WAV")->required()->check(CLI::ExistingFile);
    beamform_cmd->add_option("--output", out_path, "Mono output WAV")->required();
    beamform_cmd->add_option("--spacing", spacing, "Array side length in metres");
    beamform_cmd->add_option("--direction", direction, "Propagation direction x,y,z");
    beamform_cmd->add_option("--loading", loading, "Diagonal loading relative to the mean diagonal");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            cmd_gen_corpus(open_run(common));
        } else if (corrupt->parsed()) {
            cmd_corrupt(open_run(common), creq);
        } else if (tok_fit->parsed()) {
            cmd_tokenize_fit(open_run(common));
        } else if (tok_q->parsed()) {
            cmd_tokenize_quantize(open_run(common), q_input, q_output);
        } else if (train_cmd->parsed()) {
            cmd_train(open_run(common), task_name, model_name, informativeness);
        } else if (enhance->parsed()) {
            cmd_enhance(open_run(common), task_name, split_name, model_name, methods.empty() ? kMethods : methods);
        } else if (evaluate->parsed()) {
            if (!ref.empty() || !deg.empty()) {
                if (ref.empty() || deg.empty()) throw ConfigError("pair mode needs both --ref and --deg");
                cmd_evaluate_pair(ref, deg, codebook_path, output, max_lag_ms);
            } else {
                if (common.run_dir.empty() || task_name.empty() || split_name.empty())
                    throw ConfigError("evaluate needs --ref/--deg or --run-dir, --task and --split");
                cmd_evaluate(open_run(common), task_name, split_name, methods.empty() ? kMethods : methods);
            }
        } else if (report->parsed()) {
            cmd_report(open_run(common));
        } else if (run->parsed()) {
            cmd_run(open_run(common));
        } else if (simulate->parsed()) {
            const auto source = read_wav(in_path);
            const auto cap = simulate_capture(source, square_array(spacing), parse_direction(direction), snr_db, seed);
            write_wav(out_path, cap.mix, WavEncoding::Float32);
            if (!target_out.empty()) write_wav(target_out, cap.target, WavEncoding::Float32);
            if (!noise_out.empty()) write_wav(noise_out, cap.noise, WavEncoding::Float32);
        } else if (beamform_cmd->parsed()) {
            const auto capture = read_wav(in_path);
            write_wav(out_path, mvdr_beamform(capture, square_array(spacing), parse_direction(direction), loading),
                      WavEncoding::Float32);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace gse
