#include "gse/tokenizer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gse/error.hpp"
#include "gse/kernels.hpp"
#include "gse/rng.hpp"

namespace gse {

FeatureMatrix unit_features(const Waveform& wave, const UnitFeatureConfig& cfg) {
    return add_deltas(mfcc(wave, cfg.mfcc), cfg.delta_window);
}

FeatureMatrix concat_features(const std::vector<FeatureMatrix>& parts) {
    FeatureMatrix out;
    if (parts.empty()) return out;
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.dim() != parts.front().dim()) throw ConfigError("concat_features: dimension mismatch");
        rows += p.frames();
    }
    out.kind = parts.front().kind;
    out.frame_rate = parts.front().frame_rate;
    out.values.resize(rows, parts.front().dim());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.values.middleRows(r, p.frames()) = p.values;
        r += p.frames();
    }
    return out;
}

namespace {

Eigen::Index sample_by_weight(const std::vector<double>& d2, double total, Rng& rng) {
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    const auto n = static_cast<Eigen::Index>(d2.size());
    for (Eigen::Index r = 0; r < n; ++r) {
        cumulative += d2[r];
        if (cumulative > target && d2[r] > 0.0) return r;
    }
    Eigen::Index pick = n - 1;
    while (d2[pick] <= 0.0) --pick;  // rounding at the tail
    return pick;
}

// Greedy seeding: several D^2 candidates per step, keep the one with the lowest potential.
RowMatrix kmeans_plus_plus(const RowMatrix& data, int K, Rng& rng) {
    const Eigen::Index n = data.rows();
    const Eigen::Index dim = data.cols();
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(K)));
    RowMatrix centroids(K, dim);
    centroids.row(0) = data.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r)
        d2[r] = kernels::squared_distance(data.data() + r * dim, centroids.data(), dim);
    std::vector<double> candidate(d2.size()), best(d2.size());
    for (int k = 1; k < K; ++k) {
        double total = 0.0;
        for (double v : d2) total += v;
        if (!(total > 0.0))
            throw DegenerateInputError("kmeans_fit: fewer distinct rows than K=" + std::to_string(K));
        double best_potential = std::numeric_limits<double>::infinity();
        Eigen::Index best_pick = 0;
        for (int t = 0; t < trials; ++t) {
            const Eigen::Index pick = sample_by_weight(d2, total, rng);
            const double* c = data.data() + pick * dim;
            double potential = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) {
                candidate[r] = std::min(d2[r], kernels::squared_distance(data.data() + r * dim, c, dim));
                potential += candidate[r];
            }
            if (potential < best_potential) {
                best_potential = potential;
                best_pick = pick;
                best.swap(candidate);
            }
        }
        centroids.row(k) = data.row(best_pick);
        d2 = best;
    }
    return centroids;
}

double sum_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

Codebook kmeans_fit(const FeatureMatrix& features, int K, int max_iters, std::uint64_t seed) {
    const RowMatrix& data = features.values;
    if (K < 1) throw ConfigError("kmeans_fit: K must be positive");
    if (data.rows() < K)
        throw DegenerateInputError("kmeans_fit: " + std::to_string(data.rows()) + " rows is fewer than K=" +
                                   std::to_string(K));
    if (!data.allFinite()) throw InputError("kmeans_fit: features contain non-finite values");

    Rng rng(seed);
    Codebook cb;
    cb.feature_kind = features.kind;
    cb.centroids = kmeans_plus_plus(data, K, rng);

    const Eigen::Index dim = data.cols();
    std::vector<int> previous;
    for (int iter = 0;; ++iter) {
        auto assign = kernels::omp::nearest_centroid(data, cb.centroids);
        cb.inertia_history.push_back(sum_of(assign.distance));
        if (assign.index == previous || iter >= max_iters) break;

        // Fixed-order accumulation keeps seeded runs bit-reproducible.
        RowMatrix sums = RowMatrix::Zero(K, dim);
        std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
        for (Eigen::Index r = 0; r < data.rows(); ++r) {
            sums.row(assign.index[r]) += data.row(r);
            ++counts[assign.index[r]];
        }
        for (int k = 0; k < K; ++k) {
            if (counts[k] > 0) {
                cb.centroids.row(k) = sums.row(k) / static_cast<double>(counts[k]);
                continue;
            }
            Eigen::Index far = 0;
            for (Eigen::Index r = 1; r < data.rows(); ++r)
                if (assign.distance[r] > assign.distance[far]) far = r;
            cb.centroids.row(k) = data.row(far);
            assign.distance[far] = 0.0;
        }
        previous = std::move(assign.index);
    }
    cb.training_inertia = cb.inertia_history.back();
    return cb;
}

UnitSequence quantize(const FeatureMatrix& features, const Codebook& codebook) {
    if (features.frames() > 0 && features.dim() != codebook.dim())
        throw ConfigError("quantize: feature dim " + std::to_string(features.dim()) + " does not match codebook dim " +
                          std::to_string(codebook.dim()));
    UnitSequence seq;
    seq.frame_rate = features.frame_rate;
    if (features.frames() == 0) return seq;
    seq.units = kernels::omp::nearest_centroid(features.values, codebook.centroids).index;
    return seq;
}

Codebook refine_codebook(const FeatureMatrix& activations, int K, std::uint64_t seed, int max_iters) {
    FeatureMatrix feat = activations;
    feat.kind = FeatureKind::Activations;
    return kmeans_fit(feat, K, max_iters, seed);
}

double inertia(const FeatureMatrix& features, const Codebook& codebook) {
    return sum_of(kernels::omp::nearest_centroid(features.values, codebook.centroids).distance);
}

nlohmann::json to_json(const Codebook& codebook) {
    nlohmann::json j;
    j["K"] = codebook.size();
    j["dim"] = codebook.dim();
    j["kind"] = to_string(codebook.feature_kind);
    j["training_inertia"] = codebook.training_inertia;
    j["inertia_history"] = codebook.inertia_history;
    auto rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < codebook.centroids.rows(); ++k) {
        std::vector<double> row(codebook.centroids.row(k).begin(), codebook.centroids.row(k).end());
        rows.push_back(row);
    }
    j["centroids"] = rows;
    return j;
}

Codebook codebook_from_json(const nlohmann::json& j) {
    Codebook cb;
    const int K = j.at("K").get<int>();
    const int dim = j.at("dim").get<int>();
    cb.feature_kind = feature_kind_from_string(j.at("kind").get<std::string>());
    cb.training_inertia = j.at("training_inertia").get<double>();
    cb.inertia_history = j.value("inertia_history", std::vector<double>{});
    const auto& rows = j.at("centroids");
    if (static_cast<int>(rows.size()) != K) throw IoError("codebook: centroid count differs from K");
    cb.centroids.resize(K, dim);
    for (int k = 0; k < K; ++k) {
        const auto row = rows[k].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != dim) throw IoError("codebook: centroid width differs from dim");
        for (int d = 0; d < dim; ++d) cb.centroids(k, d) = row[d];
    }
    return cb;
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(codebook).dump() << '\n';
}

Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return codebook_from_json(nlohmann::json::parse(in));
}

void write_units(const std::filesystem::path& path, const std::vector<UnitSequence>& sequences) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& seq : sequences) {
        for (std::size_t i = 0; i < seq.units.size(); ++i) out << (i ? " " : "") << seq.units[i];
        out << '\n';
    }
}

std::vector<UnitSequence> read_units(const std::filesystem::path& path, double frame_rate) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<UnitSequence> out;
    std::string line;
    while (std::getline(in, line)) {
        UnitSequence seq;
        seq.frame_rate = frame_rate;
        std::istringstream ss(line);
        int u;
        while (ss >> u) seq.units.push_back(u);
        if (!ss.eof()) throw IoError(path.string() + ": malformed unit line");
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace gse
