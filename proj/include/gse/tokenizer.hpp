#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "gse/signal.hpp"

namespace gse {

struct Codebook {
    RowMatrix centroids;  // [K × dim]
    FeatureKind feature_kind = FeatureKind::Mfcc;
    double training_inertia = 0.0;
    std::vector<double> inertia_history;  // objective after every assignment step

    int size() const { return static_cast<int>(centroids.rows()); }
    int dim() const { return static_cast<int>(centroids.cols()); }
};

struct UnitSequence {
    std::vector<int> units;
    double frame_rate = 50.0;
};

/// MFCC front-end used for clustering: 13 coefficients at a 20 ms hop plus
/// ±2-frame deltas and delta-deltas (39 dims, 50 Hz).
struct UnitFeatureConfig {
    MfccConfig mfcc{kDefaultSampleRate, 512, 400, 320, 23, 13, 0.0, 0.0};
    int delta_window = 2;
};

FeatureMatrix unit_features(const Waveform& wave, const UnitFeatureConfig& cfg = {});

/// Row-wise concatenation; all inputs must share dim and kind.
FeatureMatrix concat_features(const std::vector<FeatureMatrix>& parts);

/// k-means++ seeding then Lloyd iterations until the assignment stops changing
/// or max_iters. Empty clusters are moved to the point farthest from its centroid.
Codebook kmeans_fit(const FeatureMatrix& features, int K, int max_iters, std::uint64_t seed);

/// Nearest centroid per frame (squared Euclidean, ties → lowest index).
UnitSequence quantize(const FeatureMatrix& features, const Codebook& codebook);

/// Same contract as kmeans_fit, applied to hidden activations of a trained model.
Codebook refine_codebook(const FeatureMatrix& activations, int K, std::uint64_t seed, int max_iters = 100);

/// Sum of squared distances from each frame to its nearest centroid.
double inertia(const FeatureMatrix& features, const Codebook& codebook);

nlohmann::json to_json(const Codebook& codebook);
Codebook codebook_from_json(const nlohmann::json& j);
void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

/// One utterance per line, space-separated integers.
void write_units(const std::filesystem::path& path, const std::vector<UnitSequence>& sequences);
std::vector<UnitSequence> read_units(const std::filesystem::path& path, double frame_rate = 50.0);

}  // namespace gse
