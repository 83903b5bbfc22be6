#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gse {

/// One utterance in a dataset listing. Paths are relative to the manifest's directory;
/// empty paths are allowed for artifacts not produced yet.
struct ManifestRecord {
    std::string id;
    std::string split;  // train | valid | test
    std::string clean_path;
    std::string corrupted_path;
    std::string sidecar_path;
    std::string units_path;
    std::string symbols_path;
};

struct Manifest {
    std::vector<ManifestRecord> records;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
    std::vector<const ManifestRecord*> split(const std::string& name) const;
};

bool is_valid_split(const std::string& split);

/// JSON lines, one record per line, in record order.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Throws IoError on malformed lines, duplicate ids, unknown splits or missing referenced files.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);

}  // namespace gse
