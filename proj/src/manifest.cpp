#include "gse/manifest.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "gse/error.hpp"

namespace gse {

bool is_valid_split(const std::string& split) { return split == "train" || split == "valid" || split == "test"; }

std::vector<const ManifestRecord*> Manifest::split(const std::string& name) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
        if (r.split == name) out.push_back(&r);
    return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    for (const auto& r : manifest.records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["split"] = r.split;
        j["clean_path"] = r.clean_path;
        j["corrupted_path"] = r.corrupted_path;
        j["sidecar_path"] = r.sidecar_path;
        j["units_path"] = r.units_path;
        j["symbols_path"] = r.symbols_path;
        out << j.dump() << '\n';
    }
}

Manifest load_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    Manifest m;
    m.base_dir = path.parent_path();
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(where + ": " + e.what());
        }
        ManifestRecord r;
        auto field = [&](const char* key) { return j.contains(key) ? j.at(key).get<std::string>() : std::string{}; };
        r.id = field("id");
        r.split = field("split");
        r.clean_path = field("clean_path");
        r.corrupted_path = field("corrupted_path");
        r.sidecar_path = field("sidecar_path");
        r.units_path = field("units_path");
        r.symbols_path = field("symbols_path");
        if (r.id.empty()) throw IoError(where + ": record without id");
        if (!ids.insert(r.id).second) throw IoError(where + ": duplicate id '" + r.id + "'");
        if (!is_valid_split(r.split)) throw IoError(where + ": unknown split '" + r.split + "'");
        if (check_files)
            for (const auto* p : {&r.clean_path, &r.corrupted_path, &r.sidecar_path, &r.units_path, &r.symbols_path})
                if (!p->empty() && !std::filesystem::exists(m.base_dir / *p))
                    throw IoError(where + ": referenced file " + (m.base_dir / *p).string() + " does not exist");
        m.records.push_back(std::move(r));
    }
    return m;
}

}  // namespace gse
