#include "ssae/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "ssae/image_io.hpp"

namespace ssae::data {

using nlohmann::json;

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    json j;
    j["samples"] = json::array();
    for (const ManifestEntry& e : manifest.entries) {
        json s;
        s["path"] = e.path;
        if (e.gt_path.has_value()) s["gt_path"] = *e.gt_path;
        s["seed"] = e.seed;
        s["kind"] = anomaly_kind_name(e.kind);
        j["samples"].push_back(std::move(s));
    }
    std::ofstream f(path);
    if (!f) throw DataError("cannot write manifest " + path.string());
    f << j.dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    Manifest out;
    for (const json& s : j.at("samples")) {
        ManifestEntry e;
        e.path = s.at("path").get<std::string>();
        if (s.contains("gt_path")) e.gt_path = s.at("gt_path").get<std::string>();
        e.seed = s.at("seed").get<std::uint64_t>();
        e.kind = anomaly_kind_from_name(s.at("kind").get<std::string>());
        out.entries.push_back(std::move(e));
    }
    return out;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
    const Manifest manifest = load_manifest(manifest_path);
    const std::filesystem::path root = manifest_path.parent_path();
    LoadedDataset out;
    out.entries = manifest.entries;
    out.images.reserve(manifest.entries.size());
    out.masks.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        out.images.push_back(load_raw_f64(root / e.path));
        if (e.gt_path.has_value()) {
            out.masks.push_back(load_raw_f64(root / *e.gt_path));
        } else {
            out.masks.emplace_back();
        }
    }
    return out;
}

}  // namespace ssae::data
