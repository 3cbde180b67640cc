#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssae/synth.hpp"

namespace ssae::data {

struct ManifestEntry {
    std::string path;                    // relative to the manifest directory
    std::optional<std::string> gt_path;  // present for anomalous samples
    std::uint64_t seed = 0;
    AnomalyKind kind = AnomalyKind::kNone;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);

// Loads the referenced raw-f64 images (and masks where present), resolving
// paths against the manifest location.
struct LoadedDataset {
    std::vector<Image> images;
    std::vector<std::optional<Image>> masks;
    std::vector<ManifestEntry> entries;
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace ssae::data
