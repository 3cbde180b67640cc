#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssae/image.hpp"

namespace ssae::data {

// Binary PGM (P5). Values are clamped to [0,1] and quantized to the stated
// bit depth; 16-bit samples are big-endian per the format.
void save_pgm(const std::filesystem::path& path, const Image& img, int bit_depth = 16);
Image load_pgm(const std::filesystem::path& path);

// Metadata carried next to raw float dumps.
struct RawSidecar {
    int width = 0;
    int height = 0;
    std::string provenance;
    std::optional<double> threshold;
};

// Raw little-endian f64 dump plus a JSON sidecar (<path>.json). Bitwise
// lossless round-trip.
void save_raw_f64(const std::filesystem::path& path, const Image& img,
                  const std::string& provenance = "",
                  std::optional<double> threshold = std::nullopt);
Image load_raw_f64(const std::filesystem::path& path, RawSidecar* sidecar = nullptr);

// Minimal single-file uncompressed NIfTI-1 reader: little-endian headers,
// datatypes uint8/int16/float32, scl_slope/scl_inter applied. Axial slices
// are z-planes with x fastest.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> voxels;  // x fastest, then y, then z

    Image slice(int z) const;
};

Volume load_nifti(const std::filesystem::path& path);

}  // namespace ssae::data
