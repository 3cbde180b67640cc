#include "ssae/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ssae::data {

using nlohmann::json;

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const void* data, std::size_t size) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path.string() + " for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!f) throw DataError("write failed for " + path.string());
}

}  // namespace

void save_pgm(const std::filesystem::path& path, const Image& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) {
        throw ConfigError("save_pgm: bit depth must be 8 or 16");
    }
    const int maxval = bit_depth == 8 ? 255 : 65535;
    std::string header = "P5\n" + std::to_string(img.width()) + " " +
                         std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img[i], 0.0, 1.0);
        const int q = static_cast<int>(std::lround(v * maxval));
        if (bit_depth == 8) {
            bytes.push_back(static_cast<std::uint8_t>(q));
        } else {
            bytes.push_back(static_cast<std::uint8_t>(q >> 8));  // big-endian per PGM
            bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
        }
    }
    write_all(path, bytes.data(), bytes.size());
}

Image load_pgm(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_all(path);
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {  // comment runs to end of line
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto token = [&]() -> std::string {
        skip_ws();
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
        if (t.empty()) throw DataError("load_pgm: truncated header in " + path.string());
        return t;
    };
    if (token() != "P5") throw DataError("load_pgm: not a binary PGM: " + path.string());
    const int width = std::stoi(token());
    const int height = std::stoi(token());
    const int maxval = std::stoi(token());
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
        throw DataError("load_pgm: malformed header in " + path.string());
    }
    ++pos;  // single whitespace after maxval
    const bool wide = maxval > 255;
    const std::size_t need = static_cast<std::size_t>(width) * height * (wide ? 2 : 1);
    if (bytes.size() - pos < need) throw DataError("load_pgm: truncated pixels in " + path.string());
    Image img(width, height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        int q;
        if (wide) {
            q = (static_cast<int>(bytes[pos]) << 8) | bytes[pos + 1];
            pos += 2;
        } else {
            q = bytes[pos++];
        }
        img[i] = static_cast<double>(q) / maxval;
    }
    return img;
}

void save_raw_f64(const std::filesystem::path& path, const Image& img,
                  const std::string& provenance, std::optional<double> threshold) {
    write_all(path, img.data().data(), img.size() * sizeof(double));
    json sidecar;
    sidecar["width"] = img.width();
    sidecar["height"] = img.height();
    sidecar["dtype"] = "f64le";
    if (!provenance.empty()) sidecar["provenance"] = provenance;
    if (threshold.has_value()) sidecar["threshold"] = *threshold;
    std::ofstream f(path.string() + ".json");
    if (!f) throw DataError("cannot write sidecar for " + path.string());
    f << sidecar.dump(2) << "\n";
}

Image load_raw_f64(const std::filesystem::path& path, RawSidecar* out_sidecar) {
    std::ifstream sf(path.string() + ".json");
    if (!sf) throw DataError("missing sidecar " + path.string() + ".json");
    json sidecar;
    try {
        sf >> sidecar;
    } catch (const json::exception& e) {
        throw DataError("malformed sidecar for " + path.string() + ": " + e.what());
    }
    const int width = sidecar.at("width").get<int>();
    const int height = sidecar.at("height").get<int>();
    const std::vector<std::uint8_t> bytes = read_all(path);
    const std::size_t expect = static_cast<std::size_t>(width) * height * sizeof(double);
    if (bytes.size() != expect) {
        throw DataError("raw dump " + path.string() + " has " + std::to_string(bytes.size()) +
                        " bytes, expected " + std::to_string(expect));
    }
    Image img(width, height);
    std::memcpy(img.data().data(), bytes.data(), expect);
    if (out_sidecar != nullptr) {
        out_sidecar->width = width;
        out_sidecar->height = height;
        out_sidecar->provenance = sidecar.value("provenance", "");
        if (sidecar.contains("threshold")) {
            out_sidecar->threshold = sidecar.at("threshold").get<double>();
        }
    }
    return img;
}

Image Volume::slice(int z) const {
    if (z < 0 || z >= nz) throw ShapeError("Volume::slice: z out of range");
    Image img(nx, ny);
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    std::copy_n(voxels.begin() + static_cast<std::ptrdiff_t>(plane * z), plane,
                img.data().begin());
    return img;
}

Volume load_nifti(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_all(path);
    if (bytes.size() < 352) throw DataError("nifti: file too short: " + path.string());

    auto i32 = [&bytes](std::size_t off) {
        std::int32_t v;
        std::memcpy(&v, bytes.data() + off, 4);
        return v;
    };
    auto i16 = [&bytes](std::size_t off) {
        std::int16_t v;
        std::memcpy(&v, bytes.data() + off, 2);
        return v;
    };
    auto f32 = [&bytes](std::size_t off) {
        float v;
        std::memcpy(&v, bytes.data() + off, 4);
        return v;
    };

    if (i32(0) != 348) {
        throw DataError("nifti: unexpected header size (big-endian files are unsupported)");
    }
    const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
    if (std::strncmp(magic, "n+1", 3) != 0 && std::strncmp(magic, "ni1", 3) != 0) {
        throw DataError("nifti: bad magic");
    }
    const int ndim = i16(40);
    if (ndim < 2 || ndim > 7) throw DataError("nifti: unsupported dim[0]=" + std::to_string(ndim));
    Volume vol;
    vol.nx = i16(42);
    vol.ny = i16(44);
    vol.nz = ndim >= 3 ? std::max<int>(1, i16(46)) : 1;
    if (vol.nx < 1 || vol.ny < 1) throw DataError("nifti: malformed dimensions");

    const int datatype = i16(70);
    double slope = f32(112);
    const double inter = f32(116);
    if (slope == 0.0) slope = 1.0;
    const std::size_t offset = static_cast<std::size_t>(f32(108));
    const std::size_t count = static_cast<std::size_t>(vol.nx) * vol.ny * vol.nz;

    std::size_t elem;
    switch (datatype) {
        case 2: elem = 1; break;   // uint8
        case 4: elem = 2; break;   // int16
        case 16: elem = 4; break;  // float32
        default:
            throw DataError("nifti: unsupported datatype " + std::to_string(datatype) +
                            " (only uint8, int16, float32)");
    }
    if (offset < 348 || bytes.size() < offset + count * elem) {
        throw DataError("nifti: voxel data truncated");
    }

    vol.voxels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        double raw;
        switch (datatype) {
            case 2:
                raw = bytes[offset + i];
                break;
            case 4: {
                std::int16_t v;
                std::memcpy(&v, bytes.data() + offset + 2 * i, 2);
                raw = v;
                break;
            }
            default: {
                float v;
                std::memcpy(&v, bytes.data() + offset + 4 * i, 4);
                raw = v;
                break;
            }
        }
        vol.voxels[i] = slope * raw + inter;
    }
    return vol;
}

}  // namespace ssae::data
