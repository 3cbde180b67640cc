#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ssae/image_io.hpp"
#include "ssae/manifest.hpp"
#include "ssae/synth.hpp"
#include "support/stubs.hpp"

using namespace ssae;
using data::AnomalyKind;
using data::Sample;
using data::SynthConfig;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("ssae_data_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("phantoms are deterministic by seed") {
    SynthConfig cfg;
    cfg.size = 64;
    cfg.seed = 1234;
    const Sample a = data::synth_healthy(cfg);
    const Sample b = data::synth_healthy(cfg);
    CHECK(a.image.data() == b.image.data());  // bitwise

    cfg.seed = 1235;
    const Sample c = data::synth_healthy(cfg);
    CHECK(a.image.data() != c.image.data());
}

TEST_CASE("phantom background is exactly zero and tissue is in range") {
    SynthConfig cfg;
    cfg.size = 64;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cfg.seed = seed;
        const Sample s = data::synth_healthy(cfg);
        CHECK_FALSE(s.gt_mask.has_value());
        std::size_t tissue = 0;
        for (std::size_t i = 0; i < s.image.size(); ++i) {
            const double v = s.image[i];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            tissue += (v != 0.0);
        }
        // Tissue fraction stays inside the configured ellipse-area bounds.
        const double fraction =
            static_cast<double>(tissue) / static_cast<double>(s.image.size());
        CHECK(fraction >= cfg.ellipse_area_lo * 0.95);
        CHECK(fraction <= cfg.ellipse_area_hi * 1.05);
    }
}

TEST_CASE("kind none leaves the sample untouched") {
    SynthConfig cfg;
    cfg.size = 32;
    cfg.seed = 5;
    const Sample healthy = data::synth_healthy(cfg);
    cfg.anomaly = AnomalyKind::kNone;
    const Sample same = data::inject_anomaly(healthy, cfg);
    CHECK(same.image.data() == healthy.image.data());
    CHECK_FALSE(same.gt_mask.has_value());
}

TEST_CASE("small-multifocal injection marks exactly the strong changes") {
    SynthConfig cfg;
    cfg.size = 64;
    cfg.anomaly = AnomalyKind::kSmallMultifocal;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        cfg.seed = seed * 31 + 7;
        const Sample healthy = data::synth_healthy(cfg);
        const Sample sick = data::inject_anomaly(healthy, cfg);
        REQUIRE(sick.gt_mask.has_value());
        CHECK(sick.meta.kind == AnomalyKind::kSmallMultifocal);

        std::size_t gt_count = 0;
        for (std::size_t i = 0; i < sick.image.size(); ++i) {
            const double change = sick.image[i] - healthy.image[i];
            CHECK(change >= 0.0);   // hyperintense only
            CHECK(sick.image[i] <= 1.0);  // overlapping blobs still clamp
            const bool marked = (*sick.gt_mask)[i] != 0.0;
            CHECK(marked == (change > 0.5 * cfg.anomaly_delta));
            if (healthy.image[i] == 0.0) CHECK(change == 0.0);  // background untouched
            gt_count += marked;
        }
        CHECK(gt_count >= 1);  // gt nonempty iff anomaly injected
        // 1..8 blobs of radius <= 4: bounded lesion load.
        CHECK(gt_count <= 8 * 60);
    }
}

TEST_CASE("large-homogeneous injection covers the requested disk") {
    SynthConfig cfg;
    cfg.size = 64;
    cfg.anomaly = AnomalyKind::kLargeHomogeneous;
    cfg.region_radius_lo = 8.0;
    cfg.region_radius_hi = 10.0;
    cfg.seed = 3;
    const Sample healthy = data::synth_healthy(cfg);
    const Sample sick = data::inject_anomaly(healthy, cfg);
    REQUIRE(sick.gt_mask.has_value());
    std::size_t gt_count = 0;
    for (std::size_t i = 0; i < sick.gt_mask->size(); ++i) gt_count += (*sick.gt_mask)[i] != 0.0;
    // Flat bump of delta: the whole disk ends above delta/2, so the count
    // recovers the disk area (up to clamping at image intensity 1).
    CHECK(gt_count >= static_cast<std::size_t>(3.14159 * 8 * 8 * 0.85));
    CHECK(gt_count <= static_cast<std::size_t>(3.14159 * 10 * 10 * 1.15));
}

TEST_CASE("impossible placements raise a data error") {
    SynthConfig cfg;
    cfg.size = 64;
    cfg.anomaly = AnomalyKind::kLargeHomogeneous;
    cfg.region_radius_lo = 30.0;  // cannot fit inside any admissible ellipse
    cfg.region_radius_hi = 30.0;
    cfg.seed = 1;
    const Sample healthy = data::synth_healthy(cfg);
    CHECK_THROWS_AS(data::inject_anomaly(healthy, cfg), DataError);
}

TEST_CASE("98th-percentile normalization") {
    // Values 1..100: p98 = 98.02 by linear interpolation, 50 -> 0.5101...
    Image img(10, 10);
    for (int i = 0; i < 100; ++i) img[i] = i + 1.0;
    CHECK(data::nonzero_percentile(img, 98.0) == doctest::Approx(98.02).epsilon(1e-12));
    const Image norm = data::normalize_p98(img);
    CHECK(norm[49] == doctest::Approx(50.0 / 98.02).epsilon(1e-12));
    for (std::size_t i = 0; i < norm.size(); ++i) {
        CHECK(norm[i] >= 0.0);
        CHECK(norm[i] <= 1.0);
    }
    CHECK(norm[98] == 1.0);  // 99 > p98 clips
    CHECK(norm[99] == 1.0);

    // Constant nonzero image maps to all ones.
    const Image constant = data::normalize_p98(Image(4, 4, 0.35));
    for (std::size_t i = 0; i < constant.size(); ++i) CHECK(constant[i] == 1.0);

    // Zeros are excluded from the percentile and stay zero.
    Image masked(4, 4, 0.0);
    masked.at(0, 0) = 2.0;
    masked.at(1, 0) = 4.0;
    const Image mnorm = data::normalize_p98(masked);
    CHECK(mnorm.at(3, 3) == 0.0);
    CHECK(mnorm.at(1, 0) == 1.0);

    CHECK_THROWS_AS(data::normalize_p98(Image(4, 4, 0.0)), DataError);
}

TEST_CASE("slice filter keeps slices with enough tissue") {
    const int n = 1000;  // 1000 pixels per slice at 40x25
    Image empty(40, 25, 0.0);
    Image full(40, 25, 0.5);
    Image below(40, 25, 0.0);
    for (int i = 0; i < n * 49 / 1000; ++i) below[i] = 0.7;  // 4.9%
    Image above(40, 25, 0.0);
    for (int i = 0; i < n * 51 / 1000; ++i) above[i] = 0.7;  // 5.1%

    const auto kept = data::slice_filter({empty, full, below, above}, 0.05);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].data() == full.data());
    CHECK(kept[1].data() == above.data());
}

TEST_CASE("pgm round trip within quantization error") {
    const auto dir = temp_dir("pgm");
    const Image img = stubs::random_image(17, 9, 3);

    data::save_pgm(dir / "x16.pgm", img, 16);
    const Image r16 = data::load_pgm(dir / "x16.pgm");
    CHECK(r16.width() == img.width());
    CHECK(max_abs_diff(r16, img) <= 0.5 / 65535.0 + 1e-12);

    data::save_pgm(dir / "x8.pgm", img, 8);
    const Image r8 = data::load_pgm(dir / "x8.pgm");
    CHECK(max_abs_diff(r8, img) <= 0.5 / 255.0 + 1e-12);

    CHECK_THROWS_AS(data::save_pgm(dir / "bad.pgm", img, 12), ConfigError);
    std::ofstream(dir / "junk.pgm") << "P6 2 2 255 ....";
    CHECK_THROWS_AS(data::load_pgm(dir / "junk.pgm"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("raw f64 dumps round trip bitwise with sidecar metadata") {
    const auto dir = temp_dir("raw");
    Image img = stubs::random_image(12, 7, 9);
    img[0] = 0.1 + 0.2;
    img[1] = -0.0;

    data::save_raw_f64(dir / "map.f64", img, "level_2", 0.125);
    data::RawSidecar sidecar;
    const Image back = data::load_raw_f64(dir / "map.f64", &sidecar);
    CHECK(back.data() == img.data());  // bitwise
    CHECK(sidecar.provenance == "level_2");
    CHECK(sidecar.threshold.has_value());
    CHECK(*sidecar.threshold == 0.125);

    CHECK_THROWS_AS(data::load_raw_f64(dir / "missing.f64"), DataError);
    std::filesystem::remove_all(dir);
}

namespace {

// Hand-built single-file NIfTI-1 with 4 bytes of padding after the header.
std::vector<std::uint8_t> nifti_fixture(int nx, int ny, int nz, std::int16_t datatype,
                                        float slope, float inter,
                                        const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> bytes(352, 0);
    auto put_i32 = [&](std::size_t off, std::int32_t v) { std::memcpy(&bytes[off], &v, 4); };
    auto put_i16 = [&](std::size_t off, std::int16_t v) { std::memcpy(&bytes[off], &v, 2); };
    auto put_f32 = [&](std::size_t off, float v) { std::memcpy(&bytes[off], &v, 4); };
    put_i32(0, 348);
    put_i16(40, 3);  // dim[0]
    put_i16(42, static_cast<std::int16_t>(nx));
    put_i16(44, static_cast<std::int16_t>(ny));
    put_i16(46, static_cast<std::int16_t>(nz));
    put_i16(70, datatype);
    put_f32(108, 352.0f);  // vox_offset
    put_f32(112, slope);
    put_f32(116, inter);
    std::memcpy(&bytes[344], "n+1\0", 4);
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    return bytes;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("nifti fixture decodes to exact voxel values") {
    const auto dir = temp_dir("nifti");

    // int16 with slope/intercept.
    std::vector<std::int16_t> vox = {-3, 0, 7, 100, -100, 32000, 5, 6, 1, 2, 3, 4};
    std::vector<std::uint8_t> payload(vox.size() * 2);
    std::memcpy(payload.data(), vox.data(), payload.size());
    write_bytes(dir / "i16.nii", nifti_fixture(3, 2, 2, 4, 0.5f, 10.0f, payload));
    const data::Volume v = data::load_nifti(dir / "i16.nii");
    CHECK(v.nx == 3);
    CHECK(v.ny == 2);
    CHECK(v.nz == 2);
    for (std::size_t i = 0; i < vox.size(); ++i) {
        CHECK(v.voxels[i] == doctest::Approx(0.5 * vox[i] + 10.0).epsilon(1e-12));
    }
    const Image slice1 = v.slice(1);
    CHECK(slice1.width() == 3);
    CHECK(slice1.height() == 2);
    CHECK(slice1.at(0, 0) == v.voxels[6]);

    // uint8, slope 0 treated as identity.
    write_bytes(dir / "u8.nii", nifti_fixture(2, 2, 1, 2, 0.0f, 0.0f, {0, 128, 255, 7}));
    const data::Volume v8 = data::load_nifti(dir / "u8.nii");
    CHECK(v8.voxels == std::vector<double>{0, 128, 255, 7});

    // float32 passthrough.
    std::vector<float> fvox = {0.25f, -1.5f, 3e5f, 0.0f};
    std::vector<std::uint8_t> fpayload(fvox.size() * 4);
    std::memcpy(fpayload.data(), fvox.data(), fpayload.size());
    write_bytes(dir / "f32.nii", nifti_fixture(2, 2, 1, 16, 1.0f, 0.0f, fpayload));
    const data::Volume vf = data::load_nifti(dir / "f32.nii");
    for (std::size_t i = 0; i < fvox.size(); ++i) {
        CHECK(vf.voxels[i] == static_cast<double>(fvox[i]));
    }

    // Unsupported datatype and malformed headers are rejected.
    write_bytes(dir / "bad_dtype.nii", nifti_fixture(2, 2, 1, 64, 1.0f, 0.0f, payload));
    CHECK_THROWS_AS(data::load_nifti(dir / "bad_dtype.nii"), DataError);
    auto truncated = nifti_fixture(4, 4, 4, 2, 1.0f, 0.0f, {1, 2, 3});
    write_bytes(dir / "trunc.nii", truncated);
    CHECK_THROWS_AS(data::load_nifti(dir / "trunc.nii"), DataError);
    auto badmagic = nifti_fixture(2, 2, 1, 2, 1.0f, 0.0f, {1, 2, 3, 4});
    badmagic[344] = 'x';
    write_bytes(dir / "badmagic.nii", badmagic);
    CHECK_THROWS_AS(data::load_nifti(dir / "badmagic.nii"), DataError);

    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest round trip and dataset loading") {
    const auto dir = temp_dir("manifest");
    SynthConfig cfg;
    cfg.size = 16;

    data::Manifest manifest;
    for (int i = 0; i < 3; ++i) {
        cfg.seed = 100 + i;
        cfg.anomaly = i == 2 ? AnomalyKind::kSmallMultifocal : AnomalyKind::kNone;
        Sample s = data::synth_healthy(cfg);
        if (cfg.anomaly != AnomalyKind::kNone) s = data::inject_anomaly(s, cfg);
        const std::string name = "img_" + std::to_string(i) + ".f64";
        data::save_raw_f64(dir / name, s.image, "input");
        data::ManifestEntry e;
        e.path = name;
        e.seed = cfg.seed;
        e.kind = cfg.anomaly;
        if (s.gt_mask.has_value()) {
            const std::string gt_name = "img_" + std::to_string(i) + "_gt.f64";
            data::save_raw_f64(dir / gt_name, *s.gt_mask, "gt");
            e.gt_path = gt_name;
        }
        manifest.entries.push_back(std::move(e));
    }
    data::save_manifest(dir / "manifest.json", manifest);

    const data::Manifest loaded = data::load_manifest(dir / "manifest.json");
    REQUIRE(loaded.entries.size() == 3);
    CHECK(loaded.entries[2].kind == AnomalyKind::kSmallMultifocal);
    CHECK(loaded.entries[2].gt_path.has_value());
    CHECK(loaded.entries[0].seed == 100);

    const data::LoadedDataset ds = data::load_dataset(dir / "manifest.json");
    REQUIRE(ds.images.size() == 3);
    CHECK(ds.images[0].width() == 16);
    CHECK_FALSE(ds.masks[0].has_value());
    REQUIRE(ds.masks[2].has_value());
    CHECK(ds.masks[2]->width() == 16);

    std::filesystem::remove_all(dir);
}
