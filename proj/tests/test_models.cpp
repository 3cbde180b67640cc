#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "ssae/models.hpp"
#include "support/stubs.hpp"

using namespace ssae;
using models::EncoderDecoder;
using models::ModelConfig;
using models::ScaleSpaceModel;
using models::Variant;

namespace {

const Variant kVariants[] = {Variant::kDense, Variant::kSpatial, Variant::kVariational};

}  // namespace

TEST_CASE("forward output shape equals input shape") {
    for (Variant v : kVariants) {
        const EncoderDecoder m = EncoderDecoder::build(v, 16, {}, 7);
        const Image in = stubs::random_image(16, 16, 3);
        const Image out = m.reconstruct(in);
        CHECK(out.width() == 16);
        CHECK(out.height() == 16);
    }
}

TEST_CASE("input size preconditions") {
    CHECK_THROWS_AS(EncoderDecoder::build(Variant::kDense, 4, {}, 1), ConfigError);
    CHECK_THROWS_AS(EncoderDecoder::build(Variant::kDense, 12, {}, 1), ConfigError);
    const EncoderDecoder m = EncoderDecoder::build(Variant::kDense, 8, {}, 1);
    CHECK_THROWS_AS(m.reconstruct(stubs::random_image(16, 16, 1)), ShapeError);
}

TEST_CASE("parameter counts match across variants within 10 percent") {
    const ModelConfig cfg;
    for (int size : {8, 16, 32, 64}) {
        long counts[3];
        int i = 0;
        for (Variant v : kVariants) {
            const EncoderDecoder m = EncoderDecoder::build(v, size, cfg, 1);
            counts[i] = m.parameter_count();
            // Closed-form budget agrees with the built model.
            CHECK(counts[i] == models::parameter_count(v, size, cfg));
            ++i;
        }
        const long lo = *std::min_element(counts, counts + 3);
        const long hi = *std::max_element(counts, counts + 3);
        INFO("size ", size, ": counts ", counts[0], " ", counts[1], " ", counts[2]);
        CHECK(static_cast<double>(hi) / static_cast<double>(lo) <= 1.10);
    }
}

TEST_CASE("zero-initialized final layer reconstructs zero") {
    ModelConfig cfg;
    cfg.zero_init_final = true;
    for (Variant v : kVariants) {
        const EncoderDecoder m = EncoderDecoder::build(v, 16, cfg, 5);
        const Image out = m.reconstruct(stubs::random_image(16, 16, 9));
        CHECK(max_abs(out) == 0.0);
    }
}

TEST_CASE("variational inference uses the mean latent deterministically") {
    const EncoderDecoder m = EncoderDecoder::build(Variant::kVariational, 16, {}, 11);
    const Image in = stubs::random_image(16, 16, 2);
    const Image a = m.reconstruct(in);
    const Image b = m.reconstruct(in);
    CHECK(max_abs_diff(a, b) == 0.0);  // bitwise

    // With a sampler attached the latent is perturbed.
    ad::Graph g;
    Rng sampler(123);
    const auto nodes = m.forward(g, g.constant(in), &sampler);
    const Image sampled = g.value_as_image(nodes.output);
    CHECK(max_abs_diff(a, sampled) > 0.0);
    CHECK(nodes.mu >= 0);
    CHECK(nodes.logvar >= 0);
    CHECK(g.shape(nodes.mu) == g.shape(nodes.logvar));
}

TEST_CASE("level recursion with identity stubs reproduces the level images") {
    const auto kernel = pyramid::gaussian_kernel(0.99);
    const Image x = stubs::random_image(32, 32, 21);
    stubs::IdentityModel identity;
    const std::vector<const models::LevelModel*> ms = {&identity, &identity, &identity};

    const std::vector<Image> recon = models::reconstruct_levels(ms, kernel, x);
    const std::vector<Image> levels = pyramid::level_images(x, 2, kernel);
    REQUIRE(recon.size() == levels.size());
    for (std::size_t k = 0; k < recon.size(); ++k) {
        CHECK(max_abs_diff(recon[k], levels[k]) <= 1e-9);
    }
}

TEST_CASE("level recursion with zero stubs collapses to zero") {
    const auto kernel = pyramid::gaussian_kernel(0.99);
    const Image x = stubs::random_image(32, 32, 22);
    stubs::ZeroModel zero;
    const std::vector<const models::LevelModel*> ms = {&zero, &zero, &zero};
    for (const Image& r : models::reconstruct_levels(ms, kernel, x)) {
        CHECK(max_abs(r) == 0.0);
    }
}

TEST_CASE("corrupting only band 0 shifts only the finest reconstruction") {
    const auto kernel = pyramid::gaussian_kernel(0.99);
    const Image x = stubs::random_image(32, 32, 23);
    const double delta = 0.125;
    stubs::IdentityModel identity;
    stubs::OffsetModel corrupt(delta);
    const std::vector<const models::LevelModel*> ms = {&corrupt, &identity, &identity};

    const std::vector<Image> recon = models::reconstruct_levels(ms, kernel, x);
    const std::vector<Image> levels = pyramid::level_images(x, 2, kernel);
    for (std::size_t i = 0; i < recon[0].size(); ++i) {
        CHECK(recon[0][i] == doctest::Approx(levels[0][i] + delta).epsilon(1e-12));
    }
    CHECK(max_abs_diff(recon[1], levels[1]) <= 1e-12);
    CHECK(max_abs_diff(recon[2], levels[2]) <= 1e-12);
}

TEST_CASE("scale-space model construction and level sizes") {
    const ScaleSpaceModel m = ScaleSpaceModel::build(Variant::kDense, 64, 3, {}, 17);
    CHECK(m.levels() == 3);
    CHECK(m.model_count() == 4);
    CHECK(m.level_model(0).input_size() == 64);
    CHECK(m.level_model(1).input_size() == 32);
    CHECK(m.level_model(2).input_size() == 16);
    CHECK(m.level_model(3).input_size() == 8);
    for (int k = 0; k <= 3; ++k) CHECK_FALSE(m.is_trained(k));

    // Base below the minimum model size is rejected.
    CHECK_THROWS_AS(ScaleSpaceModel::build(Variant::kDense, 32, 3, {}, 1), ConfigError);
}

TEST_CASE("verbatim base when model_base is off") {
    ModelConfig cfg;
    cfg.model_base = false;
    cfg.zero_init_final = true;
    const ScaleSpaceModel m = ScaleSpaceModel::build(Variant::kDense, 32, 2, cfg, 3);
    CHECK(m.model_count() == 2);
    CHECK(m.is_trained(2));  // nothing to train for the copied base

    const Image x = stubs::random_image(32, 32, 4);
    const auto recon = m.reconstruct_levels(x);
    const auto levels = pyramid::level_images(x, 2, m.kernel());
    CHECK(max_abs_diff(recon[2], levels[2]) == 0.0);
}

TEST_CASE("bundle save and load round-trips the model") {
    const auto dir = std::filesystem::temp_directory_path() / "ssae_bundle_test";
    std::filesystem::remove_all(dir);

    const ScaleSpaceModel m = ScaleSpaceModel::build(Variant::kSpatial, 32, 2, {}, 99);
    m.save_bundle(dir);
    const ScaleSpaceModel loaded = ScaleSpaceModel::load_bundle(dir);

    CHECK(loaded.variant() == m.variant());
    CHECK(loaded.levels() == m.levels());
    CHECK(loaded.native_size() == m.native_size());
    const Image x = stubs::random_image(32, 32, 5);
    CHECK(max_abs_diff(loaded.reconstruct(x), m.reconstruct(x)) == 0.0);  // bitwise

    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(ScaleSpaceModel::load_bundle(dir), DataError);
}

TEST_CASE("matched baseline lands within 10 percent of the scale-space total") {
    const ModelConfig cfg;
    for (Variant v : kVariants) {
        const ScaleSpaceModel ssm = ScaleSpaceModel::build(v, 64, 3, cfg, 1);
        EncoderDecoder baseline = models::build_matched_baseline(v, 64, 3, cfg, 2);
        const double ratio = static_cast<double>(baseline.parameter_count()) /
                             static_cast<double>(ssm.total_parameter_count());
        INFO(models::variant_name(v), ": baseline ", baseline.parameter_count(), " vs ssae ",
             ssm.total_parameter_count());
        CHECK(ratio >= 0.9);
        CHECK(ratio <= 1.1);
        CHECK(baseline.input_size() == 64);
    }
}
