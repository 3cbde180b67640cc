#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ssae/metrics.hpp"
#include "ssae/rng.hpp"
#include "support/oracles.hpp"

using namespace ssae;

namespace {

struct Instance {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

// Random pixel-score instances; a coarse score grid exercises tie handling.
Instance random_instance(std::size_t n, int distinct, double pos_rate, std::uint64_t seed) {
    Rng rng(seed);
    Instance inst;
    inst.scores.reserve(n);
    inst.labels.reserve(n);
    bool has_pos = false;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = rng.uniform() < pos_rate;
        has_pos |= pos;
        inst.labels.push_back(pos ? 1 : 0);
        double s = rng.uniform();
        if (pos) s = std::min(1.0, s + rng.uniform(0.0, 0.5));  // informative but noisy
        if (distinct > 0) s = std::round(s * distinct) / distinct;
        inst.scores.push_back(s);
    }
    if (!has_pos) inst.labels[0] = 1;
    return inst;
}

}  // namespace

TEST_CASE("pr curve on perfect and degenerate rankings") {
    // Scores identical to labels.
    const auto perfect = metrics::pr_curve({1, 0, 1, 0, 1}, {1, 0, 1, 0, 1});
    CHECK(perfect.auprc == doctest::Approx(1.0).epsilon(1e-15));

    // All labels positive: precision is 1 at every cut.
    const auto allpos = metrics::pr_curve({0.9, 0.1, 0.5}, {1, 1, 1});
    CHECK(allpos.auprc == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(metrics::pr_curve({0.5, 0.1}, {0, 0}), DataError);
    CHECK_THROWS_AS(metrics::pr_curve({0.5}, {1, 0}), ShapeError);
}

TEST_CASE("pr curve hand-checked example") {
    // cuts: 0.9 -> P=1, R=1/2; 0.8 -> P=1/2; 0.7 -> P=2/3, R=1; 0.6 -> P=1/2
    // AUPRC = 0.5 * 1 + 0 + 0.5 * 2/3 + 0 = 5/6
    const auto curve = metrics::pr_curve({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0});
    CHECK(curve.auprc == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(curve.auprc ==
          doctest::Approx(oracle::auprc_bruteforce({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}))
              .epsilon(1e-15));
    REQUIRE(curve.points.size() == 4);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].recall >= curve.points[i - 1].recall);
    }
}

TEST_CASE("tied scores share one cut point") {
    const std::vector<double> scores = {0.5, 0.5, 0.5, 0.2, 0.2};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0, 1};
    const auto curve = metrics::pr_curve(scores, labels);
    CHECK(curve.points.size() == 2);  // two distinct values
    CHECK(curve.auprc == doctest::Approx(oracle::auprc_bruteforce(scores, labels)).epsilon(1e-15));
}

TEST_CASE("pr curve equals the brute-force oracle on random instances") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const std::size_t n = 64 + (seed % 4) * 251;
        const int distinct = seed % 3 == 0 ? 0 : 40;
        const Instance inst = random_instance(n, distinct, 0.15, 1000 + seed);
        const auto curve = metrics::pr_curve(inst.scores, inst.labels);
        const double ref = oracle::auprc_bruteforce(inst.scores, inst.labels);
        CHECK(std::abs(curve.auprc - ref) <= 1e-12);
        CHECK(curve.auprc >= 0.0);
        CHECK(curve.auprc <= 1.0);
    }
}

TEST_CASE("auprc is invariant under strictly increasing score transforms") {
    const Instance inst = random_instance(512, 25, 0.2, 77);
    std::vector<double> warped = inst.scores;
    for (double& s : warped) s = std::exp(3.0 * s);  // strictly increasing
    CHECK(metrics::pr_curve(inst.scores, inst.labels).auprc ==
          doctest::Approx(metrics::pr_curve(warped, inst.labels).auprc).epsilon(1e-12));
}

TEST_CASE("dice examples") {
    Image a(4, 1, {1, 1, 0, 0});
    Image b(4, 1, {1, 1, 0, 0});
    CHECK(metrics::dice(a, b) == 1.0);

    Image disjoint(4, 1, {0, 0, 1, 1});
    CHECK(metrics::dice(a, disjoint) == 0.0);

    // |A| = 4, |B| = 4, overlap 2 -> 0.5
    Image m1(8, 1, {1, 1, 1, 1, 0, 0, 0, 0});
    Image m2(8, 1, {0, 0, 1, 1, 1, 1, 0, 0});
    CHECK(metrics::dice(m1, m2) == 0.5);
    CHECK(metrics::dice(m2, m1) == 0.5);  // symmetric

    CHECK(metrics::dice(Image(4, 1, 0.0), Image(4, 1, 0.0)) == 1.0);  // both empty
    CHECK_THROWS_AS(metrics::dice(Image(4, 1, 0.0), Image(5, 1, 0.0)), ShapeError);
}

TEST_CASE("ceiling dice on exact scores") {
    const std::vector<double> scores = {1, 0, 1, 0};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0};
    const auto [best, threshold] = metrics::ceiling_dice(scores, labels);
    CHECK(best == 1.0);
    // mask = scores > 0 reproduces the ground truth exactly.
    CHECK(threshold == 0.0);
}

TEST_CASE("ceiling dice ties resolve to the lowest threshold") {
    // Both candidate thresholds give dice 0; the lower one is reported.
    const auto [best, threshold] = metrics::ceiling_dice({2.0, 1.0}, {0, 1});
    CHECK(best == 0.0);
    CHECK(threshold == 1.0);
}

TEST_CASE("ceiling dice dominates the even-sweep oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance inst = random_instance(400 + seed * 97, seed % 2 ? 30 : 0, 0.2, 500 + seed);
        const auto [best, threshold] = metrics::ceiling_dice(inst.scores, inst.labels);
        const double sweep = oracle::ceiling_dice_sweep(inst.scores, inst.labels, 10000);
        CHECK(best >= sweep - 1e-12);
        CHECK(std::abs(best - sweep) <= 1e-12);  // sweep includes the distinct values
        // The returned threshold reproduces the reported maximum.
        CHECK(oracle::pooled_dice_at(inst.scores, inst.labels, threshold) ==
              doctest::Approx(best).epsilon(1e-15));
    }
}

TEST_CASE("ceiling dice is at least the dice at any fixed threshold") {
    const Instance inst = random_instance(600, 20, 0.25, 99);
    const auto [best, threshold] = metrics::ceiling_dice(inst.scores, inst.labels);
    Rng rng(5);
    for (int i = 0; i < 25; ++i) {
        CHECK(best >= oracle::pooled_dice_at(inst.scores, inst.labels, rng.uniform()) - 1e-15);
    }
}

TEST_CASE("ceiling dice is rank-based") {
    const Instance inst = random_instance(300, 15, 0.2, 31);
    std::vector<double> warped = inst.scores;
    for (double& s : warped) s = s * s * s + 2.0 * s;  // strictly increasing
    CHECK(metrics::ceiling_dice(inst.scores, inst.labels).first ==
          doctest::Approx(metrics::ceiling_dice(warped, inst.labels).first).epsilon(1e-12));
}

TEST_CASE("reconstruction error statistics") {
    std::vector<Image> inputs, recons;
    for (std::uint64_t i = 0; i < 6; ++i) {
        Image x(8, 8);
        Rng rng(i + 1);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = rng.uniform();
        inputs.push_back(x);
        recons.push_back(x);
    }
    const auto perfect = metrics::recon_error_stats(inputs, recons);
    CHECK(perfect.mean == 0.0);
    CHECK(perfect.median == 0.0);
    CHECK(perfect.q1 == 0.0);
    CHECK(perfect.q3 == 0.0);

    // Constant offset delta -> every statistic is |delta|.
    const double delta = -0.125;
    std::vector<Image> shifted = inputs;
    for (Image& img : shifted) {
        for (std::size_t j = 0; j < img.size(); ++j) img[j] += delta;
    }
    const auto offset = metrics::recon_error_stats(inputs, shifted);
    CHECK(offset.mean == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(offset.median == doctest::Approx(0.125).epsilon(1e-12));

    // Mixed corpus against a direct recomputation.
    std::vector<Image> noisy = inputs;
    Rng rng(77);
    for (Image& img : noisy) {
        for (std::size_t j = 0; j < img.size(); ++j) img[j] += rng.uniform(-0.2, 0.2);
    }
    const auto stats = metrics::recon_error_stats(inputs, noisy);
    std::vector<double> per_image;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            acc += std::abs(inputs[i][j] - noisy[i][j]);
        }
        per_image.push_back(acc / static_cast<double>(inputs[i].size()));
    }
    double mean = 0.0;
    for (double v : per_image) mean += v;
    mean /= static_cast<double>(per_image.size());
    CHECK(stats.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(stats.per_image_mean.size() == per_image.size());
    for (std::size_t i = 0; i < per_image.size(); ++i) {
        CHECK(stats.per_image_mean[i] == doctest::Approx(per_image[i]).epsilon(1e-14));
    }
    CHECK(stats.q1 <= stats.median);
    CHECK(stats.median <= stats.q3);

    CHECK_THROWS_AS(metrics::recon_error_stats({}, {}), DataError);
}

TEST_CASE("quantile uses linear interpolation of order statistics") {
    std::vector<double> values;
    for (int i = 1; i <= 100; ++i) values.push_back(i);
    CHECK(metrics::quantile(values, 0.98) == doctest::Approx(98.02).epsilon(1e-12));
    CHECK(metrics::quantile(values, 0.0) == 1.0);
    CHECK(metrics::quantile(values, 1.0) == 100.0);
    CHECK(metrics::quantile({3.0}, 0.5) == 3.0);
}
