#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ssae/adam.hpp"
#include "ssae/autodiff.hpp"
#include "ssae/checkpoint.hpp"
#include "support/grad_check.hpp"
#include "support/oracles.hpp"

using namespace ssae;
using ad::Graph;
using ad::Tensor;
using gradcheck::check_graph;
using gradcheck::random_tensor;
using gradcheck::random_tensor_signed;

namespace {
constexpr double kGradTol = 1e-4;
}

TEST_CASE("matmul against identity and shape checks") {
    Graph g;
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.values[i * 3 + i] = 1.0;
    const Tensor x = random_tensor({3, 2}, 1);
    const int out = g.matmul(g.param(eye), g.param(x));
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        CHECK(g.value(out)[i] == x.values[i]);
    }
    Graph g2;
    CHECK_THROWS_AS(g2.matmul(g2.param(random_tensor({3, 2}, 1)),
                              g2.param(random_tensor({3, 2}, 2))),
                    ShapeError);
}

TEST_CASE("conv2d preserves constants under reflect padding") {
    // Kernel summing to s maps constant c to constant s*c, boundary included.
    Graph g;
    const Tensor x(ad::Shape{1, 1, 6, 6}, std::vector<double>(36, 0.5));
    Tensor w = random_tensor({1, 1, 3, 3}, 3);
    double wsum = 0.0;
    for (double v : w.values) wsum += v;
    const int out = g.conv2d(g.constant(x.shape, x.values), g.param(w), 1,
                             ad::Padding::kSameReflect);
    for (double v : g.value(out)) {
        CHECK(v == doctest::Approx(wsum * 0.5).epsilon(1e-12));
    }
}

TEST_CASE("conv2d valid matches the nested-loop oracle on a ramp") {
    // 5x5 ramp, 3x3 kernel, valid padding.
    Tensor x = Tensor::zeros({1, 1, 5, 5});
    for (int i = 0; i < 25; ++i) x.values[i] = i * 0.1;
    const Tensor w = random_tensor({1, 1, 3, 3}, 7);

    Graph g;
    const int out = g.conv2d(g.param(x), g.param(w), 1, ad::Padding::kValid);
    CHECK(g.shape(out) == ad::Shape{1, 1, 3, 3});
    const auto ref = oracle::conv2d_valid_loops(x.values, 5, 5, w.values, 3, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(g.value(out)[i] == doctest::Approx(ref[i]).epsilon(1e-13));
    }
}

TEST_CASE("conv2d stride-2 output geometry") {
    Graph g;
    const int out = g.conv2d(g.param(random_tensor({2, 3, 8, 8}, 1)),
                             g.param(random_tensor({4, 3, 3, 3}, 2)), 2,
                             ad::Padding::kSameReflect);
    CHECK(g.shape(out) == ad::Shape{2, 4, 4, 4});
}

TEST_CASE("mse examples") {
    const Tensor a = random_tensor({2, 3}, 11);
    Tensor b = a;
    Graph g;
    CHECK(g.scalar(g.mse(g.param(a), g.param(b))) == 0.0);

    for (double& v : b.values) v += 0.25;
    Graph g2;
    CHECK(g2.scalar(g2.mse(g2.param(b), g2.param(a))) == doctest::Approx(0.0625).epsilon(1e-12));

    // Hand-computed 4-element pair.
    const Tensor p(ad::Shape{4}, {1.0, -0.5, 2.0, 0.0});
    const Tensor t(ad::Shape{4}, {0.5, 0.5, 1.0, -1.0});
    // diffs: 0.5, -1.0, 1.0, 1.0 -> squares: 0.25, 1, 1, 1 -> mean = 0.8125
    Graph g3;
    CHECK(g3.scalar(g3.mse(g3.param(p), g3.param(t))) == doctest::Approx(0.8125).epsilon(1e-14));

    Graph g4;
    CHECK_THROWS_AS(g4.mse(g4.param(random_tensor({2}, 1)), g4.param(random_tensor({3}, 2))),
                    ShapeError);
}

TEST_CASE("gaussian kl examples") {
    Graph g;
    const Tensor zero = Tensor::zeros({4});
    CHECK(g.scalar(g.gaussian_kl(g.param(zero), g.param(zero))) == 0.0);

    Graph g2;
    const Tensor mu(ad::Shape{1}, {1.0});
    const Tensor lv(ad::Shape{1}, {0.0});
    CHECK(g2.scalar(g2.gaussian_kl(g2.param(mu), g2.param(lv))) ==
          doctest::Approx(0.5).epsilon(1e-14));

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Graph g3;
        const int kl = g3.gaussian_kl(g3.param(random_tensor({6}, seed * 2 + 1)),
                                      g3.param(random_tensor({6}, seed * 2 + 2)));
        CHECK(g3.scalar(kl) >= 0.0);
    }
}

TEST_CASE("backward of a plain sum is all ones") {
    const Tensor p = random_tensor({3, 4}, 5);
    Graph g;
    const int id = g.param(p);
    const int loss = g.sum(id);
    g.backward(loss);
    for (double v : g.grad(id)) CHECK(v == 1.0);
}

TEST_CASE("no double counting on a diamond graph") {
    // b = 2x, c = x*x, d = b + c, loss = sum(d): dloss/dx = 2 + 2x.
    const Tensor x(ad::Shape{1}, {3.0});
    Graph g;
    const int xid = g.param(x);
    const int d = g.add(g.scale(xid, 2.0), g.mul(xid, xid));
    const int loss = g.sum(d);
    g.backward(loss);
    CHECK(g.grad(xid)[0] == doctest::Approx(8.0).epsilon(1e-14));

    // y = x + x doubles the gradient.
    Graph g2;
    const int x2 = g2.param(x);
    const int loss2 = g2.sum(g2.add(x2, x2));
    g2.backward(loss2);
    CHECK(g2.grad(x2)[0] == 2.0);
}

TEST_CASE("backward rejects non-scalar losses") {
    Graph g;
    const int p = g.param(random_tensor({2, 2}, 1));
    CHECK_THROWS_AS(g.backward(p), ContractError);
}

TEST_CASE("finite differences: elementwise and reduction ops") {
    auto two = [](std::uint64_t s) {
        return std::vector<Tensor>{random_tensor({3, 4}, s), random_tensor({3, 4}, s + 1)};
    };
    CHECK(check_graph([](Graph& g, const std::vector<int>& p) { return g.sum(g.add(p[0], p[1])); },
                      two(10), 10, 1).max_rel_error < kGradTol);
    CHECK(check_graph([](Graph& g, const std::vector<int>& p) { return g.mean(g.sub(p[0], p[1])); },
                      two(20), 10, 2).max_rel_error < kGradTol);
    CHECK(check_graph([](Graph& g, const std::vector<int>& p) { return g.sum(g.mul(p[0], p[1])); },
                      two(30), 10, 3).max_rel_error < kGradTol);
    CHECK(check_graph([](Graph& g, const std::vector<int>& p) { return g.sum(g.scale(p[0], -1.7)); },
                      {random_tensor({5}, 40)}, 5, 4).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) { return g.mse(g.exp(p[0]), p[1]); },
              two(50), 10, 5).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) { return g.mse(g.sigmoid(p[0]), p[1]); },
              two(60), 10, 6).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.sum(g.leaky_relu(p[0], 0.1));
              },
              {random_tensor_signed({4, 5}, 70)}, 10, 7).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mse(g.reshape(p[0], {2, 6}), p[1]);
              },
              {random_tensor({3, 4}, 80), random_tensor({2, 6}, 81)}, 10, 8).max_rel_error <
          kGradTol);
}

TEST_CASE("finite differences: matmul, bias, kl") {
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mse(g.matmul(p[0], p[1]), p[2]);
              },
              {random_tensor({3, 4}, 90), random_tensor({4, 2}, 91), random_tensor({3, 2}, 92)},
              10, 9).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mean(g.bias_add(p[0], p[1]));
              },
              {random_tensor({2, 3, 2, 2}, 100), random_tensor({3}, 101)}, 10, 10).max_rel_error <
          kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.gaussian_kl(p[0], p[1]);
              },
              {random_tensor({2, 4}, 110), random_tensor({2, 4}, 111)}, 10, 11).max_rel_error <
          kGradTol);
}

TEST_CASE("finite differences: convolution and upsampling") {
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mse(g.conv2d(p[0], p[1], 1, ad::Padding::kSameReflect), p[2]);
              },
              {random_tensor({1, 2, 5, 5}, 120), random_tensor({3, 2, 3, 3}, 121),
               random_tensor({1, 3, 5, 5}, 122)},
              10, 12).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mse(g.conv2d(p[0], p[1], 2, ad::Padding::kSameReflect), p[2]);
              },
              {random_tensor({1, 2, 6, 6}, 130), random_tensor({2, 2, 3, 3}, 131),
               random_tensor({1, 2, 3, 3}, 132)},
              10, 13).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mean(g.conv2d(p[0], p[1], 1, ad::Padding::kValid));
              },
              {random_tensor({2, 1, 5, 5}, 140), random_tensor({2, 1, 3, 3}, 141)}, 10,
              14).max_rel_error < kGradTol);
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  return g.mse(g.nearest_up2(p[0]), p[1]);
              },
              {random_tensor({1, 2, 3, 3}, 150), random_tensor({1, 2, 6, 6}, 151)}, 10,
              15).max_rel_error < kGradTol);
}

TEST_CASE("finite differences: composed conv autoencoder block") {
    // conv -> leaky -> up -> conv -> mse, all parameters probed.
    CHECK(check_graph(
              [](Graph& g, const std::vector<int>& p) {
                  int x = g.conv2d(p[0], p[1], 2, ad::Padding::kSameReflect);
                  x = g.bias_add(x, p[2]);
                  x = g.leaky_relu(x, 0.1);
                  x = g.nearest_up2(x);
                  x = g.conv2d(x, p[3], 1, ad::Padding::kSameReflect);
                  return g.mse(x, p[0]);
              },
              {random_tensor_signed({1, 1, 6, 6}, 160, 0.2, 1.0),
               random_tensor({4, 1, 3, 3}, 161), random_tensor({4}, 162),
               random_tensor({1, 4, 3, 3}, 163)},
              10, 16).max_rel_error < kGradTol);
}

TEST_CASE("forward and updates are deterministic") {
    auto run_once = [](std::uint64_t seed) {
        Tensor w = random_tensor({4, 4}, seed);
        const Tensor x = random_tensor({4, 1}, seed + 1);
        std::vector<ad::Tensor*> params{&w};
        ad::AdamState adam = ad::make_adam_state(params, {});
        std::vector<double> trace;
        for (int step = 0; step < 3; ++step) {
            Graph g;
            const int wid = g.param(w);
            const int loss = g.mse(g.matmul(wid, g.constant({4, 1}, x.values)),
                                   g.constant({4, 1}, std::vector<double>(4, 0.5)));
            trace.push_back(g.scalar(loss));
            g.backward(loss);
            const auto grad = g.grad(wid);
            w.grad.assign(grad.begin(), grad.end());
            ad::adam_step(adam, params);
        }
        trace.insert(trace.end(), w.values.begin(), w.values.end());
        return trace;
    };
    const auto a = run_once(42);
    const auto b = run_once(42);
    CHECK(a == b);  // bitwise
}

TEST_CASE("adam first step follows the closed form") {
    // step 1: m-hat = g, v-hat = g^2 => delta = -lr * g / (|g| + eps)
    Tensor p(ad::Shape{3}, {1.0, -2.0, 0.25});
    p.grad = {0.5, -0.125, 2.0};
    const ad::AdamConfig cfg;
    std::vector<ad::Tensor*> params{&p};
    ad::AdamState st = ad::make_adam_state(params, cfg);
    const std::vector<double> before = p.values;
    const std::vector<double> grads = p.grad;
    ad::adam_step(st, params);
    CHECK(st.step == 1);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double expect =
            before[i] - cfg.lr * grads[i] / (std::abs(grads[i]) + cfg.eps);
        CHECK(p.values[i] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    Tensor p(ad::Shape{4}, {1.0, 2.0, 3.0, 4.0});
    p.grad = {0.0, 0.0, 0.0, 0.0};
    std::vector<ad::Tensor*> params{&p};
    ad::AdamState st = ad::make_adam_state(params, {});
    ad::adam_step(st, params);
    CHECK(p.values == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("adam two steps match a hand-rolled reference") {
    const std::vector<double> g = {0.3, -0.7};
    Tensor p(ad::Shape{2}, {0.5, -0.5});
    std::vector<ad::Tensor*> params{&p};
    const ad::AdamConfig cfg;
    ad::AdamState st = ad::make_adam_state(params, cfg);
    for (int step = 0; step < 2; ++step) {
        p.grad = g;
        ad::adam_step(st, params);
    }

    // Reference loop, written out independently.
    std::vector<double> ref = {0.5, -0.5};
    std::vector<double> m(2, 0.0), v(2, 0.0);
    for (int t = 1; t <= 2; ++t) {
        for (int i = 0; i < 2; ++i) {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / (1 - std::pow(cfg.beta1, t));
            const double vhat = v[i] / (1 - std::pow(cfg.beta2, t));
            ref[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    for (int i = 0; i < 2; ++i) CHECK(p.values[i] == doctest::Approx(ref[i]).epsilon(1e-15));
}

TEST_CASE("adam rejects missing gradients") {
    Tensor p(ad::Shape{2}, {1.0, 2.0});
    std::vector<ad::Tensor*> params{&p};
    ad::AdamState st = ad::make_adam_state(params, {});
    CHECK_THROWS_AS(ad::adam_step(st, params), ContractError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    ad::NamedTensors tensors;
    tensors.emplace_back("enc1.w", random_tensor({4, 1, 3, 3}, 200));
    tensors.emplace_back("enc1.b", random_tensor({4}, 201));
    Tensor weird = random_tensor({2, 2}, 202);
    weird.values[0] = 0.1 + 0.2;  // not exactly representable
    weird.values[1] = -0.0;
    tensors.emplace_back("odd/name with spaces", weird);

    const auto bytes = ad::checkpoint_bytes(tensors);
    const auto loaded = ad::checkpoint_from_bytes(bytes);
    REQUIRE(loaded.size() == tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        CHECK(loaded[i].first == tensors[i].first);
        CHECK(loaded[i].second.shape == tensors[i].second.shape);
        CHECK(loaded[i].second.values == tensors[i].second.values);
    }
    CHECK(ad::checkpoint_bytes(loaded) == bytes);

    const auto dir = std::filesystem::temp_directory_path() / "ssae_ckpt_test";
    std::filesystem::create_directories(dir);
    ad::save_checkpoint(dir / "a.ssae", tensors);
    const auto from_file = ad::load_checkpoint(dir / "a.ssae");
    CHECK(ad::checkpoint_bytes(from_file) == bytes);
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint rejects malformed input") {
    std::vector<std::uint8_t> junk = {'N', 'O', 'P', 'E', 1, 0, 0, 0};
    CHECK_THROWS_AS(ad::checkpoint_from_bytes(junk), DataError);

    ad::NamedTensors tensors;
    tensors.emplace_back("w", random_tensor({2, 2}, 1));
    auto bytes = ad::checkpoint_bytes(tensors);
    bytes.pop_back();
    CHECK_THROWS_AS(ad::checkpoint_from_bytes(bytes), DataError);
}
