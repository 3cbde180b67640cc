#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ssae/autodiff.hpp"
#include "ssae/checkpoint.hpp"
#include "ssae/pyramid.hpp"
#include "ssae/rng.hpp"

namespace ssae::models {

enum class Variant { kDense, kSpatial, kVariational };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    int base_channels = 16;          // encoder trunk: c -> 2c -> 4c
    int latent_width = 16;           // dense/variational latent
    int spatial_latent_channels = 8; // spatial variant compressed map depth
    int spatial_hidden = 0;          // 0 = solve to match the dense budget
    double leaky_slope = 0.1;
    double kl_weight = 1e-4;         // variational loss weight
    bool zero_init_final = false;    // zero final layer -> identically zero output
    bool model_base = true;          // pass I_K through a model (false = copy verbatim)
    double kernel_coverage = 0.99;
};

// Anything that maps an image to a same-shaped reconstruction. Lets the
// level recursion be exercised with oracle stubs independent of learning.
class LevelModel {
public:
    virtual ~LevelModel() = default;
    virtual Image reconstruct(const Image& in) const = 0;
};

long trunk_parameter_count(const ModelConfig& cfg);
long parameter_count(Variant variant, int input_size, const ModelConfig& cfg);
int solve_spatial_hidden(int input_size, const ModelConfig& cfg);

// One encoder-decoder network. All variants share the convolutional trunk
// (3 stride-2 convs in, mirrored nearest-upsample + conv out) and differ in
// the bottleneck. Parameter counts are matched across variants at equal
// input size by solving the spatial hidden width against the dense budget.
class EncoderDecoder : public LevelModel {
public:
    static EncoderDecoder build(Variant variant, int input_size, const ModelConfig& cfg,
                                std::uint64_t seed);

    Variant variant() const { return variant_; }
    int input_size() const { return input_size_; }
    const ModelConfig& config() const { return config_; }

    struct ForwardNodes {
        int output = -1;
        int mu = -1;      // variational only
        int logvar = -1;  // variational only
        std::vector<std::pair<std::string, int>> param_nodes;
    };

    // Builds the network on `graph` from `input` ([1,1,S,S]). When `sampler`
    // is null the variational latent uses the mean (deterministic inference).
    ForwardNodes forward(ad::Graph& graph, int input, Rng* sampler) const;

    // Inference pass on one image.
    Image reconstruct(const Image& in) const override;

    long parameter_count() const;
    std::vector<std::pair<std::string, ad::Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, ad::Tensor>>& params() const { return params_; }
    std::vector<ad::Tensor*> param_ptrs();

    void save(const std::filesystem::path& path) const;
    void load_values(const ad::NamedTensors& tensors);

private:
    EncoderDecoder() = default;
    const ad::Tensor& tensor(const std::string& name) const;

    Variant variant_ = Variant::kDense;
    int input_size_ = 0;
    ModelConfig config_;
    std::vector<std::pair<std::string, ad::Tensor>> params_;
};

// The composite scale-space model: one network per high-frequency band plus
// (optionally) one for the low-pass base.
class ScaleSpaceModel {
public:
    static ScaleSpaceModel build(Variant variant, int native_size, int levels,
                                 const ModelConfig& cfg, std::uint64_t seed);

    int levels() const { return levels_; }
    int native_size() const { return native_size_; }
    Variant variant() const { return variant_; }
    bool model_base() const { return config_.model_base; }
    const ModelConfig& config() const { return config_; }
    const pyramid::GaussianKernel1D& kernel() const { return kernel_; }

    // k in [0, levels); level `levels` addresses the base model.
    EncoderDecoder& level_model(int k);
    const EncoderDecoder& level_model(int k) const;
    int model_count() const { return static_cast<int>(models_.size()); }

    bool is_trained(int k) const;
    void set_trained(int k, bool trained);

    long total_parameter_count() const;

    // [I-hat_0 .. I-hat_K] via the band recursion; no training required.
    std::vector<Image> reconstruct_levels(const Image& x) const;
    Image reconstruct(const Image& x) const;  // I-hat_0

    void save_bundle(const std::filesystem::path& dir) const;
    static ScaleSpaceModel load_bundle(const std::filesystem::path& dir);

private:
    ScaleSpaceModel() = default;

    Variant variant_ = Variant::kDense;
    int native_size_ = 0;
    int levels_ = 0;
    ModelConfig config_;
    pyramid::GaussianKernel1D kernel_;
    std::vector<EncoderDecoder> models_;  // bands 0..K-1, then base (when modeled)
    std::vector<bool> trained_;
};

// Generic level recursion with arbitrary per-level models:
// I-hat_K = models[K](I_K) (or I_K verbatim when models[K] is null), then
// I-hat_k = upsample(I-hat_{k+1}) + models[k](H_k).
std::vector<Image> reconstruct_levels(const std::vector<const LevelModel*>& level_models,
                                      const pyramid::GaussianKernel1D& kernel, const Image& x);

// Single network sized so its parameter count matches the total of the
// scale-space model it is compared against (within a few tensor widths).
EncoderDecoder build_matched_baseline(Variant variant, int native_size, int levels,
                                      const ModelConfig& cfg, std::uint64_t seed);

// On-disk bundle helpers. A bundle directory carries a manifest.json whose
// "kind" is either "ssae" (per-level checkpoints) or "baseline" (one model).
std::string bundle_kind(const std::filesystem::path& dir);
void save_baseline_bundle(const std::filesystem::path& dir, const EncoderDecoder& model,
                          int matched_levels);
EncoderDecoder load_baseline_bundle(const std::filesystem::path& dir);

}  // namespace ssae::models
