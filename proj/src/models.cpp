#include "ssae/models.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace ssae::models {

using nlohmann::json;

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kDense: return "dense";
        case Variant::kSpatial: return "spatial";
        case Variant::kVariational: return "variational";
    }
    throw ContractError("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "dense") return Variant::kDense;
    if (name == "spatial") return Variant::kSpatial;
    if (name == "variational") return Variant::kVariational;
    throw ConfigError("unknown variant '" + name + "' (expected dense|spatial|variational)");
}

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check_input_size(int input_size) {
    if (input_size < 8 || !is_power_of_two(input_size)) {
        throw ConfigError("model input size must be a power of two >= 8, got " +
                          std::to_string(input_size));
    }
}

long conv_params(int cout, int cin, int k) {
    return static_cast<long>(cout) * cin * k * k + cout;
}

long dense_params(int in, int out) { return static_cast<long>(in) * out + out; }

long flat_features(int input_size, const ModelConfig& cfg) {
    const int s = input_size / 8;
    return static_cast<long>(4 * cfg.base_channels) * s * s;
}

long dense_extra(int input_size, const ModelConfig& cfg) {
    const long f = flat_features(input_size, cfg);
    return dense_params(static_cast<int>(f), cfg.latent_width) +
           dense_params(cfg.latent_width, static_cast<int>(f));
}

long spatial_extra(int hidden, const ModelConfig& cfg) {
    const int c4 = 4 * cfg.base_channels;
    const int sl = cfg.spatial_latent_channels;
    return conv_params(hidden, c4, 1) + conv_params(sl, hidden, 1) +
           conv_params(hidden, sl, 1) + conv_params(c4, hidden, 1);
}

}  // namespace

long trunk_parameter_count(const ModelConfig& cfg) {
    const int c = cfg.base_channels;
    return conv_params(c, 1, 3) + conv_params(2 * c, c, 3) + conv_params(4 * c, 2 * c, 3) +
           conv_params(2 * c, 4 * c, 3) + conv_params(c, 2 * c, 3) + conv_params(1, c, 3);
}

int solve_spatial_hidden(int input_size, const ModelConfig& cfg) {
    if (cfg.spatial_hidden > 0) return cfg.spatial_hidden;
    const int c4 = 4 * cfg.base_channels;
    const int sl = cfg.spatial_latent_channels;
    // spatial_extra is affine in the hidden width; match the dense budget.
    const long per_unit = 2L * c4 + 2L * sl + 2L;
    const long constant = sl + c4;
    const long target = dense_extra(input_size, cfg);
    const long hidden = (target - constant + per_unit / 2) / per_unit;
    return static_cast<int>(std::max(1L, hidden));
}

long parameter_count(Variant variant, int input_size, const ModelConfig& cfg) {
    check_input_size(input_size);
    const long trunk = trunk_parameter_count(cfg);
    switch (variant) {
        case Variant::kDense:
            return trunk + dense_extra(input_size, cfg);
        case Variant::kSpatial:
            return trunk + spatial_extra(solve_spatial_hidden(input_size, cfg), cfg);
        case Variant::kVariational:
            return trunk + dense_extra(input_size, cfg) +
                   2 * dense_params(cfg.latent_width, cfg.latent_width);
    }
    throw ContractError("parameter_count: unknown variant");
}

EncoderDecoder EncoderDecoder::build(Variant variant, int input_size, const ModelConfig& cfg,
                                     std::uint64_t seed) {
    check_input_size(input_size);
    if (cfg.base_channels < 1 || cfg.latent_width < 1 || cfg.spatial_latent_channels < 1) {
        throw ConfigError("model config: widths must be positive");
    }
    EncoderDecoder m;
    m.variant_ = variant;
    m.input_size_ = input_size;
    m.config_ = cfg;
    if (variant == Variant::kSpatial) {
        m.config_.spatial_hidden = solve_spatial_hidden(input_size, cfg);
    }

    const int c = cfg.base_channels;
    const int f = static_cast<int>(flat_features(input_size, cfg));
    const int latent = cfg.latent_width;

    auto add_param = [&m, seed](const std::string& name, ad::Shape shape, double init_std) {
        ad::Tensor t = ad::Tensor::zeros(std::move(shape));
        if (init_std > 0.0) {
            Rng rng(mix_seed(seed, std::hash<std::string>{}(name)));
            for (double& v : t.values) v = init_std * rng.normal();
        }
        m.params_.emplace_back(name, std::move(t));
    };
    auto he = [](int fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };

    add_param("enc1.w", {c, 1, 3, 3}, he(9));
    add_param("enc1.b", {c}, 0.0);
    add_param("enc2.w", {2 * c, c, 3, 3}, he(9 * c));
    add_param("enc2.b", {2 * c}, 0.0);
    add_param("enc3.w", {4 * c, 2 * c, 3, 3}, he(9 * 2 * c));
    add_param("enc3.b", {4 * c}, 0.0);

    switch (variant) {
        case Variant::kDense:
            add_param("lat.w", {f, latent}, he(f));
            add_param("lat.b", {latent}, 0.0);
            add_param("delat.w", {latent, f}, he(latent));
            add_param("delat.b", {f}, 0.0);
            break;
        case Variant::kVariational:
            add_param("lat.w", {f, latent}, he(f));
            add_param("lat.b", {latent}, 0.0);
            add_param("mu.w", {latent, latent}, he(latent));
            add_param("mu.b", {latent}, 0.0);
            add_param("logvar.w", {latent, latent}, he(latent));
            add_param("logvar.b", {latent}, 0.0);
            add_param("delat.w", {latent, f}, he(latent));
            add_param("delat.b", {f}, 0.0);
            break;
        case Variant::kSpatial: {
            const int hidden = m.config_.spatial_hidden;
            const int sl = cfg.spatial_latent_channels;
            add_param("sp1.w", {hidden, 4 * c, 1, 1}, he(4 * c));
            add_param("sp1.b", {hidden}, 0.0);
            add_param("sp2.w", {sl, hidden, 1, 1}, he(hidden));
            add_param("sp2.b", {sl}, 0.0);
            add_param("sp3.w", {hidden, sl, 1, 1}, he(sl));
            add_param("sp3.b", {hidden}, 0.0);
            add_param("sp4.w", {4 * c, hidden, 1, 1}, he(hidden));
            add_param("sp4.b", {4 * c}, 0.0);
            break;
        }
    }

    add_param("dec1.w", {2 * c, 4 * c, 3, 3}, he(9 * 4 * c));
    add_param("dec1.b", {2 * c}, 0.0);
    add_param("dec2.w", {c, 2 * c, 3, 3}, he(9 * 2 * c));
    add_param("dec2.b", {c}, 0.0);
    add_param("dec3.w", {1, c, 3, 3}, cfg.zero_init_final ? 0.0 : he(9 * c));
    add_param("dec3.b", {1}, 0.0);
    return m;
}

const ad::Tensor& EncoderDecoder::tensor(const std::string& name) const {
    for (const auto& [n, t] : params_) {
        if (n == name) return t;
    }
    throw ContractError("EncoderDecoder: no parameter named '" + name + "'");
}

EncoderDecoder::ForwardNodes EncoderDecoder::forward(ad::Graph& g, int input,
                                                     Rng* sampler) const {
    const ad::Shape& in_shape = g.shape(input);
    if (in_shape.size() != 4 || in_shape[0] != 1 || in_shape[1] != 1 ||
        in_shape[2] != input_size_ || in_shape[3] != input_size_) {
        throw ShapeError("forward: expected [1,1," + std::to_string(input_size_) + "," +
                         std::to_string(input_size_) + "], got " + ad::shape_str(in_shape));
    }

    ForwardNodes nodes;
    // Register every parameter up front so node ids and the param_nodes
    // order follow the declaration order regardless of expression nesting.
    nodes.param_nodes.reserve(params_.size());
    for (const auto& [name, t] : params_) {
        nodes.param_nodes.emplace_back(name, g.param(t));
    }
    auto p = [&](const std::string& name) {
        for (const auto& [n, id] : nodes.param_nodes) {
            if (n == name) return id;
        }
        throw ContractError("forward: no parameter named '" + name + "'");
    };
    const double slope = config_.leaky_slope;
    auto conv_block = [&](int x, const std::string& stem, int stride, bool activate) {
        int y = g.conv2d(x, p(stem + ".w"), stride, ad::Padding::kSameReflect);
        y = g.bias_add(y, p(stem + ".b"));
        return activate ? g.leaky_relu(y, slope) : y;
    };

    int x = conv_block(input, "enc1", 2, true);
    x = conv_block(x, "enc2", 2, true);
    x = conv_block(x, "enc3", 2, true);

    const int c4 = 4 * config_.base_channels;
    const int s8 = input_size_ / 8;
    const int f = c4 * s8 * s8;
    const int latent = config_.latent_width;

    switch (variant_) {
        case Variant::kDense: {
            int h = g.reshape(x, {1, f});
            h = g.bias_add(g.matmul(h, p("lat.w")), p("lat.b"));
            h = g.leaky_relu(g.bias_add(g.matmul(h, p("delat.w")), p("delat.b")), slope);
            x = g.reshape(h, {1, c4, s8, s8});
            break;
        }
        case Variant::kVariational: {
            int h = g.reshape(x, {1, f});
            h = g.leaky_relu(g.bias_add(g.matmul(h, p("lat.w")), p("lat.b")), slope);
            nodes.mu = g.bias_add(g.matmul(h, p("mu.w")), p("mu.b"));
            nodes.logvar = g.bias_add(g.matmul(h, p("logvar.w")), p("logvar.b"));
            int z = nodes.mu;
            if (sampler != nullptr) {
                std::vector<double> eps(static_cast<std::size_t>(latent));
                for (double& e : eps) e = sampler->normal();
                const int eps_node = g.constant({1, latent}, std::move(eps));
                const int std_node = g.exp(g.scale(nodes.logvar, 0.5));
                z = g.add(nodes.mu, g.mul(std_node, eps_node));
            }
            int h2 = g.leaky_relu(g.bias_add(g.matmul(z, p("delat.w")), p("delat.b")), slope);
            x = g.reshape(h2, {1, c4, s8, s8});
            break;
        }
        case Variant::kSpatial: {
            x = conv_block(x, "sp1", 1, true);
            x = conv_block(x, "sp2", 1, false);  // compressed spatial latent
            x = conv_block(x, "sp3", 1, true);
            x = conv_block(x, "sp4", 1, true);
            break;
        }
    }

    x = conv_block(g.nearest_up2(x), "dec1", 1, true);
    x = conv_block(g.nearest_up2(x), "dec2", 1, true);
    x = conv_block(g.nearest_up2(x), "dec3", 1, false);
    nodes.output = x;
    return nodes;
}

Image EncoderDecoder::reconstruct(const Image& in) const {
    if (in.width() != input_size_ || in.height() != input_size_) {
        throw ShapeError("reconstruct: image " + std::to_string(in.width()) + "x" +
                         std::to_string(in.height()) + " does not match model input size " +
                         std::to_string(input_size_));
    }
    ad::Graph g;
    const ForwardNodes nodes = forward(g, g.constant(in), nullptr);
    return g.value_as_image(nodes.output);
}

long EncoderDecoder::parameter_count() const {
    long n = 0;
    for (const auto& [name, t] : params_) n += static_cast<long>(t.numel());
    return n;
}

std::vector<ad::Tensor*> EncoderDecoder::param_ptrs() {
    std::vector<ad::Tensor*> out;
    out.reserve(params_.size());
    for (auto& [name, t] : params_) out.push_back(&t);
    return out;
}

void EncoderDecoder::save(const std::filesystem::path& path) const {
    ad::save_checkpoint(path, params_);
}

void EncoderDecoder::load_values(const ad::NamedTensors& tensors) {
    if (tensors.size() != params_.size()) {
        throw DataError("load_values: checkpoint has " + std::to_string(tensors.size()) +
                        " tensors, model expects " + std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, t] = params_[i];
        const auto& [cname, ct] = tensors[i];
        if (cname != name || ct.shape != t.shape) {
            throw DataError("load_values: tensor mismatch at index " + std::to_string(i) +
                            " ('" + cname + "' vs '" + name + "')");
        }
        t.values = ct.values;
    }
}

ScaleSpaceModel ScaleSpaceModel::build(Variant variant, int native_size, int levels,
                                       const ModelConfig& cfg, std::uint64_t seed) {
    if (levels < 1) throw ConfigError("scale-space model: levels must be >= 1");
    check_input_size(native_size >> levels);
    ScaleSpaceModel m;
    m.variant_ = variant;
    m.native_size_ = native_size;
    m.levels_ = levels;
    m.config_ = cfg;
    m.kernel_ = pyramid::gaussian_kernel(cfg.kernel_coverage);
    const int model_count = cfg.model_base ? levels + 1 : levels;
    for (int k = 0; k < model_count; ++k) {
        m.models_.push_back(EncoderDecoder::build(variant, native_size >> k, cfg,
                                                  mix_seed(seed, static_cast<std::uint64_t>(k))));
    }
    m.trained_.assign(model_count, false);
    return m;
}

EncoderDecoder& ScaleSpaceModel::level_model(int k) {
    return const_cast<EncoderDecoder&>(std::as_const(*this).level_model(k));
}

const EncoderDecoder& ScaleSpaceModel::level_model(int k) const {
    if (k < 0 || k >= static_cast<int>(models_.size())) {
        throw ContractError("level_model: level " + std::to_string(k) + " out of range" +
                            (config_.model_base ? "" : " (base is not modeled)"));
    }
    return models_[k];
}

bool ScaleSpaceModel::is_trained(int k) const {
    if (k == levels_ && !config_.model_base) return true;  // verbatim base needs no training
    if (k < 0 || k >= static_cast<int>(models_.size())) {
        throw ContractError("is_trained: level out of range");
    }
    return trained_[k];
}

void ScaleSpaceModel::set_trained(int k, bool trained) {
    if (k < 0 || k >= static_cast<int>(models_.size())) {
        throw ContractError("set_trained: level out of range");
    }
    trained_[k] = trained;
}

long ScaleSpaceModel::total_parameter_count() const {
    long n = 0;
    for (const auto& m : models_) n += m.parameter_count();
    return n;
}

std::vector<Image> reconstruct_levels(const std::vector<const LevelModel*>& level_models,
                                      const pyramid::GaussianKernel1D& kernel, const Image& x) {
    if (level_models.size() < 2) {
        throw ContractError("reconstruct_levels: need at least one band model plus the base");
    }
    const int levels = static_cast<int>(level_models.size()) - 1;
    const pyramid::LaplacianPyramid pyr = pyramid::build_pyramid(x, levels, kernel);

    std::vector<Image> recon(levels + 1);
    recon[levels] = level_models[levels] != nullptr
                        ? level_models[levels]->reconstruct(pyr.base)
                        : pyr.base;
    for (int k = levels - 1; k >= 0; --k) {
        if (level_models[k] == nullptr) {
            throw ContractError("reconstruct_levels: band model " + std::to_string(k) +
                                " is null");
        }
        const Image band_hat = level_models[k]->reconstruct(pyr.highs[k]);
        Image up = pyramid::upsample(recon[k + 1]);
        if (!up.same_shape(band_hat)) {
            throw ShapeError("reconstruct_levels: level " + std::to_string(k) +
                             " shape mismatch");
        }
        for (std::size_t i = 0; i < up.size(); ++i) up[i] += band_hat[i];
        recon[k] = std::move(up);
    }
    return recon;
}

std::vector<Image> ScaleSpaceModel::reconstruct_levels(const Image& x) const {
    std::vector<const LevelModel*> ms;
    ms.reserve(levels_ + 1);
    for (int k = 0; k < levels_; ++k) ms.push_back(&models_[k]);
    ms.push_back(config_.model_base ? &models_[levels_] : nullptr);
    return models::reconstruct_levels(ms, kernel_, x);
}

Image ScaleSpaceModel::reconstruct(const Image& x) const {
    return reconstruct_levels(x).front();
}

void ScaleSpaceModel::save_bundle(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["kind"] = "ssae";
    manifest["variant"] = variant_name(variant_);
    manifest["levels"] = levels_;
    manifest["native_size"] = native_size_;
    manifest["kernel_sigma"] = kernel_.sigma;
    manifest["config"] = {{"base_channels", config_.base_channels},
                          {"latent_width", config_.latent_width},
                          {"spatial_latent_channels", config_.spatial_latent_channels},
                          {"spatial_hidden", config_.spatial_hidden},
                          {"leaky_slope", config_.leaky_slope},
                          {"kl_weight", config_.kl_weight},
                          {"zero_init_final", config_.zero_init_final},
                          {"model_base", config_.model_base},
                          {"kernel_coverage", config_.kernel_coverage}};
    json checkpoints = json::array();
    for (std::size_t k = 0; k < models_.size(); ++k) {
        const std::string name = "level_" + std::to_string(k) + ".ssae";
        models_[k].save(dir / name);
        checkpoints.push_back(name);
    }
    manifest["checkpoints"] = checkpoints;
    json trained = json::array();
    for (bool t : trained_) trained.push_back(t);
    manifest["trained"] = trained;
    std::ofstream f(dir / "manifest.json");
    if (!f) throw DataError("save_bundle: cannot write manifest in " + dir.string());
    f << manifest.dump(2) << "\n";
}

namespace {

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.latent_width = j.at("latent_width").get<int>();
    cfg.spatial_latent_channels = j.at("spatial_latent_channels").get<int>();
    cfg.spatial_hidden = j.at("spatial_hidden").get<int>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.kl_weight = j.at("kl_weight").get<double>();
    cfg.zero_init_final = j.at("zero_init_final").get<bool>();
    cfg.model_base = j.at("model_base").get<bool>();
    cfg.kernel_coverage = j.at("kernel_coverage").get<double>();
    return cfg;
}

json load_manifest(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw DataError("load_bundle: missing manifest.json in " + dir.string());
    json manifest;
    try {
        f >> manifest;
    } catch (const json::exception& e) {
        throw DataError("load_bundle: malformed manifest.json: " + std::string(e.what()));
    }
    return manifest;
}

}  // namespace

ScaleSpaceModel ScaleSpaceModel::load_bundle(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    if (manifest.at("kind").get<std::string>() != "ssae") {
        throw DataError("load_bundle: bundle kind is not 'ssae'");
    }
    const ModelConfig cfg = config_from_json(manifest.at("config"));
    ScaleSpaceModel m = build(variant_from_name(manifest.at("variant").get<std::string>()),
                              manifest.at("native_size").get<int>(),
                              manifest.at("levels").get<int>(), cfg, /*seed=*/0);
    const auto checkpoints = manifest.at("checkpoints");
    if (checkpoints.size() != m.models_.size()) {
        throw DataError("load_bundle: checkpoint count mismatch");
    }
    for (std::size_t k = 0; k < m.models_.size(); ++k) {
        m.models_[k].load_values(
            ad::load_checkpoint(dir / checkpoints[k].get<std::string>()));
    }
    if (manifest.contains("trained")) {
        const auto trained = manifest.at("trained");
        for (std::size_t k = 0; k < m.trained_.size() && k < trained.size(); ++k) {
            m.trained_[k] = trained[k].get<bool>();
        }
    }
    return m;
}

std::string bundle_kind(const std::filesystem::path& dir) {
    return load_manifest(dir).at("kind").get<std::string>();
}

void save_baseline_bundle(const std::filesystem::path& dir, const EncoderDecoder& model,
                          int matched_levels) {
    std::filesystem::create_directories(dir);
    const ModelConfig& cfg = model.config();
    json manifest;
    manifest["kind"] = "baseline";
    manifest["variant"] = variant_name(model.variant());
    manifest["input_size"] = model.input_size();
    manifest["matched_levels"] = matched_levels;
    manifest["config"] = {{"base_channels", cfg.base_channels},
                          {"latent_width", cfg.latent_width},
                          {"spatial_latent_channels", cfg.spatial_latent_channels},
                          {"spatial_hidden", cfg.spatial_hidden},
                          {"leaky_slope", cfg.leaky_slope},
                          {"kl_weight", cfg.kl_weight},
                          {"zero_init_final", cfg.zero_init_final},
                          {"model_base", cfg.model_base},
                          {"kernel_coverage", cfg.kernel_coverage}};
    manifest["checkpoint"] = "model.ssae";
    model.save(dir / "model.ssae");
    std::ofstream f(dir / "manifest.json");
    if (!f) throw DataError("save_baseline_bundle: cannot write manifest in " + dir.string());
    f << manifest.dump(2) << "\n";
}

EncoderDecoder load_baseline_bundle(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    if (manifest.at("kind").get<std::string>() != "baseline") {
        throw DataError("load_baseline_bundle: bundle kind is not 'baseline'");
    }
    EncoderDecoder model =
        EncoderDecoder::build(variant_from_name(manifest.at("variant").get<std::string>()),
                              manifest.at("input_size").get<int>(),
                              config_from_json(manifest.at("config")), /*seed=*/0);
    model.load_values(ad::load_checkpoint(dir / manifest.at("checkpoint").get<std::string>()));
    return model;
}

EncoderDecoder build_matched_baseline(Variant variant, int native_size, int levels,
                                      const ModelConfig& cfg, std::uint64_t seed) {
    long target = 0;
    for (int k = 0; k <= (cfg.model_base ? levels : levels - 1); ++k) {
        target += parameter_count(variant, native_size >> k, cfg);
    }
    const long trunk = trunk_parameter_count(cfg);
    const long f = flat_features(native_size, cfg);
    ModelConfig matched = cfg;
    switch (variant) {
        case Variant::kDense: {
            // trunk + L(2f + 1) + f = target
            const long latent = (target - trunk - f) / (2 * f + 1);
            matched.latent_width = static_cast<int>(std::max(1L, latent));
            break;
        }
        case Variant::kVariational: {
            // trunk + L(2f + 1) + f + 2L^2 + 2L = target; scan around the linear solve
            long best_latent = 1;
            long best_err = std::numeric_limits<long>::max();
            const long guess = std::max(1L, (target - trunk - f) / (2 * f + 3));
            for (long latent = std::max(1L, guess - 4); latent <= guess + 4; ++latent) {
                const long total =
                    trunk + latent * (2 * f + 1) + f + 2 * latent * latent + 2 * latent;
                const long err = std::abs(total - target);
                if (err < best_err) {
                    best_err = err;
                    best_latent = latent;
                }
            }
            matched.latent_width = static_cast<int>(best_latent);
            break;
        }
        case Variant::kSpatial: {
            const int c4 = 4 * cfg.base_channels;
            const int sl = cfg.spatial_latent_channels;
            const long per_unit = 2L * c4 + 2L * sl + 2L;
            const long hidden = (target - trunk - sl - c4 + per_unit / 2) / per_unit;
            matched.spatial_hidden = static_cast<int>(std::max(1L, hidden));
            break;
        }
    }
    EncoderDecoder baseline = EncoderDecoder::build(variant, native_size, matched, seed);
    const double ratio =
        static_cast<double>(baseline.parameter_count()) / static_cast<double>(target);
    if (ratio < 0.9 || ratio > 1.1) {
        throw ContractError("build_matched_baseline: solved budget off by more than 10% (" +
                            std::to_string(ratio) + ")");
    }
    return baseline;
}

}  // namespace ssae::models
