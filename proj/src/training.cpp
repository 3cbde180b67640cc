#include "ssae/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssae::training {

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.randint(0, static_cast<std::int64_t>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

void split_dataset(std::size_t count, double val_fraction, std::uint64_t seed,
                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
    if (count < 2) throw DataError("split_dataset: need at least 2 samples");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("split_dataset: val_fraction must be in (0,1)");
    }
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, 0xda7a5e7));
    shuffle_indices(idx, rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(count)));
    n_val = std::clamp<std::size_t>(n_val, 1, count - 1);
    val_idx.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
    train_idx.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
}

std::vector<StageSample> make_stage_samples(const models::ScaleSpaceModel& model,
                                            const std::vector<Image>& dataset, int k) {
    const int levels = model.levels();
    if (k < 0 || k > levels) {
        throw ContractError("make_stage_samples: level " + std::to_string(k) + " out of range");
    }
    for (int j = k + 1; j <= levels; ++j) {
        if (!model.is_trained(j)) {
            throw SequencingError("stage " + std::to_string(k) + " requires stage " +
                                  std::to_string(j) + " to be trained first");
        }
    }
    if (dataset.empty()) throw DataError("make_stage_samples: empty dataset");

    std::vector<StageSample> samples;
    samples.reserve(dataset.size());
    for (const Image& x : dataset) {
        StageSample s;
        if (k == levels) {
            const std::vector<Image> lv = pyramid::level_images(x, levels, model.kernel());
            s.input = lv[levels];
            s.target = lv[levels];
        } else {
            const pyramid::LaplacianPyramid pyr =
                pyramid::build_pyramid(x, levels, model.kernel());
            const std::vector<Image> lv = pyramid::level_images(x, levels, model.kernel());
            // Frozen coarser stages reconstruct I_{k+1}; its upsampling is a
            // constant offset for the trainable stage. Only models k+1..K run.
            Image recon = model.model_base() ? model.level_model(levels).reconstruct(pyr.base)
                                             : pyr.base;
            for (int j = levels - 1; j > k; --j) {
                const Image band_hat = model.level_model(j).reconstruct(pyr.highs[j]);
                Image up = pyramid::upsample(recon);
                for (std::size_t i = 0; i < up.size(); ++i) up[i] += band_hat[i];
                recon = std::move(up);
            }
            s.input = pyr.highs[k];
            s.target = lv[k];
            s.offset = pyramid::upsample(recon);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

int build_stage_loss(ad::Graph& g, const models::EncoderDecoder& model,
                     const StageSample& sample, Rng* sampler,
                     std::vector<std::pair<std::string, int>>* param_nodes) {
    const int input = g.constant(sample.input);
    const models::EncoderDecoder::ForwardNodes f = model.forward(g, input, sampler);
    int pred = f.output;
    if (sample.offset.has_value()) {
        pred = g.add(pred, g.constant(*sample.offset));
    }
    int loss = g.mse(pred, g.constant(sample.target));
    if (model.variant() == models::Variant::kVariational) {
        const int kl = g.gaussian_kl(f.mu, f.logvar);
        loss = g.add(loss, g.scale(kl, model.config().kl_weight));
    }
    if (param_nodes != nullptr) *param_nodes = f.param_nodes;
    return loss;
}

namespace {

double sample_loss_value(const models::EncoderDecoder& model, const StageSample& sample) {
    ad::Graph g;
    return g.scalar(build_stage_loss(g, model, sample, nullptr, nullptr));
}

double mean_loss(const models::EncoderDecoder& model, const std::vector<StageSample>& samples,
                 const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    for (std::size_t i : idx) acc += sample_loss_value(model, samples[i]);
    return acc / static_cast<double>(idx.size());
}

struct ParamSnapshot {
    std::vector<std::vector<double>> values;
};

ParamSnapshot snapshot(const models::EncoderDecoder& model) {
    ParamSnapshot s;
    for (const auto& [name, t] : model.params()) s.values.push_back(t.values);
    return s;
}

void restore(models::EncoderDecoder& model, const ParamSnapshot& s) {
    auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second.values = s.values[i];
}

// Shared epoch loop: Adam over mini-batches, per-epoch validation, early
// stopping on relative improvement, best-weights restore.
StageReport run_training(models::EncoderDecoder& model, const std::vector<StageSample>& samples,
                         const TrainConfig& config, std::uint64_t stream) {
    if (samples.size() < 2) throw DataError("training: need at least 2 samples");
    if (config.batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
    if (!(config.lr > 0.0)) throw ConfigError("training: lr must be positive");
    if (config.max_epochs < 1) throw ConfigError("training: max_epochs must be >= 1");

    // One holdout split per run, shared by every stage.
    std::vector<std::size_t> train_idx, val_idx;
    split_dataset(samples.size(), config.val_fraction, config.seed, train_idx, val_idx);

    Rng order_rng(mix_seed(config.seed, stream ^ 0x500011ULL));
    Rng sampler_rng(mix_seed(config.seed, stream + 77));
    const bool variational = model.variant() == models::Variant::kVariational;

    std::vector<ad::Tensor*> params = model.param_ptrs();
    ad::AdamConfig adam_cfg;
    adam_cfg.lr = config.lr;
    ad::AdamState adam = ad::make_adam_state(params, adam_cfg);

    StageReport report;
    report.init_val_loss = mean_loss(model, samples, val_idx);
    report.best_val_loss = report.init_val_loss;
    report.best_epoch = 0;
    ParamSnapshot best = snapshot(model);
    int bad_rounds = 0;

    std::vector<std::vector<double>> grad_acc(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) grad_acc[i].assign(params[i]->numel(), 0.0);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_indices(train_idx, order_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
            const std::size_t end = std::min(train_idx.size(),
                                             start + static_cast<std::size_t>(config.batch_size));
            const double inv_members = 1.0 / static_cast<double>(end - start);
            for (auto& g : grad_acc) std::fill(g.begin(), g.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t bi = start; bi < end; ++bi) {
                ad::Graph g;
                std::vector<std::pair<std::string, int>> param_nodes;
                const int loss = build_stage_loss(g, model, samples[train_idx[bi]],
                                                  variational ? &sampler_rng : nullptr,
                                                  &param_nodes);
                const double lv = g.scalar(loss);
                if (!std::isfinite(lv)) {
                    throw DivergenceError("training diverged: non-finite loss at epoch " +
                                          std::to_string(epoch) + ", sample " +
                                          std::to_string(train_idx[bi]));
                }
                batch_loss += lv;
                g.backward(loss);
                for (std::size_t pi = 0; pi < param_nodes.size(); ++pi) {
                    const auto grad = g.grad(param_nodes[pi].second);
                    auto& acc = grad_acc[pi];
                    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += grad[j];
                }
            }
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                params[pi]->grad.resize(params[pi]->numel());
                for (std::size_t j = 0; j < grad_acc[pi].size(); ++j) {
                    params[pi]->grad[j] = grad_acc[pi][j] * inv_members;
                }
            }
            ad::adam_step(adam, params);
            epoch_loss += batch_loss * inv_members;
            ++batches;
        }
        report.train_curve.push_back(epoch_loss / static_cast<double>(batches));

        const double val = mean_loss(model, samples, val_idx);
        if (!std::isfinite(val)) {
            throw DivergenceError("training diverged: non-finite validation loss at epoch " +
                                  std::to_string(epoch));
        }
        report.val_curve.push_back(val);
        report.stopped_epoch = epoch;
        if (val < report.best_val_loss * (1.0 - config.min_delta)) {
            report.best_val_loss = val;
            report.best_epoch = epoch;
            best = snapshot(model);
            bad_rounds = 0;
        } else {
            if (val < report.best_val_loss) {
                // Below-threshold improvement still defines the restored optimum.
                report.best_val_loss = val;
                report.best_epoch = epoch;
                best = snapshot(model);
            }
            ++bad_rounds;
            if (bad_rounds > config.patience) break;
        }
    }
    restore(model, best);
    return report;
}

}  // namespace

double level_loss_value(const models::ScaleSpaceModel& model, const Image& x, int k) {
    const std::vector<StageSample> s = make_stage_samples(model, {x}, k);
    return sample_loss_value(model.level_model(k), s.front());
}

double level_loss_value(const std::vector<const models::LevelModel*>& level_models,
                        const pyramid::GaussianKernel1D& kernel, const Image& x, int k) {
    const int levels = static_cast<int>(level_models.size()) - 1;
    if (k < 0 || k > levels) throw ContractError("level_loss_value: level out of range");
    const std::vector<Image> lv = pyramid::level_images(x, levels, kernel);
    Image recon_k(1, 1);
    if (k == levels) {
        recon_k = level_models[k] ? level_models[k]->reconstruct(lv[levels]) : lv[levels];
    } else {
        const std::vector<Image> recon = models::reconstruct_levels(level_models, kernel, x);
        recon_k = recon[k];
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < recon_k.size(); ++i) {
        const double d = recon_k[i] - lv[k][i];
        acc += d * d;
    }
    return acc / static_cast<double>(recon_k.size());
}

StageReport train_stage(models::ScaleSpaceModel& model, const std::vector<Image>& dataset,
                        int k, const TrainConfig& config) {
    const std::vector<StageSample> samples = make_stage_samples(model, dataset, k);
    StageReport report = run_training(model.level_model(k), samples, config,
                                      static_cast<std::uint64_t>(k));
    report.level = k;
    report.lambda.assign(model.levels() + 1, 0.0);
    report.lambda[k] = 1.0;
    model.set_trained(k, true);
    return report;
}

TrainReport train_all(models::ScaleSpaceModel& model, const std::vector<Image>& dataset,
                      const TrainConfig& config,
                      const std::function<void(int)>& on_stage_done) {
    if (dataset.empty()) throw DataError("train_all: empty dataset");
    TrainReport report;
    report.seed = config.seed;
    const int last = model.model_base() ? model.levels() : model.levels() - 1;
    for (int k = last; k >= 0; --k) {
        report.stage_order.push_back(k);
        report.stages.push_back(train_stage(model, dataset, k, config));
        if (on_stage_done) on_stage_done(k);
    }
    report.final_val_loss_per_level.assign(model.levels() + 1, 0.0);
    std::vector<std::size_t> train_idx, val_idx;
    split_dataset(dataset.size(), config.val_fraction, config.seed, train_idx, val_idx);
    for (int k = 0; k <= model.levels(); ++k) {
        if (k == model.levels() && !model.model_base()) continue;
        double acc = 0.0;
        for (std::size_t i : val_idx) acc += level_loss_value(model, dataset[i], k);
        report.final_val_loss_per_level[k] = acc / static_cast<double>(val_idx.size());
    }
    return report;
}

TrainReport train_baseline(models::EncoderDecoder& model, const std::vector<Image>& dataset,
                           const TrainConfig& config) {
    if (dataset.empty()) throw DataError("train_baseline: empty dataset");
    std::vector<StageSample> samples;
    samples.reserve(dataset.size());
    for (const Image& x : dataset) {
        StageSample s;
        s.input = x;
        s.target = x;
        samples.push_back(std::move(s));
    }
    TrainReport report;
    report.seed = config.seed;
    report.stage_order = {0};
    StageReport stage = run_training(model, samples, config, 0xba5e11ULL);
    stage.level = 0;
    stage.lambda = {1.0};
    report.stages.push_back(std::move(stage));
    report.final_val_loss_per_level = {report.stages.front().best_val_loss};
    return report;
}

}  // namespace ssae::training
