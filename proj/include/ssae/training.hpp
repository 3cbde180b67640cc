#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssae/adam.hpp"
#include "ssae/models.hpp"

namespace ssae::training {

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 8;
    int patience = 10;        // validation rounds without improvement before stopping
    double min_delta = 1e-3;  // relative improvement threshold
    int max_epochs = 200;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct StageReport {
    int level = 0;
    std::vector<double> lambda;  // one-hot loss weights over levels 0..K
    std::vector<double> train_curve;  // mean batch loss per epoch
    std::vector<double> val_curve;    // validation loss per epoch
    double init_val_loss = 0.0;
    double best_val_loss = 0.0;
    int stopped_epoch = 0;  // 1-based epoch index of the last epoch run
    int best_epoch = 0;
};

struct TrainReport {
    std::vector<int> stage_order;
    std::vector<StageReport> stages;
    std::vector<double> final_val_loss_per_level;
    std::uint64_t seed = 0;
};

// One training example for a single stage: the model sees `input`, the loss
// compares `offset + model(input)` against `target`. For band stages the
// offset is the upsampled frozen reconstruction of the coarser levels; for
// the base stage and plain autoencoders it is absent.
struct StageSample {
    Image input;
    Image target;
    std::optional<Image> offset;
};

// Deterministic dataset split: indices are shuffled by `seed`, the trailing
// `val_fraction` (at least one element) becomes the validation set.
void split_dataset(std::size_t count, double val_fraction, std::uint64_t seed,
                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx);

// Stage samples for training level k of a scale-space model. Levels k+1..K
// must already be trained (SequencingError otherwise).
std::vector<StageSample> make_stage_samples(const models::ScaleSpaceModel& model,
                                            const std::vector<Image>& dataset, int k);

// Builds the per-sample loss graph: mse(target, offset + M(input)), plus the
// KL term for the variational variant. Returns the loss node.
int build_stage_loss(ad::Graph& graph, const models::EncoderDecoder& model,
                     const StageSample& sample, Rng* sampler,
                     std::vector<std::pair<std::string, int>>* param_nodes);

// L_k for one image: frozen stages k+1..K supply the coarse reconstruction,
// stage k is evaluated in inference mode (mean latent).
double level_loss_value(const models::ScaleSpaceModel& model, const Image& x, int k);

// Same loss with arbitrary level models (oracle stubs); no trained-state
// checks. level_models has K+1 entries, entry K may be null (verbatim base).
double level_loss_value(const std::vector<const models::LevelModel*>& level_models,
                        const pyramid::GaussianKernel1D& kernel, const Image& x, int k);

// Optimizes only the stage-k parameters with Adam and early stopping;
// restores the best-validation parameters and marks the stage trained.
StageReport train_stage(models::ScaleSpaceModel& model, const std::vector<Image>& dataset,
                        int k, const TrainConfig& config);

// Runs train_stage for k = K, K-1, ..., 0. `on_stage_done` fires after each
// stage completes (checkpointing hook).
TrainReport train_all(models::ScaleSpaceModel& model, const std::vector<Image>& dataset,
                      const TrainConfig& config,
                      const std::function<void(int)>& on_stage_done = {});

// Trains one plain autoencoder directly on the images with the same
// optimizer and stopping machinery.
TrainReport train_baseline(models::EncoderDecoder& model, const std::vector<Image>& dataset,
                           const TrainConfig& config);

}  // namespace ssae::training
