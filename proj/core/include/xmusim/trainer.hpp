#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xmusim/contrastive.hpp"
#include "xmusim/dataset.hpp"
#include "xmusim/text_pipeline.hpp"
#include "xmusim/text_table.hpp"

namespace xmusim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 40;
  double peak_lr = 1e-4;
  std::size_t warmup_epochs = 1;
  double tau = 0.07;
  LossDirection direction = LossDirection::symmetric;
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::size_t latent_dim = 128;
  std::size_t hidden_dim = 0;  // 0 selects latent_dim

  std::size_t effective_hidden_dim() const noexcept { return hidden_dim == 0 ? latent_dim : hidden_dim; }
  /// Throws UsageError for batch_size < 2, epochs < warmup_epochs, tau <= 0, negative lr.
  void validate() const;
};

/// Linear ramp from 0 to peak_lr over the warmup steps, then a half cosine that reaches
/// exactly 0 at the final step of the run.
double lr_at_step(std::uint64_t step, std::uint64_t steps_per_epoch, const TrainConfig& cfg);

struct TrainingPair {
  std::size_t track = 0;  // index into the dataset
  TextSample text;
  std::size_t chunk = 0;  // audio chunk row of that track
};

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;  // indices into the pair list
  std::size_t unresolved_collisions = 0;          // same-track pairs accepted after the re-draw cap
};

inline constexpr std::size_t kMaxCollisionRedraws = 100;

/// Shuffles, then fills full batches in order. A pair whose track already appears in the
/// batch is swapped with a later random pair, up to kMaxCollisionRedraws times. The final
/// partial batch is dropped. Throws DataError when fewer pairs than batch_size exist.
BatchPlan make_batches(const std::vector<TrainingPair>& pairs, std::size_t batch_size, Rng& rng);

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update applied in place. Moments are allocated on first use.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr, const AdamConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;  // learning rate of the epoch's final step
};

struct TrainResult {
  ProjectionHead text_head;
  ProjectionHead audio_head;
  std::vector<EpochStats> history;
  double first_batch_loss = 0.0;
  std::size_t steps_per_epoch = 0;
  std::size_t unresolved_collisions = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Freshly samples the text of every track each epoch, pairs each sample with one random
/// audio chunk of its track and runs forward, backward and Adam over full batches.
/// Throws NumericError (with the batch's pair and track indices) on a non-finite loss.
TrainResult train(const Dataset& dataset, const TextEmbeddingTable& text_table, const TextConfig& text_cfg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Loss of a single batch under the given heads; used for diagnostics.
double batch_loss(const ProjectionHead& text_head, const ProjectionHead& audio_head, const Matrix& text_raw,
                  const Matrix& audio_raw, const LossConfig& cfg);

}  // namespace xmusim
