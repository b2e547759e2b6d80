#include "xmusim/trainer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "xmusim/error.hpp"

namespace xmusim {

void TrainConfig::validate() const {
  if (batch_size < 2) throw UsageError("batch_size must be >= 2 for in-batch negatives");
  if (epochs == 0) throw UsageError("epochs must be >= 1");
  if (epochs < warmup_epochs) throw UsageError("epochs must be >= warmup_epochs");
  if (!(tau > 0.0)) throw UsageError("tau must be positive");
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) throw UsageError("peak_lr must be finite and >= 0");
  if (latent_dim == 0) throw UsageError("latent_dim must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw UsageError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw UsageError("adam eps must be positive");
}

double lr_at_step(std::uint64_t step, std::uint64_t steps_per_epoch, const TrainConfig& cfg) {
  if (steps_per_epoch == 0) throw UsageError("steps_per_epoch must be >= 1");
  const std::uint64_t warmup = cfg.warmup_epochs * steps_per_epoch;
  const std::uint64_t total = cfg.epochs * steps_per_epoch;
  if (step < warmup) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total <= warmup + 1) return cfg.peak_lr;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total - 1 - warmup));
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

BatchPlan make_batches(const std::vector<TrainingPair>& pairs, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  if (pairs.size() < batch_size) {
    throw DataError("make_batches: " + std::to_string(pairs.size()) + " pairs is fewer than batch size " +
                    std::to_string(batch_size));
  }
  const std::size_t n = pairs.size();
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(pool[i], pool[uniform_index(rng, 0, i)]);

  BatchPlan plan;
  const std::size_t n_batches = n / batch_size;
  plan.batches.reserve(n_batches);
  std::size_t pos = 0;
  std::unordered_set<std::size_t> in_batch;
  for (std::size_t b = 0; b < n_batches; ++b) {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    in_batch.clear();
    for (std::size_t slot = 0; slot < batch_size; ++slot, ++pos) {
      std::size_t attempts = 0;
      while (in_batch.contains(pairs[pool[pos]].track) && attempts < kMaxCollisionRedraws && pos + 1 < n) {
        std::swap(pool[pos], pool[uniform_index(rng, pos + 1, n - 1)]);
        ++attempts;
      }
      if (in_batch.contains(pairs[pool[pos]].track)) ++plan.unresolved_collisions;
      in_batch.insert(pairs[pool[pos]].track);
      batch.push_back(pool[pos]);
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw DataError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (auto p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DataError("adam_step: state does not match parameters");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || state.m[t].size() != params[t].size()) {
      throw DataError("adam_step: shape mismatch in tensor " + std::to_string(t));
    }
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double batch_loss(const ProjectionHead& text_head, const ProjectionHead& audio_head, const Matrix& text_raw,
                  const Matrix& audio_raw, const LossConfig& cfg) {
  const auto t = forward(text_head, text_raw);
  const auto a = forward(audio_head, audio_raw);
  return nt_xent_loss(cosine_similarity_matrix(t.output, a.output, cfg.tau).z, cfg);
}

namespace {

std::string describe_batch(const std::vector<TrainingPair>& pairs, const std::vector<std::size_t>& batch) {
  std::ostringstream os;
  os << "pairs [";
  for (std::size_t i = 0; i < batch.size(); ++i) os << (i ? "," : "") << batch[i];
  os << "] tracks [";
  for (std::size_t i = 0; i < batch.size(); ++i) os << (i ? "," : "") << pairs[batch[i]].track;
  os << "]";
  return os.str();
}

}  // namespace

TrainResult train(const Dataset& dataset, const TextEmbeddingTable& text_table, const TextConfig& text_cfg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.audio_dim() == 0) throw DataError("train: dataset has no audio embeddings");
  if (text_table.size() == 0) throw DataError("train: raw text embedding table is empty");

  Rng rng(cfg.seed);
  const HeadShape text_shape{text_table.dim(), cfg.effective_hidden_dim(), cfg.latent_dim};
  const HeadShape audio_shape{dataset.audio_dim(), cfg.effective_hidden_dim(), cfg.latent_dim};
  TrainResult result;
  result.text_head = ProjectionHead::xavier(text_shape, rng);
  result.audio_head = ProjectionHead::xavier(audio_shape, rng);

  auto params = [&] {
    std::vector<std::span<double>> out;
    for (auto p : result.text_head.parameters()) out.push_back(p);
    for (auto p : result.audio_head.parameters()) out.push_back(p);
    return out;
  }();

  const LossConfig loss_cfg{cfg.tau, cfg.direction};
  const auto& tracks = dataset.tracks();
  AdamState adam;
  std::uint64_t global_step = 0;
  std::uint64_t steps_per_epoch = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto samples = build_training_samples(dataset, text_cfg, rng, /*require_audio=*/true);
    std::vector<TrainingPair> pairs;
    pairs.reserve(samples.size());
    for (const auto& s : samples) {
      const std::size_t track = *dataset.find(s.track_id);
      const auto chunk = static_cast<std::size_t>(uniform_index(rng, 0, tracks[track].audio_chunks.rows() - 1));
      pairs.push_back({track, s, chunk});
    }
    const BatchPlan plan = make_batches(pairs, cfg.batch_size, rng);
    result.unresolved_collisions += plan.unresolved_collisions;
    if (epoch == 0) {
      steps_per_epoch = plan.batches.size();
      result.steps_per_epoch = steps_per_epoch;
    }

    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& batch = plan.batches[b];
      Matrix text_raw(batch.size(), text_table.dim());
      Matrix audio_raw(batch.size(), dataset.audio_dim());
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto& pair = pairs[batch[r]];
        auto raw = text_table.at(pair.text.text);
        std::copy(raw.begin(), raw.end(), text_raw.row(r).begin());
        auto chunk = tracks[pair.track].audio_chunks.row(pair.chunk);
        std::copy(chunk.begin(), chunk.end(), audio_raw.row(r).begin());
      }

      const HeadForward tf = forward(result.text_head, std::move(text_raw));
      const HeadForward af = forward(result.audio_head, std::move(audio_raw));
      ContrastiveGradients cg;
      try {
        cg = nt_xent_backward(tf.output, af.output, loss_cfg);
      } catch (const DataError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what() +
                           "; " + describe_batch(pairs, batch));
      }
      if (!std::isfinite(cg.loss) || !all_finite(cg.text.values()) || !all_finite(cg.audio.values())) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           "; " + describe_batch(pairs, batch));
      }
      if (epoch == 0 && b == 0) result.first_batch_loss = cg.loss;
      loss_sum += cg.loss;

      const HeadGradients tg = head_backward(result.text_head, tf, cg.text);
      const HeadGradients ag = head_backward(result.audio_head, af, cg.audio);
      std::vector<std::span<const double>> grads;
      for (auto g : tg.parameters()) grads.push_back(g);
      for (auto g : ag.parameters()) grads.push_back(g);

      lr = lr_at_step(global_step, steps_per_epoch, cfg);
      adam_step(params, grads, adam, lr, cfg.adam);
      ++global_step;
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(plan.batches.size()), lr};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace xmusim
