#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "xmusim/error.hpp"
#include "xmusim/synth.hpp"
#include "xmusim/trainer.hpp"

using namespace xmusim;

namespace {

std::vector<TrainingPair> pairs_over(std::size_t n_pairs, std::size_t n_tracks) {
  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    pairs.push_back({i % n_tracks, TextSample{"trk-" + std::to_string(i % n_tracks), "text", TextKind::aspect}, 0});
  }
  return pairs;
}

const SynthOutput& small_synth() {
  static const SynthOutput out = [] {
    SynthConfig cfg;
    cfg.n_tracks = 120;
    cfg.n_clusters = 6;
    cfg.artists_per_cluster = 5;
    cfg.raw_text_dim = 24;
    cfg.raw_audio_dim = 20;
    cfg.artist_dim = 8;
    cfg.min_chunks = 2;
    cfg.max_chunks = 4;
    return generate(cfg);
  }();
  return out;
}

TrainConfig small_train() {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.latent_dim = 12;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("lr_at_step: warmup ramp, peak, cosine midpoint and end") {
  TrainConfig cfg;  // 40 epochs, 1 warmup epoch, peak 1e-4
  const std::uint64_t spe = 10;
  CHECK(lr_at_step(0, spe, cfg) == 0.0);
  CHECK(lr_at_step(5, spe, cfg) == doctest::Approx(5e-5).epsilon(1e-12));
  CHECK(lr_at_step(10, spe, cfg) == doctest::Approx(1e-4).epsilon(1e-12));
  const std::uint64_t last = cfg.epochs * spe - 1;
  CHECK(std::abs(lr_at_step(last, spe, cfg)) < 1e-20);

  // Decay runs over steps 10..399; its midpoint falls between two steps.
  const double mid_lo = lr_at_step(204, spe, cfg);
  const double mid_hi = lr_at_step(205, spe, cfg);
  CHECK(mid_lo >= 5e-5);
  CHECK(mid_hi <= 5e-5);
  const double one_step = 1e-4 * std::numbers::pi / 2.0 / 389.0;
  CHECK(std::abs(mid_lo - 5e-5) <= one_step);
  CHECK(std::abs(mid_hi - 5e-5) <= one_step);

  // Closed form at an arbitrary decay step.
  const double p = (300.0 - 10.0) / 389.0;
  CHECK(lr_at_step(300, spe, cfg) == doctest::Approx(1e-4 * 0.5 * (1.0 + std::cos(std::numbers::pi * p))).epsilon(1e-13));
}

TEST_CASE("lr_at_step is continuous, monotone in decay and non-negative") {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.warmup_epochs = 2;
  const std::uint64_t spe = 13;
  const double per_step = cfg.peak_lr / static_cast<double>(2 * spe);
  double prev = lr_at_step(0, spe, cfg);
  for (std::uint64_t s = 1; s < cfg.epochs * spe; ++s) {
    const double lr = lr_at_step(s, spe, cfg);
    CHECK(lr >= 0.0);
    CHECK(lr <= cfg.peak_lr);
    CHECK(std::abs(lr - prev) <= per_step * 1.0000001);
    if (s > 2 * spe) CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_at_step(0, 0, cfg), UsageError);
}

TEST_CASE("make_batches: counts, determinism and errors") {
  const auto pairs = pairs_over(130, 130);
  Rng a(1), b(1);
  const auto pa = make_batches(pairs, 64, a);
  const auto pb = make_batches(pairs, 64, b);
  REQUIRE(pa.batches.size() == 2);
  CHECK(pa.batches[0].size() == 64);
  CHECK(pa.batches[1].size() == 64);
  CHECK(pa.batches == pb.batches);
  std::set<std::size_t> used;
  for (const auto& batch : pa.batches) used.insert(batch.begin(), batch.end());
  CHECK(used.size() == 128);

  Rng c(2);
  CHECK(make_batches(pairs, 64, c).batches != pa.batches);
  Rng d(3);
  CHECK_THROWS_AS(make_batches(pairs_over(10, 10), 16, d), DataError);
}

TEST_CASE("make_batches never puts one track twice in a batch") {
  // Three texts per track, so a plain shuffle would collide often.
  const auto pairs = pairs_over(300, 100);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto plan = make_batches(pairs, 32, rng);
    CHECK(plan.unresolved_collisions == 0);
    for (const auto& batch : plan.batches) {
      std::set<std::size_t> tracks;
      for (std::size_t i : batch) tracks.insert(pairs[i].track);
      CHECK(tracks.size() == batch.size());
    }
  }
}

TEST_CASE("adam_step: zero gradient leaves parameters unchanged") {
  std::vector<double> theta{0.5, -1.25, 3.0};
  const std::vector<double> before = theta;
  std::vector<double> grad(3, 0.0);
  std::vector<std::span<double>> params{theta};
  std::vector<std::span<const double>> grads{grad};
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(params, grads, state, 1e-3, {});
  CHECK(theta == before);
  CHECK(state.step == 5);
}

TEST_CASE("adam_step matches the scalar recurrence oracle") {
  std::vector<double> theta{0.0};
  const std::vector<double> g1{1.0};
  std::vector<std::span<double>> params{theta};
  std::vector<std::span<const double>> grads{g1};
  AdamState state;
  adam_step(params, grads, state, 1e-4, {});
  CHECK(std::abs(theta[0] - oracle::adam_scalar(0.0, {1.0}, {1e-4}, 0.9, 0.999, 1e-8)) <= 1e-12);
  CHECK(theta[0] == doctest::Approx(-9.99e-5).epsilon(1e-3));

  Rng rng(8);
  std::vector<double> x{0.3};
  std::vector<double> gs, lrs;
  AdamState s2;
  std::vector<double> g(1);
  std::vector<std::span<double>> px{x};
  std::vector<std::span<const double>> pg{g};
  for (int step = 0; step < 50; ++step) {
    g[0] = uniform_unit(rng) * 2.0 - 1.0;
    const double lr = 1e-3 * uniform_unit(rng);
    gs.push_back(g[0]);
    lrs.push_back(lr);
    adam_step(px, pg, s2, lr, {0.8, 0.99, 1e-6});
  }
  CHECK(std::abs(x[0] - oracle::adam_scalar(0.3, gs, lrs, 0.8, 0.99, 1e-6)) <= 1e-12);
}

TEST_CASE("adam_step rejects mismatched shapes") {
  std::vector<double> theta(3), grad(2);
  std::vector<std::span<double>> params{theta};
  std::vector<std::span<const double>> grads{grad};
  AdamState state;
  CHECK_THROWS_AS(adam_step(params, grads, state, 1e-3, {}), DataError);
  std::vector<std::span<const double>> none;
  AdamState s2;
  CHECK_THROWS_AS(adam_step(params, none, s2, 1e-3, {}), DataError);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = {};
  cfg.epochs = 0;
  cfg.warmup_epochs = 1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = {};
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = {};
  cfg.peak_lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("train with zero learning rate leaves the initial heads in place") {
  const auto& s = small_synth();
  const TextEmbeddingTable table(s.text_table);
  TrainConfig cfg = small_train();
  cfg.epochs = 1;
  cfg.peak_lr = 0.0;
  const TrainResult r = train(s.dataset, table, {}, cfg);

  Rng rng(cfg.seed);
  const ProjectionHead t0 = ProjectionHead::xavier({24, 12, 12}, rng);
  const ProjectionHead a0 = ProjectionHead::xavier({20, 12, 12}, rng);
  CHECK(r.text_head == t0);
  CHECK(r.audio_head == a0);
  REQUIRE(r.history.size() == 1);
  CHECK(r.steps_per_epoch > 0);
}

TEST_CASE("train is bit-deterministic and reduces the loss") {
  const auto& s = small_synth();
  const TextEmbeddingTable table(s.text_table);
  TrainConfig cfg = small_train();
  cfg.epochs = 6;
  cfg.peak_lr = 3e-3;
  std::vector<EpochStats> seen;
  const TrainResult a = train(s.dataset, table, {}, cfg, [&](const EpochStats& e) { seen.push_back(e); });
  const TrainResult b = train(s.dataset, table, {}, cfg);
  CHECK(a.text_head == b.text_head);
  CHECK(a.audio_head == b.audio_head);
  REQUIRE(a.history.size() == 6);
  for (std::size_t e = 0; e < 6; ++e) {
    CHECK(a.history[e].mean_loss == b.history[e].mean_loss);
    CHECK(seen[e].mean_loss == a.history[e].mean_loss);
    CHECK(a.history[e].epoch == e);
  }
  CHECK(a.history.back().lr == 0.0);
  CHECK(a.history.back().mean_loss < a.history.front().mean_loss);
  CHECK(a.first_batch_loss > 0.0);
  CHECK(std::isfinite(a.first_batch_loss));

  cfg.seed = 6;
  CHECK_FALSE(train(s.dataset, table, {}, cfg).text_head == a.text_head);
}

TEST_CASE("train rejects datasets smaller than one batch") {
  const auto& s = small_synth();
  const TextEmbeddingTable table(s.text_table);
  TrainConfig cfg = small_train();
  cfg.batch_size = 1000;
  TextConfig text;
  text.use_captions = false;
  text.use_lyrics = false;
  CHECK_THROWS_AS(train(s.dataset, table, text, cfg), DataError);
}
