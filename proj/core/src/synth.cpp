#include "xmusim/synth.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "xmusim/contrastive.hpp"
#include "xmusim/error.hpp"
#include "xmusim/text_pipeline.hpp"

namespace xmusim {

namespace {

constexpr std::array<const char*, 5> kGenres = {"pop", "rock", "jazz", "electronic", "folk"};
constexpr std::array<const char*, 4> kMoods = {"happy", "sad", "calm", "energetic"};
constexpr std::array<const char*, 3> kScenarios = {"party", "study", "workout"};
constexpr std::array<const char*, 6> kInstruments = {"piano", "guitar", "synth", "strings", "drums", "brass"};

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

int digits(std::size_t n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

double normal(Rng& rng) {
  const double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector normal_vector(Rng& rng, std::size_t dim, double scale = 1.0) {
  Vector v(dim);
  for (auto& x : v) x = normal(rng) * scale;
  return v;
}

Vector unit_vector(Rng& rng, std::size_t dim) {
  Vector v;
  double n = 0.0;
  do {
    v = normal_vector(rng, dim);
    n = l2_norm(v);
  } while (n == 0.0);
  for (auto& x : v) x /= n;
  return v;
}

// dim x cols matrix with N(0, 1/cols) entries.
Matrix random_projection(Rng& rng, std::size_t dim, std::size_t cols) {
  Matrix p(dim, cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& x : p.values()) x = normal(rng) * s;
  return p;
}

// Orthonormal basis (rank vectors) via Gram-Schmidt on Gaussian draws.
std::vector<Vector> orthonormal_basis(Rng& rng, std::size_t dim, std::size_t rank) {
  std::vector<Vector> basis;
  while (basis.size() < rank) {
    Vector v = normal_vector(rng, dim);
    for (const auto& b : basis) {
      const double d = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * b[i];
    }
    const double n = l2_norm(v);
    if (n < 1e-6) continue;
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

void axpy(Vector& y, double a, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

Vector mat_vec(const Matrix& m, std::span<const double> x) {
  Vector y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

// Normalised, then rounded to float32 so stored and in-memory values agree.
Vector finish(Vector v) {
  const double n = l2_norm(v);
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x / n));
  return v;
}

struct CoarseTriple {
  std::string genre, mood, scenario;
};

CoarseTriple coarse_for(std::size_t cluster) {
  return {kGenres[cluster % kGenres.size()], kMoods[(cluster / kGenres.size()) % kMoods.size()],
          kScenarios[cluster % kScenarios.size()]};
}

std::vector<std::string> lyric_lines(const std::string& artist, const std::string& fine) {
  return {artist + " opens the " + fine + " verse",
          "a " + fine + " chorus that " + artist + " keeps singing",
          artist + " returns for the second " + fine + " verse",
          "the " + fine + " outro fades while " + artist + " hums"};
}

// Accumulates, for every distinct text, the clusters that produce it and whether it names
// its producer's artist.
struct TextPlan {
  struct Entry {
    std::vector<std::size_t> clusters;  // with repetition, one per producing track or tag member
    std::optional<std::size_t> artist;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Entry> entries;

  void add(const std::string& text, std::size_t cluster, std::optional<std::size_t> artist) {
    auto [it, fresh] = entries.try_emplace(text);
    if (fresh) order.push_back(text);
    it->second.clusters.push_back(cluster);
    if (artist && !it->second.artist) it->second.artist = artist;
  }
};

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) { throw UsageError("synth: " + field + " " + why); };
  if (n_tracks == 0) bad("n_tracks", "must be >= 1");
  if (n_clusters == 0) bad("n_clusters", "must be >= 1");
  if (n_clusters > n_tracks) bad("n_clusters", "must not exceed n_tracks");
  if (raw_text_dim == 0) bad("raw_text_dim", "must be >= 1");
  if (raw_audio_dim == 0) bad("raw_audio_dim", "must be >= 1");
  if (min_chunks == 0) bad("min_chunks", "must be >= 1");
  if (max_chunks < min_chunks) bad("max_chunks", "must be >= min_chunks");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma", "must be finite and >= 0");
  if (artists_per_cluster == 0) bad("artists_per_cluster", "must be >= 1");
  if (artist_dim == 0) bad("artist_dim", "must be >= 1");
  if (!(artist_weight >= 0.0) || !std::isfinite(artist_weight)) bad("artist_weight", "must be finite and >= 0");
  if (nuisance_rank > raw_audio_dim) bad("nuisance_rank", "must not exceed raw_audio_dim");
  if (!(nuisance_scale >= 0.0) || !std::isfinite(nuisance_scale)) bad("nuisance_scale", "must be finite and >= 0");
  if (!(anisotropy >= 0.0) || !std::isfinite(anisotropy)) bad("anisotropy", "must be finite and >= 0");
}

std::string cluster_label(std::size_t cluster, std::size_t n_clusters) {
  return "style-" + zero_pad(cluster, std::max(2, digits(n_clusters - 1)));
}

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t C = cfg.n_clusters;
  const std::size_t dt = cfg.raw_text_dim;
  const std::size_t da = cfg.raw_audio_dim;
  const std::size_t n_artists = C * cfg.artists_per_cluster;

  // Planted geometry, drawn in a fixed order.
  std::vector<Vector> concept_text, concept_audio;
  for (std::size_t c = 0; c < C; ++c) concept_text.push_back(unit_vector(rng, dt));
  for (std::size_t c = 0; c < C; ++c) concept_audio.push_back(unit_vector(rng, da));
  Vector offset_text = unit_vector(rng, dt);
  Vector offset_audio = unit_vector(rng, da);
  for (auto& x : offset_text) x *= cfg.anisotropy;
  for (auto& x : offset_audio) x *= cfg.anisotropy;
  const Matrix proj_text = random_projection(rng, dt, cfg.artist_dim);
  const Matrix proj_audio = random_projection(rng, da, cfg.artist_dim);
  std::vector<Vector> sig_text, sig_audio;
  for (std::size_t a = 0; a < n_artists; ++a) {
    const Vector s = unit_vector(rng, cfg.artist_dim);
    sig_text.push_back(mat_vec(proj_text, s));
    sig_audio.push_back(mat_vec(proj_audio, s));
  }
  const auto nuisance_basis = orthonormal_basis(rng, da, cfg.nuisance_rank);

  SynthOutput out;
  auto& manifest = out.manifest;
  manifest.config = cfg;
  for (std::size_t c = 0; c < C; ++c) manifest.cluster_labels.push_back(cluster_label(c, C));

  const int id_width = std::max(4, digits(cfg.n_tracks));
  const int cl_width = std::max(2, digits(C - 1));
  const int ar_width = std::max(2, digits(cfg.artists_per_cluster - 1));
  const double nuisance_coeff = cfg.nuisance_rank == 0 ? 0.0 : cfg.nuisance_scale / std::sqrt(static_cast<double>(cfg.nuisance_rank));

  std::vector<TrackRecord> tracks;
  std::vector<std::string> audio_ids;
  Matrix audio_rows(0, da);
  TextPlan plan;
  for (std::size_t i = 0; i < cfg.n_tracks; ++i) {
    const std::size_t c = i % C;
    const std::size_t local_artist = (i / C) % cfg.artists_per_cluster;
    const std::size_t a = c * cfg.artists_per_cluster + local_artist;
    const CoarseTriple coarse = coarse_for(c);
    const std::string& fine = manifest.cluster_labels[c];

    TrackRecord t;
    t.id = "trk-" + zero_pad(i, id_width);
    t.title = "Song " + zero_pad(i, id_width);
    t.artist = "Artist C" + zero_pad(c, cl_width) + "A" + zero_pad(local_artist, ar_width);
    t.language = "en";
    t.coarse_tags = {{CoarseCategory::genre, coarse.genre},
                     {CoarseCategory::mood, coarse.mood},
                     {CoarseCategory::scenario, coarse.scenario}};
    t.fine_tags = {fine};
    const std::string instrument = kInstruments[uniform_index(rng, 0, kInstruments.size() - 1)];
    t.aspects = {fine, coarse.genre, coarse.mood, coarse.scenario, instrument, t.artist};
    t.captions = {t.title + " by " + t.artist + " is a " + coarse.genre + " track in the " + fine + " style. It sounds " +
                  coarse.mood + " with " + instrument + " up front. Good for " + coarse.scenario + "."};
    const auto lines = lyric_lines(t.artist, fine);
    for (std::size_t l = 0; l < lines.size(); ++l) t.lyrics += (l ? "\n" : "") + lines[l];

    Vector nuisance(da, 0.0);
    for (const auto& b : nuisance_basis) axpy(nuisance, normal(rng) * nuisance_coeff, b);
    const std::size_t n_chunks = uniform_index(rng, cfg.min_chunks, cfg.max_chunks);
    t.audio_chunks = Matrix(0, da);
    for (std::size_t k = 0; k < n_chunks; ++k) {
      Vector v = offset_audio;
      axpy(v, 1.0, concept_audio[c]);
      axpy(v, cfg.artist_weight, sig_audio[a]);
      axpy(v, 1.0, nuisance);
      axpy(v, 1.0, normal_vector(rng, da, cfg.noise_sigma));
      v = finish(std::move(v));
      t.audio_chunks.append_row(v);
      audio_rows.append_row(v);
      audio_ids.push_back(t.id + "#" + std::to_string(k));
    }

    for (bool mask : {false, true}) {
      TextConfig tc;
      tc.mask = mask;
      for (const auto& text : enumerate_text_variants(t, tc)) {
        plan.add(text, c, text.find(t.artist) != std::string::npos ? std::optional(a) : std::nullopt);
      }
    }
    manifest.tracks.push_back({t.id, c, a, t.artist});
    tracks.push_back(std::move(t));
  }

  // Tag-query texts carry the mean centre of every track holding the tag.
  for (const auto& a : manifest.tracks) {
    const CoarseTriple coarse = coarse_for(a.cluster);
    const std::string& fine = manifest.cluster_labels[a.cluster];
    for (const auto* label : {&coarse.genre, &coarse.mood, &coarse.scenario, &fine}) plan.add(*label, a.cluster, std::nullopt);
    ++manifest.coarse_counts["genre:" + coarse.genre];
    ++manifest.coarse_counts["mood:" + coarse.mood];
    ++manifest.coarse_counts["scenario:" + coarse.scenario];
    ++manifest.fine_counts[fine];
  }

  Matrix text_rows(0, dt);
  for (const auto& text : plan.order) {
    const auto& e = plan.entries.at(text);
    Vector v = offset_text;
    const double w = 1.0 / static_cast<double>(e.clusters.size());
    Vector centre(dt, 0.0);
    for (std::size_t c : e.clusters) axpy(centre, w, concept_text[c]);
    axpy(v, 1.0, centre);
    if (e.artist) axpy(v, cfg.artist_weight, sig_text[*e.artist]);
    axpy(v, 1.0, normal_vector(rng, dt, cfg.noise_sigma));
    text_rows.append_row(finish(std::move(v)));
  }

  out.dataset = Dataset(std::move(tracks));
  out.text_table = EmbeddingStore{plan.order, std::move(text_rows)};
  out.audio_store = EmbeddingStore{std::move(audio_ids), std::move(audio_rows)};
  return out;
}

SynthPaths synth_paths(const std::filesystem::path& dataset_path) {
  const auto stem = dataset_path.stem().string();
  const auto dir = dataset_path.parent_path();
  return {dataset_path, dir / (stem + ".audio.xmsm"), dir / (stem + ".text.xmsm"), dir / (stem + ".manifest.json")};
}

SynthPaths write_synth(const SynthOutput& out, const std::filesystem::path& dataset_path) {
  const SynthPaths paths = synth_paths(dataset_path);
  write_embedding_store(out.audio_store, paths.audio_store);
  write_embedding_store(out.text_table, paths.text_table);

  std::vector<TrackRecord> tracks = out.dataset.tracks();
  std::uint64_t row = 0;
  for (auto& t : tracks) {
    AudioStoreRef ref{paths.audio_store.filename().string(), {}};
    for (std::size_t k = 0; k < t.audio_chunks.rows(); ++k) ref.rows.push_back(row++);
    t.audio_ref = std::move(ref);
  }
  write_dataset(Dataset(std::move(tracks)), paths.dataset);

  std::ofstream f(paths.manifest, std::ios::binary);
  if (!f) throw DataError("cannot write " + paths.manifest.string());
  f << manifest_to_json(out.manifest);
  if (!f) throw DataError("failed writing " + paths.manifest.string());
  return paths;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json config_json(const SynthConfig& c) {
  return {{"n_tracks", c.n_tracks},
          {"n_clusters", c.n_clusters},
          {"raw_text_dim", c.raw_text_dim},
          {"raw_audio_dim", c.raw_audio_dim},
          {"min_chunks", c.min_chunks},
          {"max_chunks", c.max_chunks},
          {"noise_sigma", c.noise_sigma},
          {"artists_per_cluster", c.artists_per_cluster},
          {"seed", c.seed},
          {"artist_dim", c.artist_dim},
          {"artist_weight", c.artist_weight},
          {"nuisance_rank", c.nuisance_rank},
          {"nuisance_scale", c.nuisance_scale},
          {"anisotropy", c.anisotropy}};
}

}  // namespace

std::string manifest_to_json(const SynthManifest& m) {
  ordered_json j;
  j["config"] = config_json(m.config);
  j["cluster_labels"] = m.cluster_labels;
  ordered_json tracks = ordered_json::array();
  for (const auto& t : m.tracks) {
    tracks.push_back({{"id", t.id}, {"cluster", t.cluster}, {"artist_index", t.artist_index}, {"artist", t.artist}});
  }
  j["tracks"] = std::move(tracks);
  j["tag_counts"] = {{"coarse", m.coarse_counts}, {"fine", m.fine_counts}};
  return j.dump(2) + "\n";
}

SynthManifest manifest_from_json(const std::string& text) {
  SynthManifest m;
  try {
    const auto j = ordered_json::parse(text);
    const auto& c = j.at("config");
    SynthConfig& cfg = m.config;
    cfg.n_tracks = c.at("n_tracks").get<std::size_t>();
    cfg.n_clusters = c.at("n_clusters").get<std::size_t>();
    cfg.raw_text_dim = c.at("raw_text_dim").get<std::size_t>();
    cfg.raw_audio_dim = c.at("raw_audio_dim").get<std::size_t>();
    cfg.min_chunks = c.at("min_chunks").get<std::size_t>();
    cfg.max_chunks = c.at("max_chunks").get<std::size_t>();
    cfg.noise_sigma = c.at("noise_sigma").get<double>();
    cfg.artists_per_cluster = c.at("artists_per_cluster").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.artist_dim = c.at("artist_dim").get<std::size_t>();
    cfg.artist_weight = c.at("artist_weight").get<double>();
    cfg.nuisance_rank = c.at("nuisance_rank").get<std::size_t>();
    cfg.nuisance_scale = c.at("nuisance_scale").get<double>();
    cfg.anisotropy = c.at("anisotropy").get<double>();
    m.cluster_labels = j.at("cluster_labels").get<std::vector<std::string>>();
    for (const auto& t : j.at("tracks")) {
      m.tracks.push_back({t.at("id").get<std::string>(), t.at("cluster").get<std::size_t>(),
                          t.at("artist_index").get<std::size_t>(), t.at("artist").get<std::string>()});
    }
    m.coarse_counts = j.at("tag_counts").at("coarse").get<std::map<std::string, std::size_t>>();
    m.fine_counts = j.at("tag_counts").at("fine").get<std::map<std::string, std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  return m;
}

SynthManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return manifest_from_json(ss.str());
}

}  // namespace xmusim
