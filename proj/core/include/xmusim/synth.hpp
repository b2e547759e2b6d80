#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xmusim/dataset.hpp"
#include "xmusim/embedding_store.hpp"

namespace xmusim {

struct SynthConfig {
  std::size_t n_tracks = 1000;
  std::size_t n_clusters = 20;
  std::size_t raw_text_dim = 128;
  std::size_t raw_audio_dim = 128;
  std::size_t min_chunks = 6;
  std::size_t max_chunks = 12;
  double noise_sigma = 0.05;
  std::size_t artists_per_cluster = 25;
  std::uint64_t seed = 7;

  // Artist signature shared by the audio and by texts that name the artist.
  std::size_t artist_dim = 64;
  double artist_weight = 0.55;
  // Per-track low-rank audio offset that carries no tag or artist information.
  std::size_t nuisance_rank = 2;
  double nuisance_scale = 2.5;
  // Length of a fixed offset added to every raw vector of a modality.
  double anisotropy = 2.0;

  /// Throws UsageError naming the offending field.
  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

struct TrackAssignment {
  std::string id;
  std::size_t cluster = 0;
  std::size_t artist_index = 0;
  std::string artist;
};

struct SynthManifest {
  SynthConfig config;
  std::vector<TrackAssignment> tracks;
  std::vector<std::string> cluster_labels;      // fine label of each cluster
  std::map<std::string, std::size_t> coarse_counts;  // "genre:pop" -> tracks
  std::map<std::string, std::size_t> fine_counts;
};

struct SynthOutput {
  Dataset dataset;              // audio rows already rounded to float32
  EmbeddingStore text_table;    // raw text embeddings keyed by exact text
  EmbeddingStore audio_store;   // every audio chunk, ids "<track>#<chunk>"
  SynthManifest manifest;
};

/// Fine label of cluster c, e.g. "style-07".
std::string cluster_label(std::size_t cluster, std::size_t n_clusters);

SynthOutput generate(const SynthConfig& cfg);

struct SynthPaths {
  std::filesystem::path dataset;
  std::filesystem::path audio_store;
  std::filesystem::path text_table;
  std::filesystem::path manifest;
};

/// Sibling files named after the dataset stem: <stem>.audio.xmsm, <stem>.text.xmsm and
/// <stem>.manifest.json.
SynthPaths synth_paths(const std::filesystem::path& dataset_path);

/// Writes all four files. Dataset records reference the audio store by file name.
SynthPaths write_synth(const SynthOutput& out, const std::filesystem::path& dataset_path);

std::string manifest_to_json(const SynthManifest& manifest);
SynthManifest manifest_from_json(const std::string& text);
SynthManifest read_manifest(const std::filesystem::path& path);

}  // namespace xmusim
