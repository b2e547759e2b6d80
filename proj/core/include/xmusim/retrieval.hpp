#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmusim/contrastive.hpp"
#include "xmusim/dataset.hpp"
#include "xmusim/text_table.hpp"

namespace xmusim {

/// Projects every chunk and returns the arithmetic mean of the projections (not
/// normalised). Each coordinate is summed in sorted order, so any permutation of the
/// chunks yields a bit-identical result. Throws DataError for an empty chunk list.
Vector embed_track(const Matrix& audio_chunks, const ProjectionHead& audio_head);

/// Exact cosine index over unit-normalised vectors.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  /// Normalises each row. Throws DataError on duplicate ids, zero-norm or non-finite rows.
  EmbeddingIndex(std::vector<std::string> ids, Matrix vectors);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  std::optional<std::size_t> find(std::string_view id) const;

  /// Persists as an embedding store (float32); loading re-normalises in double precision.
  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  std::vector<std::string> ids_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// embed_track for every track, then L2 normalisation. Throws DataError naming the track
/// when it has no audio or its pooled embedding has zero norm.
EmbeddingIndex build_index(const Dataset& dataset, const ProjectionHead& audio_head);

struct ScoredId {
  std::string id;
  double score = 0.0;
};

struct ScoredRow {
  std::size_t row = 0;
  double score = 0.0;
};

/// Exact ranking: cosine score descending, ties by ascending id. `exclude` drops that id.
/// k larger than the index returns the full ranking. Throws for k == 0 or a zero query.
std::vector<ScoredId> top_k(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                            std::optional<std::string_view> exclude = std::nullopt);

/// Same ranking, by row, for a query that is already an index row.
std::vector<ScoredRow> top_k_rows(const EmbeddingIndex& index, std::size_t query_row, std::size_t k,
                                  bool exclude_self = true);

/// Raw text embedding lookup followed by the text projection head.
Vector embed_text_query(std::string_view text, const TextEmbeddingTable& table, const ProjectionHead& text_head);

}  // namespace xmusim
