#include "xmusim/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "xmusim/embedding_store.hpp"
#include "xmusim/error.hpp"

namespace xmusim {

Vector embed_track(const Matrix& audio_chunks, const ProjectionHead& audio_head) {
  if (audio_chunks.rows() == 0) throw DataError("embed_track: no audio chunks");
  const std::size_t k = audio_chunks.rows();
  Matrix projected(k, audio_head.w2.rows());
  for (std::size_t c = 0; c < k; ++c) {
    const Vector p = project(audio_head, audio_chunks.row(c));
    std::copy(p.begin(), p.end(), projected.row(c).begin());
  }
  Vector mean(projected.cols());
  Vector column(k);
  for (std::size_t d = 0; d < mean.size(); ++d) {
    for (std::size_t c = 0; c < k; ++c) column[c] = projected(c, d);
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    mean[d] = sum / static_cast<double>(k);
  }
  return mean;
}

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, Matrix vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (ids_.size() != vectors_.rows()) throw DataError("index: id count differs from vector count");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!by_id_.emplace(ids_[i], i).second) throw DataError("index: duplicate id '" + ids_[i] + "'");
    auto row = vectors_.row(i);
    if (!all_finite(row)) throw DataError("index: non-finite embedding for '" + ids_[i] + "'");
    const double n = l2_norm(row);
    if (!(n > 0.0)) throw DataError("index: zero-norm embedding for '" + ids_[i] + "'");
    for (double& v : row) v /= n;
  }
}

std::optional<std::size_t> EmbeddingIndex::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingIndex::save(const std::filesystem::path& path) const { write_embedding_store(ids_, vectors_, path); }

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  EmbeddingStore store = read_embedding_store(path);
  return EmbeddingIndex(std::move(store.ids), std::move(store.vectors));
}

EmbeddingIndex build_index(const Dataset& dataset, const ProjectionHead& audio_head) {
  if (dataset.size() == 0) throw DataError("build_index: empty dataset");
  std::vector<std::string> ids;
  Matrix vectors;
  for (const auto& t : dataset.tracks()) {
    if (t.audio_chunks.rows() == 0) throw DataError("build_index: track '" + t.id + "' has no audio chunks");
    const Vector e = embed_track(t.audio_chunks, audio_head);
    if (!(l2_norm(e) > 0.0)) throw DataError("build_index: track '" + t.id + "' has a zero-norm embedding");
    ids.push_back(t.id);
    vectors.append_row(e);
  }
  return EmbeddingIndex(std::move(ids), std::move(vectors));
}

namespace {

template <class Keep>
std::vector<ScoredRow> rank(const EmbeddingIndex& index, std::span<const double> unit_query, std::size_t k,
                            Keep keep) {
  std::vector<ScoredRow> scored;
  scored.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (!keep(r)) continue;
    scored.push_back({r, dot(index.vectors().row(r), unit_query)});
  }
  const auto& ids = index.ids();
  auto better = [&](const ScoredRow& a, const ScoredRow& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids[a.row] < ids[b.row];
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
  scored.resize(n);
  return scored;
}

}  // namespace

std::vector<ScoredId> top_k(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                            std::optional<std::string_view> exclude) {
  if (k == 0) throw UsageError("top_k: k must be >= 1");
  if (query.size() != index.dim()) throw DataError("top_k: query dimension differs from index dimension");
  const double n = l2_norm(query);
  if (!(n > 0.0) || !std::isfinite(n)) throw DataError("top_k: query has zero or non-finite norm");
  Vector unit(query.begin(), query.end());
  for (double& v : unit) v /= n;

  std::optional<std::size_t> skip;
  if (exclude) skip = index.find(*exclude);
  auto rows = rank(index, unit, k, [&](std::size_t r) { return !skip || r != *skip; });
  std::vector<ScoredId> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({index.ids()[r.row], r.score});
  return out;
}

std::vector<ScoredRow> top_k_rows(const EmbeddingIndex& index, std::size_t query_row, std::size_t k,
                                  bool exclude_self) {
  if (k == 0) throw UsageError("top_k: k must be >= 1");
  if (query_row >= index.size()) throw DataError("top_k: query row out of range");
  return rank(index, index.vectors().row(query_row), k,
              [&](std::size_t r) { return !exclude_self || r != query_row; });
}

Vector embed_text_query(std::string_view text, const TextEmbeddingTable& table, const ProjectionHead& text_head) {
  return project(text_head, table.at(text));
}

}  // namespace xmusim
