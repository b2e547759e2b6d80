#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "xmusim/dataset.hpp"
#include "xmusim/retrieval.hpp"

namespace xmusim {

/// |top-k ∩ relevant| / |relevant|. Throws DataError when `relevant` is empty.
double recall_at_k(std::span<const std::string> ranking, const std::unordered_set<std::string>& relevant,
                   std::size_t k);

/// (1 / min(|relevant|, k)) * sum_{r <= k} precision(r) * rel(r).
double average_precision_at_k(std::span<const std::string> ranking, const std::unordered_set<std::string>& relevant,
                              std::size_t k);

/// Same quantity from per-rank relevance flags (rank 1 first) and the relevant-set size.
double average_precision_at_k(std::span<const char> relevant_flags, std::size_t n_relevant, std::size_t k);

/// Per-row nearest neighbours (self excluded) under the canonical top-k tie rule.
struct NeighborTable {
  std::size_t k = 0;
  std::vector<std::vector<ScoredRow>> rows;
};

NeighborTable compute_neighbors(const EmbeddingIndex& index, std::size_t k);

struct TagQuery {
  std::string text;                   // query text fed to the text encoder
  std::vector<std::string> relevant;  // track ids carrying the tag
};

/// One query per distinct tag text at the level. Coarse keys contribute their bare label;
/// labels shared across categories are merged into one query.
std::vector<TagQuery> build_tag_queries(const Dataset& dataset, TagLevel level);

struct T2MMetrics {
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double map_at_10 = 0.0;
  std::size_t n_queries = 0;
};

/// Per-query R@1, R@5 and AP@10 averaged uniformly over the queries.
T2MMetrics eval_t2m(const EmbeddingIndex& index, const std::vector<TagQuery>& queries,
                    const ProjectionHead& text_head, const TextEmbeddingTable& table);

enum class M2MMode { per_tag, per_query };

const char* to_string(M2MMode mode) noexcept;
std::optional<M2MMode> parse_m2m_mode(std::string_view name) noexcept;

struct TagScore {
  std::string tag;
  double ap = 0.0;  // mean AP@k over the tag's queries
  std::size_t n_queries = 0;
};

struct M2MResult {
  double map = 0.0;
  std::size_t n_units = 0;          // tags (per_tag) or queries (per_query) averaged
  std::vector<TagScore> per_tag;    // filled in per_tag mode
};

/// Query-by-example mAP@k. per_tag: every tagged track queries the index (self excluded),
/// positives are the other tracks with that tag; AP is averaged within each tag and then
/// over tags. per_query: positives share at least one tag at the level; AP is averaged
/// over queries. Tags or queries without any positive are skipped.
/// The index and dataset must hold the same track ids.
M2MResult eval_m2m(const EmbeddingIndex& index, const Dataset& dataset, TagLevel level, M2MMode mode,
                   std::size_t k = 100);
M2MResult eval_m2m(const EmbeddingIndex& index, const NeighborTable& neighbors, const Dataset& dataset,
                   TagLevel level, M2MMode mode);

struct SameArtistStats {
  double ratio_with_hit = 0.0;  // fraction of queries with >= 1 same-artist track in the top k
  double mean_hits = 0.0;       // mean number of same-artist tracks in the top k
  std::size_t n_queries = 0;
  std::size_t k = 100;
};

/// Tracks with an empty artist are neither queries nor hits.
SameArtistStats same_artist_ratio(const EmbeddingIndex& index, const Dataset& dataset, std::size_t k = 100);
SameArtistStats same_artist_ratio(const EmbeddingIndex& index, const NeighborTable& neighbors,
                                  const Dataset& dataset);

struct M2MScores {
  std::optional<double> coarse;
  std::optional<double> fine;
};

struct EvalReport {
  std::map<std::string, std::string> config;  // effective configuration and input digests
  std::optional<T2MMetrics> t2m;
  std::map<std::string, M2MScores> m2m;  // keyed by mode name
  std::optional<SameArtistStats> same_artist;
  std::vector<TagScore> per_tag_coarse;
  std::vector<TagScore> per_tag_fine;
};

std::string to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

/// Markdown table with columns R@1, R@5, mAP@10, Coarse, Fine (percentages, two
/// decimals, "-" where a metric is absent). One row per (label, report).
std::string render_markdown(const std::vector<std::pair<std::string, EvalReport>>& rows);

/// Plain-text summary for terminals.
std::string render_text(const EvalReport& report);

}  // namespace xmusim
