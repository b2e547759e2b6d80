#include "xmusim/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "xmusim/error.hpp"

namespace xmusim {

using ordered_json = nlohmann::ordered_json;

double recall_at_k(std::span<const std::string> ranking, const std::unordered_set<std::string>& relevant,
                   std::size_t k) {
  if (relevant.empty()) throw DataError("recall_at_k: empty relevant set");
  const std::size_t n = std::min(k, ranking.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) hits += relevant.contains(ranking[r]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double average_precision_at_k(std::span<const char> flags, std::size_t n_relevant, std::size_t k) {
  if (n_relevant == 0) throw DataError("average_precision_at_k: empty relevant set");
  if (k == 0) throw UsageError("average_precision_at_k: k must be >= 1");
  const std::size_t n = std::min(k, flags.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!flags[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(std::min(n_relevant, k));
}

double average_precision_at_k(std::span<const std::string> ranking, const std::unordered_set<std::string>& relevant,
                              std::size_t k) {
  std::vector<char> flags;
  flags.reserve(std::min(k, ranking.size()));
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) flags.push_back(relevant.contains(ranking[r]) ? 1 : 0);
  return average_precision_at_k(flags, relevant.size(), k);
}

NeighborTable compute_neighbors(const EmbeddingIndex& index, std::size_t k) {
  NeighborTable table;
  table.k = k;
  table.rows.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) table.rows.push_back(top_k_rows(index, r, k, true));
  return table;
}

std::vector<TagQuery> build_tag_queries(const Dataset& dataset, TagLevel level) {
  std::map<std::string, std::vector<std::string>> by_text;
  for (const auto& t : dataset.tracks()) {
    std::vector<std::string> texts;
    if (level == TagLevel::fine) {
      texts = t.fine_tags;
    } else {
      for (const auto& c : t.coarse_tags) texts.push_back(c.label);
      std::sort(texts.begin(), texts.end());
      texts.erase(std::unique(texts.begin(), texts.end()), texts.end());
    }
    for (auto& text : texts) by_text[text].push_back(t.id);
  }
  std::vector<TagQuery> out;
  for (auto& [text, ids] : by_text) out.push_back({text, std::move(ids)});
  return out;
}

T2MMetrics eval_t2m(const EmbeddingIndex& index, const std::vector<TagQuery>& queries,
                    const ProjectionHead& text_head, const TextEmbeddingTable& table) {
  if (queries.empty()) throw DataError("eval_t2m: no tag queries");
  T2MMetrics m;
  for (const auto& q : queries) {
    if (q.relevant.empty()) throw DataError("eval_t2m: tag '" + q.text + "' has no relevant tracks");
    std::unordered_set<std::string> relevant(q.relevant.begin(), q.relevant.end());
    for (const auto& id : relevant) {
      if (!index.find(id)) throw DataError("eval_t2m: relevant track '" + id + "' is not indexed");
    }
    const Vector query = embed_text_query(q.text, table, text_head);
    const auto ranked = top_k(index, query, 10);
    std::vector<std::string> ids;
    ids.reserve(ranked.size());
    for (const auto& s : ranked) ids.push_back(s.id);
    m.recall_at_1 += recall_at_k(ids, relevant, 1);
    m.recall_at_5 += recall_at_k(ids, relevant, 5);
    m.map_at_10 += average_precision_at_k(ids, relevant, 10);
    ++m.n_queries;
  }
  const auto n = static_cast<double>(m.n_queries);
  m.recall_at_1 /= n;
  m.recall_at_5 /= n;
  m.map_at_10 /= n;
  return m;
}

const char* to_string(M2MMode mode) noexcept { return mode == M2MMode::per_tag ? "per_tag" : "per_query"; }

std::optional<M2MMode> parse_m2m_mode(std::string_view name) noexcept {
  if (name == "per_tag") return M2MMode::per_tag;
  if (name == "per_query") return M2MMode::per_query;
  return std::nullopt;
}

namespace {

// row_track[r] = dataset position of index row r.
std::vector<std::size_t> align(const EmbeddingIndex& index, const Dataset& dataset) {
  if (index.size() != dataset.size()) {
    throw DataError("index holds " + std::to_string(index.size()) + " tracks but the dataset has " +
                    std::to_string(dataset.size()));
  }
  std::vector<std::size_t> row_track(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    auto pos = dataset.find(index.ids()[r]);
    if (!pos) throw DataError("indexed track '" + index.ids()[r] + "' is not in the dataset");
    row_track[r] = *pos;
  }
  return row_track;
}

void check_neighbors(const EmbeddingIndex& index, const NeighborTable& neighbors) {
  if (neighbors.rows.size() != index.size()) throw DataError("neighbor table does not match the index");
}

}  // namespace

M2MResult eval_m2m(const EmbeddingIndex& index, const Dataset& dataset, TagLevel level, M2MMode mode, std::size_t k) {
  return eval_m2m(index, compute_neighbors(index, k), dataset, level, mode);
}

M2MResult eval_m2m(const EmbeddingIndex& index, const NeighborTable& neighbors, const Dataset& dataset,
                   TagLevel level, M2MMode mode) {
  check_neighbors(index, neighbors);
  const auto row_track = align(index, dataset);
  const std::size_t n = index.size();
  const std::size_t k = neighbors.k;
  const auto& vocab = dataset.vocabulary().at(level);
  if (vocab.empty()) throw DataError(std::string("eval_m2m: no ") + to_string(level) + " tags");

  // membership[t][r]: index row r carries vocabulary tag t.
  std::map<std::string, std::size_t> tag_pos;
  for (std::size_t t = 0; t < vocab.size(); ++t) tag_pos.emplace(vocab[t].label, t);
  std::vector<std::vector<char>> membership(vocab.size(), std::vector<char>(n, 0));
  std::vector<std::vector<std::size_t>> row_tags(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (const auto& key : dataset.tracks()[row_track[r]].tag_keys(level)) {
      const std::size_t t = tag_pos.at(key);
      membership[t][r] = 1;
      row_tags[r].push_back(t);
    }
  }

  M2MResult result;
  std::vector<char> flags;
  if (mode == M2MMode::per_tag) {
    double macro = 0.0;
    for (std::size_t t = 0; t < vocab.size(); ++t) {
      std::size_t members = 0;
      for (char c : membership[t]) members += c ? 1 : 0;
      if (members < 2) continue;
      double sum = 0.0;
      std::size_t queries = 0;
      for (std::size_t q = 0; q < n; ++q) {
        if (!membership[t][q]) continue;
        flags.clear();
        for (const auto& s : neighbors.rows[q]) flags.push_back(membership[t][s.row]);
        sum += average_precision_at_k(flags, members - 1, k);
        ++queries;
      }
      const double ap = sum / static_cast<double>(queries);
      result.per_tag.push_back({vocab[t].label, ap, queries});
      macro += ap;
    }
    if (result.per_tag.empty()) throw DataError(std::string("eval_m2m: no ") + to_string(level) + " tag has two tracks");
    result.n_units = result.per_tag.size();
    result.map = macro / static_cast<double>(result.n_units);
  } else {
    double sum = 0.0;
    std::vector<char> positive(n, 0);
    for (std::size_t q = 0; q < n; ++q) {
      if (row_tags[q].empty()) continue;
      std::fill(positive.begin(), positive.end(), 0);
      for (std::size_t t : row_tags[q]) {
        for (std::size_t r = 0; r < n; ++r) positive[r] |= membership[t][r];
      }
      positive[q] = 0;
      std::size_t n_pos = 0;
      for (char c : positive) n_pos += c ? 1 : 0;
      if (n_pos == 0) continue;
      flags.clear();
      for (const auto& s : neighbors.rows[q]) flags.push_back(positive[s.row]);
      sum += average_precision_at_k(flags, n_pos, k);
      ++result.n_units;
    }
    if (result.n_units == 0) throw DataError(std::string("eval_m2m: no query has a ") + to_string(level) + " positive");
    result.map = sum / static_cast<double>(result.n_units);
  }
  return result;
}

SameArtistStats same_artist_ratio(const EmbeddingIndex& index, const Dataset& dataset, std::size_t k) {
  return same_artist_ratio(index, compute_neighbors(index, k), dataset);
}

SameArtistStats same_artist_ratio(const EmbeddingIndex& index, const NeighborTable& neighbors,
                                  const Dataset& dataset) {
  check_neighbors(index, neighbors);
  const auto row_track = align(index, dataset);
  SameArtistStats stats;
  stats.k = neighbors.k;
  std::size_t with_hit = 0;
  std::size_t total_hits = 0;
  for (std::size_t q = 0; q < index.size(); ++q) {
    const std::string& artist = dataset.tracks()[row_track[q]].artist;
    if (artist.empty()) continue;
    std::size_t hits = 0;
    for (const auto& s : neighbors.rows[q]) hits += dataset.tracks()[row_track[s.row]].artist == artist ? 1 : 0;
    with_hit += hits > 0 ? 1 : 0;
    total_hits += hits;
    ++stats.n_queries;
  }
  if (stats.n_queries > 0) {
    stats.ratio_with_hit = static_cast<double>(with_hit) / static_cast<double>(stats.n_queries);
    stats.mean_hits = static_cast<double>(total_hits) / static_cast<double>(stats.n_queries);
  }
  return stats;
}

namespace {

ordered_json tag_scores_json(const std::vector<TagScore>& scores) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : scores) arr.push_back({{"tag", s.tag}, {"ap", s.ap}, {"n_queries", s.n_queries}});
  return arr;
}

std::vector<TagScore> tag_scores_from(const ordered_json& arr) {
  std::vector<TagScore> out;
  for (const auto& e : arr) out.push_back({e.at("tag").get<std::string>(), e.at("ap").get<double>(), e.at("n_queries").get<std::size_t>()});
  return out;
}

}  // namespace

std::string to_json(const EvalReport& report) {
  ordered_json j;
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : report.config) config[k] = v;
  j["config"] = std::move(config);
  if (report.t2m) {
    j["t2m"] = {{"R@1", report.t2m->recall_at_1},
                {"R@5", report.t2m->recall_at_5},
                {"mAP@10", report.t2m->map_at_10},
                {"n_queries", report.t2m->n_queries}};
  }
  if (!report.m2m.empty()) {
    ordered_json m = ordered_json::object();
    for (const auto& [mode, scores] : report.m2m) {
      ordered_json s = ordered_json::object();
      if (scores.coarse) s["mAP@100_coarse"] = *scores.coarse;
      if (scores.fine) s["mAP@100_fine"] = *scores.fine;
      m[mode] = std::move(s);
    }
    j["m2m"] = std::move(m);
  }
  if (report.same_artist) {
    const auto& sa = *report.same_artist;
    j["same_artist"] = {{"k", sa.k},
                        {"ratio_queries_with_hit", sa.ratio_with_hit},
                        {"mean_hits_per_100", sa.mean_hits},
                        {"n_queries", sa.n_queries}};
  }
  if (!report.per_tag_coarse.empty() || !report.per_tag_fine.empty()) {
    j["per_tag"] = {{"coarse", tag_scores_json(report.per_tag_coarse)}, {"fine", tag_scores_json(report.per_tag_fine)}};
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("report: invalid JSON: ") + e.what());
  }
  EvalReport r;
  try {
    if (j.contains("config")) {
      for (const auto& [k, v] : j["config"].items()) r.config[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (j.contains("t2m")) {
      const auto& t = j["t2m"];
      r.t2m = T2MMetrics{t.at("R@1").get<double>(), t.at("R@5").get<double>(), t.at("mAP@10").get<double>(),
                         t.value("n_queries", std::size_t{0})};
    }
    if (j.contains("m2m")) {
      for (const auto& [mode, s] : j["m2m"].items()) {
        M2MScores scores;
        if (s.contains("mAP@100_coarse")) scores.coarse = s["mAP@100_coarse"].get<double>();
        if (s.contains("mAP@100_fine")) scores.fine = s["mAP@100_fine"].get<double>();
        r.m2m[mode] = scores;
      }
    }
    if (j.contains("same_artist")) {
      const auto& s = j["same_artist"];
      r.same_artist = SameArtistStats{s.at("ratio_queries_with_hit").get<double>(), s.at("mean_hits_per_100").get<double>(),
                                      s.value("n_queries", std::size_t{0}), s.value("k", std::size_t{100})};
    }
    if (j.contains("per_tag")) {
      r.per_tag_coarse = tag_scores_from(j["per_tag"].value("coarse", ordered_json::array()));
      r.per_tag_fine = tag_scores_from(j["per_tag"].value("fine", ordered_json::array()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: unexpected structure: ") + e.what());
  }
  return r;
}

namespace {

std::string pct(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

const M2MScores* primary_m2m(const EvalReport& r) {
  if (auto it = r.m2m.find("per_tag"); it != r.m2m.end()) return &it->second;
  if (!r.m2m.empty()) return &r.m2m.begin()->second;
  return nullptr;
}

}  // namespace

std::string render_markdown(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream os;
  os << "| Method | R@1 | R@5 | mAP@10 | Coarse | Fine |\n";
  os << "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& [label, r] : rows) {
    const M2MScores* m = primary_m2m(r);
    os << "| " << label << " | " << pct(r.t2m ? std::optional(r.t2m->recall_at_1) : std::nullopt) << " | "
       << pct(r.t2m ? std::optional(r.t2m->recall_at_5) : std::nullopt) << " | "
       << pct(r.t2m ? std::optional(r.t2m->map_at_10) : std::nullopt) << " | "
       << pct(m ? m->coarse : std::nullopt) << " | " << pct(m ? m->fine : std::nullopt) << " |\n";
  }
  return os.str();
}

std::string render_text(const EvalReport& r) {
  std::ostringstream os;
  char buf[160];
  if (r.t2m) {
    std::snprintf(buf, sizeof buf, "T2M  R@1 %6.2f  R@5 %6.2f  mAP@10 %6.2f  (%zu tag queries)\n", r.t2m->recall_at_1 * 100,
                  r.t2m->recall_at_5 * 100, r.t2m->map_at_10 * 100, r.t2m->n_queries);
    os << buf;
  }
  for (const auto& [mode, s] : r.m2m) {
    os << "M2M  " << mode << "  mAP@100 coarse " << pct(s.coarse) << "  fine " << pct(s.fine) << "\n";
  }
  if (r.same_artist) {
    std::snprintf(buf, sizeof buf, "Same-artist  %.2f%% of %zu queries hit, %.3f hits per top-%zu\n",
                  r.same_artist->ratio_with_hit * 100, r.same_artist->n_queries, r.same_artist->mean_hits,
                  r.same_artist->k);
    os << buf;
  }
  return os.str();
}

}  // namespace xmusim
