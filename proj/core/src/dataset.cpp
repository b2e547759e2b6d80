#include "xmusim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "xmusim/embedding_store.hpp"
#include "xmusim/error.hpp"

namespace xmusim {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* to_string(CoarseCategory category) noexcept {
  switch (category) {
    case CoarseCategory::genre:
      return "genre";
    case CoarseCategory::mood:
      return "mood";
    case CoarseCategory::scenario:
      return "scenario";
  }
  return "?";
}

const char* to_string(TagLevel level) noexcept { return level == TagLevel::coarse ? "coarse" : "fine"; }

std::optional<CoarseCategory> parse_coarse_category(std::string_view name) noexcept {
  if (name == "genre") return CoarseCategory::genre;
  if (name == "mood") return CoarseCategory::mood;
  if (name == "scenario") return CoarseCategory::scenario;
  return std::nullopt;
}

std::optional<TagLevel> parse_tag_level(std::string_view name) noexcept {
  if (name == "coarse") return TagLevel::coarse;
  if (name == "fine") return TagLevel::fine;
  return std::nullopt;
}

std::string CoarseTag::key() const { return std::string(to_string(category)) + ":" + label; }

std::vector<std::string> TrackRecord::tag_keys(TagLevel level) const {
  if (level == TagLevel::fine) return fine_tags;
  std::vector<std::string> keys;
  keys.reserve(coarse_tags.size());
  for (const auto& t : coarse_tags) keys.push_back(t.key());
  return keys;
}

std::string trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

namespace {

std::vector<TagCount> count_tags(const std::vector<TrackRecord>& tracks, TagLevel level) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tracks) {
    for (auto& key : t.tag_keys(level)) ++counts[key];
  }
  std::vector<TagCount> out;
  out.reserve(counts.size());
  for (auto& [label, n] : counts) out.push_back({label, n});
  return out;
}

}  // namespace

Dataset::Dataset(std::vector<TrackRecord> tracks) : tracks_(std::move(tracks)) {
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    auto& t = tracks_[i];
    if (t.id.empty()) throw DataError("track " + std::to_string(i) + ": empty id");
    if (!by_id_.emplace(t.id, i).second) throw DataError("duplicate track id '" + t.id + "'");

    std::sort(t.coarse_tags.begin(), t.coarse_tags.end());
    if (std::adjacent_find(t.coarse_tags.begin(), t.coarse_tags.end()) != t.coarse_tags.end()) {
      throw DataError("track '" + t.id + "': duplicate coarse tag");
    }
    std::sort(t.fine_tags.begin(), t.fine_tags.end());
    if (std::adjacent_find(t.fine_tags.begin(), t.fine_tags.end()) != t.fine_tags.end()) {
      throw DataError("track '" + t.id + "': duplicate fine tag");
    }

    if (t.audio_chunks.rows() > 0) {
      if (t.audio_chunks.cols() == 0) throw DataError("track '" + t.id + "': zero-dimensional audio embedding");
      if (audio_dim_ == 0) {
        audio_dim_ = t.audio_chunks.cols();
      } else if (audio_dim_ != t.audio_chunks.cols()) {
        throw DataError("track '" + t.id + "': audio embedding dimension " + std::to_string(t.audio_chunks.cols()) +
                        " differs from " + std::to_string(audio_dim_));
      }
      if (!all_finite(t.audio_chunks.values())) throw DataError("track '" + t.id + "': non-finite audio value");
    }
  }
  vocabulary_.coarse = count_tags(tracks_, TagLevel::coarse);
  vocabulary_.fine = count_tags(tracks_, TagLevel::fine);
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const TrackRecord& Dataset::at(std::string_view id) const {
  auto idx = find(id);
  if (!idx) throw DataError("unknown track id '" + std::string(id) + "'");
  return tracks_[*idx];
}

namespace {

class RecordParser {
 public:
  RecordParser(std::string source, std::filesystem::path base_dir)
      : source_(std::move(source)), base_dir_(std::move(base_dir)) {}

  TrackRecord parse(const std::string& line, std::size_t line_no) {
    line_no_ = line_no;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail("", std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail("", "record is not a JSON object");

    TrackRecord t;
    t.id = trim(required_string(obj, "id"));
    if (t.id.empty()) fail("id", "empty id");
    t.title = optional_string(obj, "title");
    t.artist = optional_string(obj, "artist");
    t.language = optional_string(obj, "language");
    t.lyrics = optional_string(obj, "lyrics");
    t.captions = string_array(obj, "captions", /*trim_items=*/false);
    t.aspects = string_array(obj, "aspects", /*trim_items=*/true);
    t.fine_tags = string_array(obj, "fine_tags", /*trim_items=*/true);
    for (const auto& f : t.fine_tags) {
      if (f.empty()) fail("fine_tags", "empty label");
    }
    std::vector<std::string> fine = t.fine_tags;
    std::sort(fine.begin(), fine.end());
    if (std::adjacent_find(fine.begin(), fine.end()) != fine.end()) fail("fine_tags", "duplicate label");

    parse_coarse(obj, t);
    parse_audio(obj, t);
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    std::string where = source_ + ":" + std::to_string(line_no_);
    if (!field.empty()) where += ": field '" + field + "'";
    throw DataError(where + ": " + msg);
  }

  std::string required_string(const json& obj, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(key, "missing");
    if (!it->is_string()) fail(key, "expected string");
    return it->get<std::string>();
  }

  std::string optional_string(const json& obj, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) fail(key, "expected string");
    return it->get<std::string>();
  }

  std::vector<std::string> string_array(const json& obj, const char* key, bool trim_items) const {
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return out;
    if (!it->is_array()) fail(key, "expected array of strings");
    for (const auto& v : *it) {
      if (!v.is_string()) fail(key, "expected array of strings");
      std::string s = trim_items ? trim(v.get<std::string>()) : v.get<std::string>();
      if (trim_items && s.empty()) continue;
      out.push_back(std::move(s));
    }
    return out;
  }

  void parse_coarse(const json& obj, TrackRecord& t) const {
    auto it = obj.find("coarse_tags");
    if (it == obj.end() || it->is_null()) return;
    if (!it->is_object()) fail("coarse_tags", "expected object of genre/mood/scenario arrays");
    for (const auto& [name, labels] : it->items()) {
      auto cat = parse_coarse_category(name);
      if (!cat) fail("coarse_tags", "unknown category '" + name + "'");
      if (!labels.is_array()) fail("coarse_tags." + name, "expected array of strings");
      for (const auto& v : labels) {
        if (!v.is_string()) fail("coarse_tags." + name, "expected array of strings");
        std::string label = trim(v.get<std::string>());
        if (label.empty()) fail("coarse_tags." + name, "empty label");
        CoarseTag tag{*cat, std::move(label)};
        if (std::find(t.coarse_tags.begin(), t.coarse_tags.end(), tag) != t.coarse_tags.end()) {
          fail("coarse_tags." + name, "duplicate label '" + tag.label + "'");
        }
        t.coarse_tags.push_back(std::move(tag));
      }
    }
    std::sort(t.coarse_tags.begin(), t.coarse_tags.end());
  }

  void parse_audio(const json& obj, TrackRecord& t) {
    auto inline_it = obj.find("audio_chunks");
    auto ref_it = obj.find("audio_store_ref");
    const bool has_inline = inline_it != obj.end() && !inline_it->is_null();
    const bool has_ref = ref_it != obj.end() && !ref_it->is_null();
    if (has_inline && has_ref) fail("audio_chunks", "both audio_chunks and audio_store_ref given");

    if (has_inline) {
      if (!inline_it->is_array()) fail("audio_chunks", "expected array of arrays of numbers");
      for (std::size_t c = 0; c < inline_it->size(); ++c) {
        const auto& row = (*inline_it)[c];
        if (!row.is_array() || row.empty()) fail("audio_chunks", "chunk " + std::to_string(c) + " is not a non-empty array");
        Vector v;
        v.reserve(row.size());
        for (const auto& x : row) {
          if (!x.is_number()) fail("audio_chunks", "chunk " + std::to_string(c) + " has a non-numeric value");
          v.push_back(x.get<double>());
        }
        if (t.audio_chunks.rows() > 0 && v.size() != t.audio_chunks.cols()) {
          fail("audio_chunks", "chunk " + std::to_string(c) + " has dimension " + std::to_string(v.size()) +
                                   ", expected " + std::to_string(t.audio_chunks.cols()));
        }
        if (!all_finite(v)) fail("audio_chunks", "chunk " + std::to_string(c) + " has a non-finite value");
        t.audio_chunks.append_row(v);
      }
    } else if (has_ref) {
      const auto& ref = *ref_it;
      if (!ref.is_object()) fail("audio_store_ref", "expected object {path, rows}");
      auto p = ref.find("path");
      auto rows = ref.find("rows");
      if (p == ref.end() || !p->is_string()) fail("audio_store_ref.path", "expected string");
      if (rows == ref.end() || !rows->is_array()) fail("audio_store_ref.rows", "expected array of row indices");
      AudioStoreRef r;
      r.path = p->get<std::string>();
      for (const auto& x : *rows) {
        if (!x.is_number_unsigned()) fail("audio_store_ref.rows", "expected non-negative integers");
        r.rows.push_back(x.get<std::uint64_t>());
      }
      const EmbeddingStore& store = store_for(r.path);
      for (auto row : r.rows) {
        if (row >= store.count()) {
          fail("audio_store_ref.rows", "row " + std::to_string(row) + " out of range for " + r.path);
        }
        t.audio_chunks.append_row(store.vectors.row(row));
      }
      t.audio_ref = std::move(r);
    }
  }

  const EmbeddingStore& store_for(const std::string& rel) {
    auto it = stores_.find(rel);
    if (it != stores_.end()) return it->second;
    std::filesystem::path p(rel);
    if (p.is_relative()) p = base_dir_ / p;
    try {
      return stores_.emplace(rel, read_embedding_store(p)).first->second;
    } catch (const DataError& e) {
      fail("audio_store_ref.path", e.what());
    }
  }

  std::string source_;
  std::filesystem::path base_dir_;
  std::size_t line_no_ = 0;
  std::map<std::string, EmbeddingStore> stores_;
};

}  // namespace

Dataset parse_dataset(std::istream& in, const std::filesystem::path& base_dir, const std::string& source) {
  RecordParser parser(source, base_dir);
  std::vector<TrackRecord> tracks;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    TrackRecord t = parser.parse(line, line_no);
    auto [it, inserted] = first_line.emplace(t.id, line_no);
    if (!inserted) {
      throw DataError(source + ":" + std::to_string(line_no) + ": field 'id': duplicate track id '" + t.id +
                      "' (first seen on line " + std::to_string(it->second) + ")");
    }
    tracks.push_back(std::move(t));
  }
  try {
    return Dataset(std::move(tracks));
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_dataset(in, path.parent_path(), path.string());
}

Dataset filter_tags(const Dataset& dataset, std::size_t min_count) {
  const auto& vocab = dataset.vocabulary();
  auto keep_set = [&](TagLevel level) {
    std::vector<std::string> keep;
    for (const auto& tc : vocab.at(level)) {
      if (tc.count >= min_count) keep.push_back(tc.label);
    }
    return keep;  // sorted, since the vocabulary is sorted
  };
  const auto keep_coarse = keep_set(TagLevel::coarse);
  const auto keep_fine = keep_set(TagLevel::fine);

  std::vector<TrackRecord> tracks = dataset.tracks();
  for (auto& t : tracks) {
    std::erase_if(t.coarse_tags, [&](const CoarseTag& tag) {
      return !std::binary_search(keep_coarse.begin(), keep_coarse.end(), tag.key());
    });
    std::erase_if(t.fine_tags, [&](const std::string& tag) {
      return !std::binary_search(keep_fine.begin(), keep_fine.end(), tag);
    });
  }
  return Dataset(std::move(tracks));
}

std::string to_json_line(const TrackRecord& t) {
  ordered_json obj;
  obj["id"] = t.id;
  obj["title"] = t.title;
  obj["artist"] = t.artist;
  obj["language"] = t.language;
  ordered_json coarse = ordered_json::object();
  for (auto cat : {CoarseCategory::genre, CoarseCategory::mood, CoarseCategory::scenario}) {
    ordered_json labels = ordered_json::array();
    for (const auto& tag : t.coarse_tags) {
      if (tag.category == cat) labels.push_back(tag.label);
    }
    if (!labels.empty()) coarse[to_string(cat)] = std::move(labels);
  }
  obj["coarse_tags"] = std::move(coarse);
  obj["fine_tags"] = t.fine_tags;
  obj["captions"] = t.captions;
  obj["aspects"] = t.aspects;
  obj["lyrics"] = t.lyrics;
  if (t.audio_ref) {
    obj["audio_store_ref"] = {{"path", t.audio_ref->path}, {"rows", t.audio_ref->rows}};
  } else {
    ordered_json chunks = ordered_json::array();
    for (std::size_t r = 0; r < t.audio_chunks.rows(); ++r) {
      auto row = t.audio_chunks.row(r);
      chunks.push_back(std::vector<double>(row.begin(), row.end()));
    }
    obj["audio_chunks"] = std::move(chunks);
  }
  return obj.dump();
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& t : dataset.tracks()) out << to_json_line(t) << '\n';
  if (!out) throw DataError("write failure on " + path.string());
}

}  // namespace xmusim
