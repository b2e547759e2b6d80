#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xmusim/linalg.hpp"

namespace xmusim {

enum class TagLevel { coarse, fine };

enum class CoarseCategory { genre, mood, scenario };

const char* to_string(CoarseCategory category) noexcept;
const char* to_string(TagLevel level) noexcept;
std::optional<CoarseCategory> parse_coarse_category(std::string_view name) noexcept;
std::optional<TagLevel> parse_tag_level(std::string_view name) noexcept;

struct CoarseTag {
  CoarseCategory category = CoarseCategory::genre;
  std::string label;

  /// Canonical vocabulary key, e.g. "genre:pop".
  std::string key() const;

  auto operator<=>(const CoarseTag&) const = default;
};

/// Audio chunk rows held in an external embedding store. The path is resolved relative
/// to the directory of the dataset file that references it.
struct AudioStoreRef {
  std::string path;
  std::vector<std::uint64_t> rows;

  bool operator==(const AudioStoreRef&) const = default;
};

struct TrackRecord {
  std::string id;
  std::string title;
  std::string artist;
  std::string language;
  std::vector<CoarseTag> coarse_tags;  // sorted, unique
  std::vector<std::string> fine_tags;  // sorted, unique
  std::vector<std::string> captions;
  std::vector<std::string> aspects;
  std::string lyrics;
  Matrix audio_chunks;  // one row per 10-second interval
  std::optional<AudioStoreRef> audio_ref;

  /// Tag keys at a level: "category:label" for coarse, the bare label for fine.
  std::vector<std::string> tag_keys(TagLevel level) const;

  bool operator==(const TrackRecord&) const = default;
};

struct TagCount {
  std::string label;
  std::size_t count = 0;

  bool operator==(const TagCount&) const = default;
};

/// Per-level tag labels sorted by label, with the number of tracks carrying each.
struct TagVocabulary {
  std::vector<TagCount> coarse;
  std::vector<TagCount> fine;

  const std::vector<TagCount>& at(TagLevel level) const { return level == TagLevel::coarse ? coarse : fine; }
  bool operator==(const TagVocabulary&) const = default;
};

class Dataset {
 public:
  Dataset() = default;

  /// Validates the records (unique ids, consistent audio dimension, unique tags) and
  /// builds the vocabulary. Throws DataError.
  explicit Dataset(std::vector<TrackRecord> tracks);

  const std::vector<TrackRecord>& tracks() const noexcept { return tracks_; }
  const TagVocabulary& vocabulary() const noexcept { return vocabulary_; }
  std::size_t size() const noexcept { return tracks_.size(); }
  /// 0 when no track carries audio.
  std::size_t audio_dim() const noexcept { return audio_dim_; }

  std::optional<std::size_t> find(std::string_view id) const;
  const TrackRecord& at(std::string_view id) const;

  bool operator==(const Dataset& o) const { return tracks_ == o.tracks_ && vocabulary_ == o.vocabulary_; }

 private:
  std::vector<TrackRecord> tracks_;
  TagVocabulary vocabulary_;
  std::size_t audio_dim_ = 0;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Parses JSON Lines. `base_dir` resolves audio_store_ref paths; `source` names the input
/// in error messages, which carry the 1-based line number and offending field.
Dataset parse_dataset(std::istream& in, const std::filesystem::path& base_dir, const std::string& source);
Dataset load_dataset(const std::filesystem::path& path);

/// Removes every label whose occurrence count is below `min_count` from the vocabulary
/// and from the tracks' tag sets. Track records themselves are kept.
Dataset filter_tags(const Dataset& dataset, std::size_t min_count);

/// Serialises one record as a single JSON line (no trailing newline). Records carrying an
/// audio_ref are written with audio_store_ref, otherwise audio chunks are written inline.
std::string to_json_line(const TrackRecord& track);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Trims ASCII whitespace at both ends.
std::string trim(std::string_view s);

}  // namespace xmusim
