#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xmusim/dataset.hpp"

namespace xmusim {

/// Seeded generator used for every sampling decision in the library.
using Rng = std::mt19937_64;

/// Uniform integer in [lo, hi]. Implemented locally so that sampled sequences do not
/// depend on the standard library's distribution algorithms.
std::uint64_t uniform_index(Rng& rng, std::uint64_t lo, std::uint64_t hi);

enum class TextKind { aspect, caption, lyrics };

const char* to_string(TextKind kind) noexcept;

struct TextSample {
  std::string track_id;
  std::string text;
  TextKind kind = TextKind::aspect;

  bool operator==(const TextSample&) const = default;
};

struct TextConfig {
  bool use_aspects = true;
  bool use_captions = true;
  bool use_lyrics = true;
  bool mask = false;

  bool any() const noexcept { return use_aspects || use_captions || use_lyrics; }
};

inline constexpr std::size_t kMaxAspectsPerSample = 5;
inline constexpr std::string_view kMaskToken = "[MASK]";

/// Sentences end at a run of . ! ? or the full-width 。！？ terminators. Each sentence keeps
/// its terminator(s) and is trimmed. Trailing text without a terminator forms a sentence.
std::vector<std::string> split_sentences(std::string_view text);

/// Draws L uniformly from 1..S and returns the first L sentences joined by single spaces.
std::string sample_caption_block(std::string_view caption, Rng& rng);

/// Chooses min(5, n) distinct aspects uniformly without replacement and joins them with
/// ", " in their original list order.
std::string sample_aspects(const std::vector<std::string>& aspects, Rng& rng);

/// Splits on line breaks, trimming each line and dropping empty ones.
std::vector<std::string> segment_lyrics(std::string_view lyrics);

/// Replaces case-insensitive occurrences of the title and artist with "[MASK]", longest
/// candidate first at each position. Existing "[MASK]" tokens are left untouched, which
/// makes the operation idempotent. Case folding is ASCII-only.
std::string mask_identifiers(std::string_view text, std::string_view title, std::string_view artist);

/// One sample per enabled kind per track that has that field (and, when `require_audio`,
/// audio chunks). Order: track order, then aspect < caption < lyrics.
std::vector<TextSample> build_training_samples(const Dataset& dataset, const TextConfig& cfg, Rng& rng,
                                               bool require_audio = false);

/// Every distinct text the samplers above can emit for a track under `cfg`, in a
/// deterministic order. Used to precompute raw text embedding tables.
std::vector<std::string> enumerate_text_variants(const TrackRecord& track, const TextConfig& cfg);

}  // namespace xmusim
