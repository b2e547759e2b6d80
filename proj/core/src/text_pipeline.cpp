#include "xmusim/text_pipeline.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "xmusim/error.hpp"

namespace xmusim {

std::uint64_t uniform_index(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t span = hi - lo;
  if (span == std::numeric_limits<std::uint64_t>::max()) return rng();
  const std::uint64_t n = span + 1;
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return lo + x % n;
}

const char* to_string(TextKind kind) noexcept {
  switch (kind) {
    case TextKind::aspect:
      return "aspect";
    case TextKind::caption:
      return "caption";
    case TextKind::lyrics:
      return "lyrics";
  }
  return "?";
}

namespace {

// Byte length of a sentence terminator starting at s[i], or 0.
std::size_t terminator_at(std::string_view s, std::size_t i) {
  const char c = s[i];
  if (c == '.' || c == '!' || c == '?') return 1;
  if (i + 3 <= s.size()) {
    const std::string_view tri = s.substr(i, 3);
    if (tri == "\xE3\x80\x82" /* 。 */ || tri == "\xEF\xBC\x81" /* ！ */ || tri == "\xEF\xBC\x9F" /* ？ */) {
      return 3;
    }
  }
  return 0;
}

std::string join(const std::vector<std::string>& parts, std::size_t count, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool iequals_at(std::string_view text, std::size_t pos, std::string_view needle) {
  if (pos + needle.size() > text.size()) return false;
  for (std::size_t k = 0; k < needle.size(); ++k) {
    if (ascii_lower(text[pos + k]) != ascii_lower(needle[k])) return false;
  }
  return true;
}

void mask_segment(std::string_view seg, const std::vector<std::string_view>& candidates, std::string& out) {
  std::size_t i = 0;
  while (i < seg.size()) {
    bool matched = false;
    for (auto cand : candidates) {
      if (iequals_at(seg, i, cand)) {
        out += kMaskToken;
        i += cand.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += seg[i++];
  }
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = terminator_at(text, i);
    if (len == 0) {
      ++i;
      continue;
    }
    i += len;
    while (i < text.size() && (len = terminator_at(text, i)) != 0) i += len;
    std::string s = trim(text.substr(start, i - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = i;
  }
  std::string tail = trim(text.substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

std::string sample_caption_block(std::string_view caption, Rng& rng) {
  auto sentences = split_sentences(caption);
  if (sentences.empty()) throw DataError("sample_caption_block: empty caption");
  const auto len = static_cast<std::size_t>(uniform_index(rng, 1, sentences.size()));
  return join(sentences, len, " ");
}

std::string sample_aspects(const std::vector<std::string>& aspects, Rng& rng) {
  if (aspects.empty()) throw DataError("sample_aspects: empty aspect list");
  const std::size_t k = std::min(kMaxAspectsPerSample, aspects.size());
  std::vector<std::size_t> idx(aspects.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i, idx.size() - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::string out;
  for (std::size_t i = 0; i < k; ++i) {
    if (i) out += ", ";
    out += aspects[idx[i]];
  }
  return out;
}

std::vector<std::string> segment_lyrics(std::string_view lyrics) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= lyrics.size()) {
    std::size_t nl = lyrics.find('\n', start);
    if (nl == std::string_view::npos) nl = lyrics.size();
    std::string line = trim(lyrics.substr(start, nl - start));
    if (!line.empty()) out.push_back(std::move(line));
    start = nl + 1;
  }
  return out;
}

std::string mask_identifiers(std::string_view text, std::string_view title, std::string_view artist) {
  std::vector<std::string_view> candidates;
  if (!title.empty()) candidates.push_back(title);
  if (!artist.empty()) candidates.push_back(artist);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](std::string_view a, std::string_view b) { return a.size() > b.size(); });
  if (candidates.empty()) return std::string(text);

  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t tok = text.find(kMaskToken, pos);
    const std::size_t end = tok == std::string_view::npos ? text.size() : tok;
    mask_segment(text.substr(pos, end - pos), candidates, out);
    if (tok == std::string_view::npos) break;
    out += kMaskToken;
    pos = tok + kMaskToken.size();
  }
  return out;
}

std::vector<TextSample> build_training_samples(const Dataset& dataset, const TextConfig& cfg, Rng& rng,
                                               bool require_audio) {
  if (!cfg.any()) throw UsageError("build_training_samples: no text kind enabled");
  std::vector<TextSample> out;
  auto emit = [&](const TrackRecord& t, TextKind kind, std::string text) {
    if (cfg.mask) text = mask_identifiers(text, t.title, t.artist);
    if (!trim(text).empty()) out.push_back({t.id, std::move(text), kind});
  };
  for (const auto& t : dataset.tracks()) {
    if (require_audio && t.audio_chunks.rows() == 0) continue;
    if (cfg.use_aspects && !t.aspects.empty()) emit(t, TextKind::aspect, sample_aspects(t.aspects, rng));
    if (cfg.use_captions) {
      std::vector<const std::string*> usable;
      for (const auto& c : t.captions) {
        if (!split_sentences(c).empty()) usable.push_back(&c);
      }
      if (!usable.empty()) {
        const auto pick = static_cast<std::size_t>(uniform_index(rng, 0, usable.size() - 1));
        emit(t, TextKind::caption, sample_caption_block(*usable[pick], rng));
      }
    }
    if (cfg.use_lyrics) {
      auto lines = segment_lyrics(t.lyrics);
      if (!lines.empty()) {
        const auto pick = static_cast<std::size_t>(uniform_index(rng, 0, lines.size() - 1));
        emit(t, TextKind::lyrics, std::move(lines[pick]));
      }
    }
  }
  return out;
}

std::vector<std::string> enumerate_text_variants(const TrackRecord& t, const TextConfig& cfg) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](std::string text) {
    if (cfg.mask) text = mask_identifiers(text, t.title, t.artist);
    if (trim(text).empty()) return;
    if (seen.insert(text).second) out.push_back(std::move(text));
  };

  if (cfg.use_aspects && !t.aspects.empty()) {
    const std::size_t n = t.aspects.size();
    const std::size_t k = std::min(kMaxAspectsPerSample, n);
    // Lexicographic walk over k-combinations of aspect positions.
    std::vector<std::size_t> comb(k);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      std::string s;
      for (std::size_t i = 0; i < k; ++i) {
        if (i) s += ", ";
        s += t.aspects[comb[i]];
      }
      add(std::move(s));
      std::size_t i = k;
      while (i > 0 && comb[i - 1] == n - k + (i - 1)) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
  if (cfg.use_captions) {
    for (const auto& c : t.captions) {
      auto sentences = split_sentences(c);
      for (std::size_t len = 1; len <= sentences.size(); ++len) add(join(sentences, len, " "));
    }
  }
  if (cfg.use_lyrics) {
    for (auto& line : segment_lyrics(t.lyrics)) add(std::move(line));
  }
  return out;
}

}  // namespace xmusim
