#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "xmusim/error.hpp"
#include "xmusim/text_pipeline.hpp"

using namespace xmusim;

namespace {

bool icontains(std::string_view hay, std::string_view needle) {
  auto lower = [](std::string_view s) {
    std::string o(s);
    for (auto& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return o;
  };
  return lower(hay).find(lower(needle)) != std::string::npos;
}

TrackRecord track(std::string id, std::vector<std::string> aspects, std::vector<std::string> captions,
                  std::string lyrics) {
  TrackRecord t;
  t.id = std::move(id);
  t.title = "Hello";
  t.artist = "Adele";
  t.aspects = std::move(aspects);
  t.captions = std::move(captions);
  t.lyrics = std::move(lyrics);
  return t;
}

}  // namespace

TEST_CASE("split_sentences") {
  CHECK(split_sentences("A. B? C!") == std::vector<std::string>{"A.", "B?", "C!"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   ").empty());
  CHECK(split_sentences("这是一首歌。很动听！") == std::vector<std::string>{"这是一首歌。", "很动听！"});
  CHECK(split_sentences("Wait... what?! ok") == std::vector<std::string>{"Wait...", "what?!", "ok"});
  CHECK(split_sentences("no terminator") == std::vector<std::string>{"no terminator"});
}

TEST_CASE("sample_caption_block returns a prefix") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_caption_block("", rng), DataError);
  for (int i = 0; i < 20; ++i) CHECK(sample_caption_block("Only one.", rng) == "Only one.");
  const std::string cap = "One. Two! Three? Four.";
  const std::vector<std::string> prefixes = {"One.", "One. Two!", "One. Two! Three?", "One. Two! Three? Four."};
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    const auto s = sample_caption_block(cap, a);
    CHECK(std::find(prefixes.begin(), prefixes.end(), s) != prefixes.end());
    CHECK(sample_caption_block(cap, b) == s);
  }
}

TEST_CASE("caption block length is uniform over 1..S") {
  const std::string cap = "One. Two. Three. Four.";
  std::map<std::size_t, int> counts;
  Rng rng(2024);
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[split_sentences(sample_caption_block(cap, rng)).size()]++;
  for (std::size_t len = 1; len <= 4; ++len) {
    const double f = static_cast<double>(counts[len]) / n;
    CHECK(std::abs(f - 0.25) <= 0.02);
  }
}

TEST_CASE("sample_aspects") {
  Rng rng(5);
  CHECK_THROWS_AS(sample_aspects({}, rng), DataError);
  const std::vector<std::string> three = {"a", "b", "c"};
  for (int i = 0; i < 10; ++i) CHECK(sample_aspects(three, rng) == "a, b, c");
  const std::vector<std::string> seven = {"a", "b", "c", "d", "e", "f", "g"};
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_aspects(seven, rng);
    std::set<std::string> items;
    std::size_t pos = 0;
    while (true) {
      const auto c = s.find(", ", pos);
      items.insert(s.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
      if (c == std::string::npos) break;
      pos = c + 2;
    }
    CHECK(items.size() == 5);
  }
}

TEST_CASE("each of 7 aspects is included with frequency 5/7") {
  const std::vector<std::string> seven = {"a", "b", "c", "d", "e", "f", "g"};
  std::map<std::string, int> counts;
  Rng rng(77);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_aspects(seven, rng);
    for (const auto& a : seven) {
      if (s.find(a) != std::string::npos) counts[a]++;
    }
  }
  for (const auto& a : seven) CHECK(std::abs(static_cast<double>(counts[a]) / n - 5.0 / 7.0) <= 0.02);
}

TEST_CASE("segment_lyrics") {
  CHECK(segment_lyrics("a\nb\n\nc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(segment_lyrics("").empty());
  CHECK(segment_lyrics("single") == std::vector<std::string>{"single"});
  CHECK(segment_lyrics(" x \r\n\n y") == std::vector<std::string>{"x", "y"});
}

TEST_CASE("mask_identifiers") {
  CHECK(mask_identifiers("Hello by Adele is soulful", "Hello", "Adele") == "[MASK] by [MASK] is soulful");
  CHECK(mask_identifiers("nothing here", "Hello", "Adele") == "nothing here");
  CHECK(mask_identifiers("HELLO, adele!", "Hello", "Adele") == "[MASK], [MASK]!");
  // title is a substring of the artist name: the artist is masked as one token
  CHECK(mask_identifiers("Queen Bee by Queen Bee Band", "Queen Bee", "Queen Bee Band") == "[MASK] by [MASK]");
  CHECK(mask_identifiers("Rain by Rain Man", "Rain", "Rain Man") == "[MASK] by [MASK]");
  CHECK(mask_identifiers("text", "", "") == "text");
}

TEST_CASE("mask_identifiers is idempotent") {
  Rng rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    auto word = [&](std::size_t len) {
      std::string s;
      for (std::size_t i = 0; i < len; ++i) s += "abAB "[uniform_index(rng, 0, 4)];
      return s;
    };
    std::string text;
    const auto parts = uniform_index(rng, 1, 6);
    for (std::uint64_t p = 0; p < parts; ++p) text += uniform_index(rng, 0, 4) == 0 ? "[MASK]" : word(uniform_index(rng, 1, 5));
    const std::string title = word(uniform_index(rng, 1, 3));
    const std::string artist = word(uniform_index(rng, 1, 3));
    const auto once = mask_identifiers(text, title, artist);
    CHECK(mask_identifiers(once, title, artist) == once);
  }
}

TEST_CASE("build_training_samples counts and order") {
  std::vector<TrackRecord> tracks;
  for (int i = 0; i < 10; ++i) {
    tracks.push_back(track("t" + std::to_string(i), {"x", "y"}, i == 3 ? std::vector<std::string>{} : std::vector<std::string>{"Cap one. Cap two."},
                           "l1\nl2"));
  }
  const Dataset ds(tracks);
  Rng rng(3);
  TextConfig aspects_only{true, false, false, false};
  CHECK(build_training_samples(ds, aspects_only, rng).size() == 10);

  TextConfig ac{true, true, false, false};
  const auto s = build_training_samples(ds, ac, rng);
  CHECK(s.size() == 19);
  CHECK(s[6].track_id == "t3");
  CHECK(s[6].kind == TextKind::aspect);
  CHECK(s[7].track_id == "t4");

  TextConfig all;
  const auto full = build_training_samples(ds, all, rng);
  CHECK(full.size() == 29);
  CHECK(full[0].kind == TextKind::aspect);
  CHECK(full[1].kind == TextKind::caption);
  CHECK(full[2].kind == TextKind::lyrics);

  TextConfig none{false, false, false, false};
  CHECK_THROWS_AS(build_training_samples(ds, none, rng), UsageError);
}

TEST_CASE("build_training_samples is a pure function of the seed") {
  const Dataset ds({track("a", {"1", "2", "3", "4", "5", "6", "7"}, {"A. B. C."}, "x\ny\nz")});
  Rng a(42), b(42);
  for (int i = 0; i < 20; ++i) CHECK(build_training_samples(ds, {}, a) == build_training_samples(ds, {}, b));
}

TEST_CASE("masked samples never contain the artist") {
  std::vector<TrackRecord> tracks;
  for (int i = 0; i < 20; ++i) {
    tracks.push_back(track("t" + std::to_string(i), {"Adele", "soul", "HELLO", "piano", "adele live", "ballad"},
                           {"Hello by Adele. Adele sings it softly. A classic."}, "adele\nhello again\nla la"));
  }
  const Dataset ds(tracks);
  Rng rng(10);
  TextConfig cfg;
  cfg.mask = true;
  for (int epoch = 0; epoch < 20; ++epoch) {
    for (const auto& s : build_training_samples(ds, cfg, rng)) {
      CHECK_FALSE(icontains(s.text, "Adele"));
      CHECK_FALSE(icontains(s.text, "Hello"));
    }
  }
}

TEST_CASE("enumerate_text_variants covers every sampler output") {
  const TrackRecord t = track("a", {"1", "2", "3", "4", "5", "6"}, {"A. B. C.", "D!"}, "x\n\ny");
  const Dataset ds({t});
  for (bool mask : {false, true}) {
    TextConfig cfg;
    cfg.mask = mask;
    const auto variants = enumerate_text_variants(t, cfg);
    CHECK(variants.size() == 6 + 3 + 1 + 2);
    const std::set<std::string> all(variants.begin(), variants.end());
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      for (const auto& s : build_training_samples(ds, cfg, rng)) CHECK(all.count(s.text) == 1);
    }
  }
}
