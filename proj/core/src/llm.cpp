#include "xmusim/llm.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include <json.hpp>
#include <httplib.h>

#include "xmusim/dataset.hpp"
#include "xmusim/text_pipeline.hpp"

namespace xmusim {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

bool ends_with_terminator(std::string_view s) {
  if (s.empty()) return false;
  const char c = s.back();
  if (c == '.' || c == '!' || c == '?') return true;
  for (std::string_view t : {"。", "！", "？"}) {
    if (s.size() >= t.size() && s.substr(s.size() - t.size()) == t) return true;
  }
  return false;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\t';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// Drops list markers and markdown emphasis around a label.
std::string clean_label(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != '*' && c != '#' && c != '_') out += c;
  }
  out = trim(out);
  while (!out.empty() && (out[0] == '-' || out[0] == ' ')) out.erase(0, 1);
  return lower(trim(out));
}

std::string clean_value(std::string_view s) {
  std::string out = trim(s);
  while (!out.empty() && out[0] == '*') out.erase(0, 1);
  while (!out.empty() && out.back() == '*') out.pop_back();
  return trim(out);
}

std::uint64_t fnv1a(std::string_view a, std::string_view b) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(a);
  mix(std::string_view("\x1f", 1));
  mix(b);
  return h;
}

std::string single_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

template <std::size_t N>
const char* pick(const std::array<const char*, N>& options, Rng& rng) {
  return options[uniform_index(rng, 0, N - 1)];
}

}  // namespace

const std::vector<std::string>& default_target_fields() {
  static const std::vector<std::string> fields = {"genre", "melody", "instrumentation", "tempo",
                                                  "vocal characteristics", "mood", "thematic elements", "lyrics"};
  return fields;
}

void DescriptionRequest::validate() const {
  if (trim(title).empty()) throw UsageError("describe: empty title");
  if (trim(artist).empty()) throw UsageError("describe: empty artist");
  if (target_fields.empty()) throw UsageError("describe: no target fields");
}

std::string build_prompt(const DescriptionRequest& req) {
  req.validate();
  std::string p = "You are a music expert. Describe the song \"" + single_line(req.title) + "\" by " +
                  single_line(req.artist) + ".\n";
  p += "Cover these musical characteristics, in this order:\n";
  for (std::size_t i = 0; i < req.target_fields.size(); ++i) {
    p += std::to_string(i + 1) + ". " + capitalize(req.target_fields[i]) + "\n";
  }
  p += "Answer with exactly one line per characteristic, formatted as \"<Characteristic>: <one or two sentences>\". ";
  p += "Finish with a line \"Aspects: \" followed by 5 to 10 comma-separated keywords describing the song, each at most ";
  p += std::to_string(kMaxAspectWords) + " words. Do not write anything else.\n";
  return p;
}

DescriptionResult parse_response(std::string_view raw, const std::vector<std::string>& fields) {
  std::map<std::string, std::string> values;
  std::optional<std::string> aspect_line;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    const std::string_view line = raw.substr(start, end - start);
    start = end + 1;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const std::string label = clean_label(line.substr(0, colon));
    std::string value = clean_value(line.substr(colon + 1));
    if (label == "aspects") {
      if (!aspect_line) aspect_line = std::move(value);
    } else if (!value.empty()) {
      values.try_emplace(label, std::move(value));
    }
  }

  DescriptionResult r;
  r.raw_response = std::string(raw);
  for (const auto& f : fields) {
    auto it = values.find(lower(f));
    if (it == values.end()) continue;
    std::string sentence = it->second;
    if (!ends_with_terminator(sentence)) sentence += '.';
    if (!r.caption.empty()) r.caption += ' ';
    r.caption += sentence;
  }
  if (r.caption.empty()) throw ParseError("response has no labelled field lines", r.raw_response);
  if (!aspect_line) throw ParseError("response has no Aspects line", r.raw_response);

  std::set<std::string> seen;
  std::size_t pos = 0;
  const std::string& line = *aspect_line;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    std::string a = trim(std::string_view(line).substr(pos, comma - pos));
    pos = comma + 1;
    while (!a.empty() && a.back() == '.') a.pop_back();
    if (a.empty() || word_count(a) > kMaxAspectWords) continue;
    if (seen.insert(lower(a)).second) r.aspects.push_back(std::move(a));
  }
  if (r.aspects.empty()) throw ParseError("Aspects line holds no usable aspect", r.raw_response);
  return r;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",     "about", "above", "after", "again", "all",   "also",  "am",    "an",    "and",   "any",   "are",
      "as",    "at",    "be",    "been",  "being", "both",  "but",   "by",    "can",   "could", "did",   "do",
      "does",  "each",  "few",   "for",   "from",  "had",   "has",   "have",  "he",    "her",   "here",  "him",
      "his",   "how",   "i",     "if",    "in",    "into",  "is",    "it",    "its",   "just",  "me",    "more",
      "most",  "my",    "no",    "not",   "of",    "on",    "once",  "only",  "or",    "other", "our",   "out",
      "over",  "own",   "same",  "she",   "so",    "some",  "song",  "such",  "than",  "that",  "the",   "their",
      "them",  "then",  "there", "these", "they",  "this",  "those", "through", "to",  "too",   "track", "under",
      "up",    "very",  "was",   "we",    "were",  "what",  "when",  "where", "which", "while", "who",   "with",
      "would", "you",   "your"};
  return words;
}

std::vector<std::string> extract_aspects_fallback(std::string_view caption, const std::set<std::string>& stopwords) {
  if (trim(caption).empty()) throw UsageError("extract_aspects_fallback: empty caption");
  // Tokens are maximal runs of ASCII alphanumerics, apostrophes and non-ASCII bytes.
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : caption) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '\'' || c >= 0x80) {
      cur += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));

  struct Stat {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<std::string, Stat> stats;
  std::size_t order = 0;
  auto bump = [&](const std::string& term) {
    auto [it, fresh] = stats.try_emplace(term, Stat{0, order});
    if (fresh) ++order;
    ++it->second.count;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (stopwords.contains(tokens[i])) continue;
    bump(tokens[i]);
    if (i + 1 < tokens.size() && !stopwords.contains(tokens[i + 1])) bump(tokens[i] + " " + tokens[i + 1]);
  }
  std::vector<std::pair<std::string, Stat>> ranked(stats.begin(), stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first < b.second.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) out.push_back(ranked[i].first);
  return out;
}

std::string mock_response(const DescriptionRequest& req) {
  req.validate();
  static constexpr std::array<const char*, 8> genres = {"pop", "rock", "ballad", "hip hop",
                                                        "electronic", "folk", "r&b", "jazz"};
  static constexpr std::array<const char*, 6> melodies = {"a soaring chorus hook", "a gentle stepwise line",
                                                          "a repetitive chant-like motif", "wide melodic leaps",
                                                          "a call-and-response phrase", "a slow descending line"};
  static constexpr std::array<const char*, 7> instruments = {"piano", "acoustic guitar", "synthesizer", "strings",
                                                             "electric guitar", "brass", "drum machine"};
  static constexpr std::array<const char*, 4> tempos = {"slow", "mid-tempo", "upbeat", "fast"};
  static constexpr std::array<const char*, 5> voices = {"breathy", "powerful", "raspy", "falsetto", "smooth"};
  static constexpr std::array<const char*, 6> moods = {"melancholic", "joyful", "nostalgic", "energetic",
                                                       "romantic", "calm"};
  static constexpr std::array<const char*, 6> themes = {"lost love", "self discovery", "summer nights",
                                                        "city life", "friendship", "hope"};

  Rng rng(fnv1a(req.title, req.artist));
  const std::string genre = pick(genres, rng);
  const std::string melody = pick(melodies, rng);
  const std::string inst_a = pick(instruments, rng);
  const std::string inst_b = pick(instruments, rng);
  const std::string tempo = pick(tempos, rng);
  const std::string voice = pick(voices, rng);
  const std::string mood = pick(moods, rng);
  const std::string theme = pick(themes, rng);
  const std::string title = single_line(req.title);
  const std::string artist = single_line(req.artist);

  std::map<std::string, std::string> text = {
      {"genre", "\"" + title + "\" by " + artist + " is a " + genre + " song."},
      {"melody", "The melody is built on " + melody + "."},
      {"instrumentation", "The arrangement centres on " + inst_a + " supported by " + inst_b + "."},
      {"tempo", "The tempo is " + tempo + "."},
      {"vocal characteristics", "The vocals are " + voice + "."},
      {"mood", "The overall mood is " + mood + "."},
      {"thematic elements", "The song is about " + theme + "."},
      {"lyrics", "The lyrics return to images of " + theme + " in every verse."}};
  std::string out;
  for (const auto& f : req.target_fields) {
    auto it = text.find(lower(f));
    out += capitalize(f) + ": " + (it != text.end() ? it->second : "Not much is known about this aspect.") + "\n";
  }
  out += "Aspects: " + genre + ", " + mood + ", " + tempo + ", " + inst_a + ", " + voice + " vocals, " + theme + "\n";
  return out;
}

HttpTransport::HttpTransport(std::string url, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  const std::size_t sep = url.find("://");
  if (sep == std::string::npos) throw UsageError("LLM endpoint URL needs a scheme: " + url);
  const std::string scheme = lower(url.substr(0, sep));
  if (scheme != "http" && scheme != "https") throw UsageError("unsupported LLM endpoint scheme: " + scheme);
  const std::size_t slash = url.find('/', sep + 3);
  origin_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

HttpResponse HttpTransport::post(const std::string& json_body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, json_body, "application/json");
  if (!res) throw TransportError("LLM endpoint unreachable: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

LlmClientConfig LlmClientConfig::from_env(bool mock) {
  LlmClientConfig cfg;
  cfg.mock = mock;
  if (const char* url = std::getenv("XMUSIM_LLM_URL")) cfg.url = url;
  if (const char* key = std::getenv("XMUSIM_LLM_KEY")) cfg.api_key = key;
  return cfg;
}

std::string chat_request_body(const std::string& model, const std::string& prompt) {
  nlohmann::ordered_json j = {{"model", model}, {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  return j.dump();
}

std::string chat_response_text(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("unexpected chat response: ") + e.what(), body);
  }
}

DescriptionResult describe(const DescriptionRequest& req, const LlmClientConfig& cfg, Transport* transport) {
  const std::string prompt = build_prompt(req);
  if (cfg.mock) {
    DescriptionResult r = parse_response(mock_response(req), req.target_fields);
    r.provider = "mock";
    return r;
  }
  if (!transport) throw UsageError("describe: no LLM endpoint configured (set XMUSIM_LLM_URL or use --mock)");
  const std::size_t attempts = std::max<std::size_t>(1, cfg.max_attempts);
  const std::string body = chat_request_body(cfg.model, prompt);

  std::string last_error;
  std::optional<std::string> last_raw;  // set when the last failure was a parse failure
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const auto delay = cfg.backoff * (1LL << (attempt - 1));
      if (cfg.sleep) {
        cfg.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
    HttpResponse resp;
    try {
      resp = transport->post(body);
    } catch (const TransportError& e) {
      last_error = e.what();
      last_raw.reset();
      continue;
    }
    if (resp.status == 429 || resp.status >= 500) {
      last_error = "LLM endpoint returned HTTP " + std::to_string(resp.status);
      last_raw.reset();
      continue;
    }
    if (resp.status < 200 || resp.status >= 300) {
      throw ServiceError("LLM endpoint rejected the request with HTTP " + std::to_string(resp.status));
    }
    try {
      const std::string text = chat_response_text(resp.body);
      DescriptionResult r = parse_response(text, req.target_fields);
      r.provider = cfg.model;
      return r;
    } catch (const ParseError& e) {
      last_error = e.what();
      last_raw = e.raw();
    }
  }
  const std::string msg =
      "describe \"" + req.title + "\" by " + req.artist + " failed after " + std::to_string(attempts) + " attempts: " + last_error;
  if (last_raw) throw ParseError(msg, *last_raw);
  throw ServiceError(msg);
}

std::vector<DescriptionResult> describe_batch(const std::vector<DescriptionRequest>& reqs, const LlmClientConfig& cfg,
                                              Transport* transport) {
  std::vector<DescriptionResult> results(reqs.size());
  std::vector<std::exception_ptr> errors(reqs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < reqs.size(); i = next++) {
      try {
        results[i] = describe(reqs[i], cfg, transport);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(std::max<std::size_t>(1, cfg.max_in_flight), reqs.size());
  if (cfg.mock || n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace xmusim
