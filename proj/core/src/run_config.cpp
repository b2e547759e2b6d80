#include "xmusim/run_config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "xmusim/error.hpp"

namespace xmusim {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Field {
  const char* key;
  std::function<ordered_json(const RunConfig&)> get;
  std::function<void(RunConfig&, const ordered_json&)> set;
};

template <class T, class Section>
Field field(const char* key, Section section, T member) {
  return {key, [=](const RunConfig& c) { return ordered_json(std::invoke(section, c).*member); },
          [=](RunConfig& c, const ordered_json& v) {
            using V = std::remove_reference_t<decltype(std::invoke(section, c).*member)>;
            std::invoke(section, c).*member = v.get<V>();
          }};
}

template <class Member>
auto synth_field(const char* key, Member m) {
  return field(key, [](auto& c) -> auto& { return c.synth; }, m);
}
template <class Member>
auto train_field(const char* key, Member m) {
  return field(key, [](auto& c) -> auto& { return c.train; }, m);
}
template <class Member>
auto text_field(const char* key, Member m) {
  return field(key, [](auto& c) -> auto& { return c.text; }, m);
}
template <class Member>
auto eval_field(const char* key, Member m) {
  return field(key, [](auto& c) -> auto& { return c.eval; }, m);
}

const std::vector<std::pair<const char*, std::vector<Field>>>& schema() {
  static const std::vector<std::pair<const char*, std::vector<Field>>> s = [] {
    std::vector<std::pair<const char*, std::vector<Field>>> out;
    out.push_back({"synth",
                   {synth_field("n_tracks", &SynthConfig::n_tracks), synth_field("n_clusters", &SynthConfig::n_clusters),
                    synth_field("raw_text_dim", &SynthConfig::raw_text_dim),
                    synth_field("raw_audio_dim", &SynthConfig::raw_audio_dim),
                    synth_field("min_chunks", &SynthConfig::min_chunks), synth_field("max_chunks", &SynthConfig::max_chunks),
                    synth_field("noise_sigma", &SynthConfig::noise_sigma),
                    synth_field("artists_per_cluster", &SynthConfig::artists_per_cluster),
                    synth_field("seed", &SynthConfig::seed), synth_field("artist_dim", &SynthConfig::artist_dim),
                    synth_field("artist_weight", &SynthConfig::artist_weight),
                    synth_field("nuisance_rank", &SynthConfig::nuisance_rank),
                    synth_field("nuisance_scale", &SynthConfig::nuisance_scale),
                    synth_field("anisotropy", &SynthConfig::anisotropy)}});
    std::vector<Field> train = {
        train_field("batch_size", &TrainConfig::batch_size), train_field("epochs", &TrainConfig::epochs),
        train_field("peak_lr", &TrainConfig::peak_lr), train_field("warmup_epochs", &TrainConfig::warmup_epochs),
        train_field("tau", &TrainConfig::tau), train_field("seed", &TrainConfig::seed),
        train_field("latent_dim", &TrainConfig::latent_dim), train_field("hidden_dim", &TrainConfig::hidden_dim)};
    train.push_back({"direction", [](const RunConfig& c) { return ordered_json(to_string(c.train.direction)); },
                     [](RunConfig& c, const ordered_json& v) {
                       auto d = parse_loss_direction(v.get<std::string>());
                       if (!d) throw UsageError("config: train.direction must be text_to_audio, audio_to_text or symmetric");
                       c.train.direction = *d;
                     }});
    train.push_back({"adam_beta1", [](const RunConfig& c) { return ordered_json(c.train.adam.beta1); },
                     [](RunConfig& c, const ordered_json& v) { c.train.adam.beta1 = v.get<double>(); }});
    train.push_back({"adam_beta2", [](const RunConfig& c) { return ordered_json(c.train.adam.beta2); },
                     [](RunConfig& c, const ordered_json& v) { c.train.adam.beta2 = v.get<double>(); }});
    train.push_back({"adam_eps", [](const RunConfig& c) { return ordered_json(c.train.adam.eps); },
                     [](RunConfig& c, const ordered_json& v) { c.train.adam.eps = v.get<double>(); }});
    out.push_back({"train", std::move(train)});
    out.push_back({"text",
                   {text_field("use_aspects", &TextConfig::use_aspects), text_field("use_captions", &TextConfig::use_captions),
                    text_field("use_lyrics", &TextConfig::use_lyrics), text_field("mask", &TextConfig::mask)}});
    out.push_back({"eval", {eval_field("k", &EvalOptions::k), eval_field("same_artist", &EvalOptions::same_artist)}});
    return out;
  }();
  return s;
}

ordered_json to_ordered(const RunConfig& cfg) {
  ordered_json j = ordered_json::object();
  for (const auto& [section, fields] : schema()) {
    ordered_json s = ordered_json::object();
    for (const auto& f : fields) s[f.key] = f.get(cfg);
    j[section] = std::move(s);
  }
  return j;
}

}  // namespace

std::string to_json(const RunConfig& cfg) { return to_ordered(cfg).dump(2) + "\n"; }

RunConfig run_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  RunConfig cfg;
  for (const auto& [name, body] : j.items()) {
    auto sec = std::find_if(schema().begin(), schema().end(), [&](const auto& s) { return name == s.first; });
    if (sec == schema().end()) throw UsageError("config: unknown section '" + name + "'");
    if (!body.is_object()) throw UsageError("config: section '" + name + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      auto f = std::find_if(sec->second.begin(), sec->second.end(), [&](const Field& x) { return key == x.key; });
      if (f == sec->second.end()) throw UsageError("config: unknown key '" + name + "." + key + "'");
      try {
        f->set(cfg, value);
      } catch (const nlohmann::json::exception&) {
        throw UsageError("config: wrong type for '" + name + "." + key + "'");
      }
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return run_config_from_json(ss.str());
}

std::map<std::string, std::string> flatten(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  const ordered_json j = to_ordered(cfg);
  for (const auto& [section, body] : j.items()) {
    for (const auto& [key, value] : body.items()) {
      out[section + "." + key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return out;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw DataError("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  if (f.bad()) throw DataError("failed reading " + path.string());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

}  // namespace xmusim
