#pragma once

#include <filesystem>
#include <string>

#include "xmusim/evaluation.hpp"
#include "xmusim/synth.hpp"
#include "xmusim/text_pipeline.hpp"
#include "xmusim/trainer.hpp"

namespace xmusim {

struct EvalOptions {
  std::size_t k = 100;
  bool same_artist = false;
};

/// Everything a run can be configured with. Serialised as one JSON object with the
/// sections "synth", "train", "text" and "eval"; absent keys keep their defaults.
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
  TextConfig text;
  EvalOptions eval;
};

std::string to_json(const RunConfig& cfg);
/// Throws UsageError on unknown sections or keys and on values of the wrong type.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Flat "section.key" -> value rendering, used to echo the effective config into reports.
std::map<std::string, std::string> flatten(const RunConfig& cfg);

/// Lowercase hex SHA-256 of a file's bytes. Throws DataError when unreadable.
std::string file_digest(const std::filesystem::path& path);

}  // namespace xmusim
