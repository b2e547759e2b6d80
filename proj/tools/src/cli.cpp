#include "xmusim_cli/cli.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmusim/checkpoint.hpp"
#include "xmusim/dataset.hpp"
#include "xmusim/error.hpp"
#include "xmusim/evaluation.hpp"
#include "xmusim/llm.hpp"
#include "xmusim/retrieval.hpp"
#include "xmusim/run_config.hpp"
#include "xmusim/synth.hpp"
#include "xmusim/text_table.hpp"
#include "xmusim/trainer.hpp"

namespace xmusim::cli {

namespace {

namespace fs = std::filesystem;

// Command-line values layered over an optional --config file.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::function<void(RunConfig&)>> overrides;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& o : overrides) o(cfg);
    return cfg;
  }
};

template <class T, class Ref>
void bind(CLI::App* app, ConfigFlags& flags, const std::string& name, Ref ref, const std::string& desc) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(name, *value, desc);
  flags.overrides.push_back([=](RunConfig& cfg) {
    if (opt->count() > 0) ref(cfg) = *value;
  });
}

template <class Ref>
void bind_flag(CLI::App* app, ConfigFlags& flags, const std::string& name, Ref ref, bool value_when_set,
               const std::string& desc) {
  CLI::Option* opt = app->add_flag(name, desc);
  flags.overrides.push_back([=](RunConfig& cfg) {
    if (opt->count() > 0) ref(cfg) = value_when_set;
  });
}

void add_config_option(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.config_path, "JSON run configuration (sections synth, train, text, eval)");
}

void add_text_flags(CLI::App* app, ConfigFlags& flags) {
  bind_flag(app, flags, "--no-aspects", [](RunConfig& c) -> bool& { return c.text.use_aspects; }, false,
            "Do not train on aspect lists");
  bind_flag(app, flags, "--no-captions", [](RunConfig& c) -> bool& { return c.text.use_captions; }, false,
            "Do not train on captions");
  bind_flag(app, flags, "--no-lyrics", [](RunConfig& c) -> bool& { return c.text.use_lyrics; }, false,
            "Do not train on lyric lines");
  bind_flag(app, flags, "--mask", [](RunConfig& c) -> bool& { return c.text.mask; }, true,
            "Replace title and artist mentions with [MASK]");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw DataError("write failure on " + path.string());
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path default_text_table(const std::string& given, const fs::path& data) {
  return given.empty() ? synth_paths(data).text_table : fs::path(given);
}

// ---- synth ----------------------------------------------------------------

struct SynthCmd {
  ConfigFlags flags;
  std::string out;

  void setup(CLI::App* app) {
    app->add_option("--out", out, "Dataset JSONL to write; sibling .audio.xmsm, .text.xmsm and .manifest.json files are created")
        ->required();
    add_config_option(app, flags);
    auto& f = flags;
    bind<std::size_t>(app, f, "--n-tracks", [](RunConfig& c) -> auto& { return c.synth.n_tracks; }, "Number of tracks");
    bind<std::size_t>(app, f, "--n-clusters", [](RunConfig& c) -> auto& { return c.synth.n_clusters; }, "Number of planted clusters");
    bind<std::size_t>(app, f, "--raw-text-dim", [](RunConfig& c) -> auto& { return c.synth.raw_text_dim; }, "Raw text embedding dimension");
    bind<std::size_t>(app, f, "--raw-audio-dim", [](RunConfig& c) -> auto& { return c.synth.raw_audio_dim; }, "Raw audio embedding dimension");
    bind<std::size_t>(app, f, "--min-chunks", [](RunConfig& c) -> auto& { return c.synth.min_chunks; }, "Fewest audio chunks per track");
    bind<std::size_t>(app, f, "--max-chunks", [](RunConfig& c) -> auto& { return c.synth.max_chunks; }, "Most audio chunks per track");
    bind<double>(app, f, "--noise-sigma", [](RunConfig& c) -> auto& { return c.synth.noise_sigma; }, "Gaussian noise per raw vector");
    bind<std::size_t>(app, f, "--artists-per-cluster", [](RunConfig& c) -> auto& { return c.synth.artists_per_cluster; }, "Artists per cluster");
    bind<std::uint64_t>(app, f, "--seed", [](RunConfig& c) -> auto& { return c.synth.seed; }, "Random seed");
    bind<std::size_t>(app, f, "--artist-dim", [](RunConfig& c) -> auto& { return c.synth.artist_dim; }, "Artist signature dimension");
    bind<double>(app, f, "--artist-weight", [](RunConfig& c) -> auto& { return c.synth.artist_weight; }, "Artist signature weight");
    bind<std::size_t>(app, f, "--nuisance-rank", [](RunConfig& c) -> auto& { return c.synth.nuisance_rank; }, "Rank of the per-track audio offset");
    bind<double>(app, f, "--nuisance-scale", [](RunConfig& c) -> auto& { return c.synth.nuisance_scale; }, "Scale of the per-track audio offset");
    bind<double>(app, f, "--anisotropy", [](RunConfig& c) -> auto& { return c.synth.anisotropy; }, "Length of the shared offset");
  }

  void run(std::ostream& os) const {
    const RunConfig cfg = flags.resolve();
    const SynthOutput o = generate(cfg.synth);
    const SynthPaths p = write_synth(o, out);
    os << "wrote " << o.dataset.size() << " tracks to " << p.dataset.string() << "\n"
       << "audio store " << p.audio_store.string() << " (" << o.audio_store.count() << " chunks)\n"
       << "text table " << p.text_table.string() << " (" << o.text_table.count() << " texts)\n"
       << "manifest " << p.manifest.string() << "\n";
  }
};

// ---- describe -------------------------------------------------------------

struct DescribeCmd {
  std::string input, out, model = "gpt-4o-mini";
  bool mock = false;
  std::size_t max_in_flight = 4;

  void setup(CLI::App* app) {
    app->add_option("--input", input, "TSV with columns id, title, artist")->required();
    app->add_option("--out", out, "JSONL of description results")->required();
    app->add_flag("--mock", mock, "Use the deterministic offline generator instead of the endpoint");
    app->add_option("--model", model, "Model name sent to the endpoint")->capture_default_str();
    app->add_option("--max-in-flight", max_in_flight, "Concurrent requests")->capture_default_str()->check(CLI::PositiveNumber);
  }

  void run(std::ostream& os) const {
    std::ifstream in(input);
    if (!in) throw DataError("cannot open " + input);
    std::vector<std::string> ids;
    std::vector<DescriptionRequest> reqs;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty() || line[0] == '#') continue;
      std::vector<std::string> cols;
      std::size_t pos = 0;
      while (true) {
        const std::size_t tab = line.find('\t', pos);
        cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
        if (tab == std::string::npos) break;
        pos = tab + 1;
      }
      if (n == 1 && cols.size() == 3 && cols[0] == "id" && cols[1] == "title" && cols[2] == "artist") continue;
      if (cols.size() != 3) {
        throw DataError(input + ":" + std::to_string(n) + ": expected 3 tab-separated columns, got " +
                        std::to_string(cols.size()));
      }
      DescriptionRequest r{trim(cols[1]), trim(cols[2])};
      if (r.title.empty() || r.artist.empty()) throw DataError(input + ":" + std::to_string(n) + ": empty title or artist");
      ids.push_back(trim(cols[0]));
      reqs.push_back(std::move(r));
    }

    LlmClientConfig cfg = LlmClientConfig::from_env(mock);
    cfg.model = model;
    cfg.max_in_flight = max_in_flight;
    std::unique_ptr<Transport> transport;
    if (!mock) {
      if (cfg.url.empty()) throw UsageError("describe: set XMUSIM_LLM_URL or pass --mock");
      transport = std::make_unique<HttpTransport>(cfg.url, cfg.api_key);
    }
    const auto results = describe_batch(reqs, cfg, transport.get());

    std::ostringstream jsonl;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      nlohmann::ordered_json j = {{"id", ids[i]},         {"caption", r.caption},  {"aspects", r.aspects},
                                  {"raw_response", r.raw_response}, {"provider", r.provider}};
      jsonl << j.dump() << "\n";
    }
    write_text(out, jsonl.str());
    os << "described " << results.size() << " tracks into " << out << "\n";
  }
};

// ---- mask -----------------------------------------------------------------

struct MaskCmd {
  std::string data, out;

  void setup(CLI::App* app) {
    app->add_option("--data", data, "Input dataset JSONL")->required();
    app->add_option("--out", out, "Masked dataset JSONL")->required();
  }

  void run(std::ostream& os) const {
    const Dataset ds = load_dataset(data);
    const fs::path in_dir = fs::absolute(fs::path(data)).parent_path();
    const fs::path out_dir = fs::absolute(fs::path(out)).parent_path();
    std::vector<TrackRecord> tracks = ds.tracks();
    for (auto& t : tracks) {
      for (auto& c : t.captions) c = mask_identifiers(c, t.title, t.artist);
      for (auto& a : t.aspects) a = mask_identifiers(a, t.title, t.artist);
      t.lyrics = mask_identifiers(t.lyrics, t.title, t.artist);
      if (t.audio_ref) t.audio_ref->path = fs::relative(in_dir / t.audio_ref->path, out_dir).generic_string();
    }
    write_dataset(Dataset(std::move(tracks)), out);
    os << "masked " << ds.size() << " tracks into " << out << "\n";
  }
};

// ---- train ----------------------------------------------------------------

struct TrainCmd {
  ConfigFlags flags;
  std::string data, text_table, out_text, out_audio, loss_log;
  bool quiet = false;

  void setup(CLI::App* app) {
    app->add_option("--data", data, "Training dataset JSONL")->required();
    app->add_option("--text-table", text_table, "Raw text embedding store (default: <data stem>.text.xmsm)");
    app->add_option("--out-text-head", out_text, "Text projection head checkpoint")->required();
    app->add_option("--out-audio-head", out_audio, "Audio projection head checkpoint")->required();
    app->add_option("--loss-log", loss_log, "CSV with columns epoch,mean_loss,lr");
    app->add_flag("--quiet", quiet, "No per-epoch progress on stderr");
    add_config_option(app, flags);
    auto& f = flags;
    bind<std::uint64_t>(app, f, "--seed", [](RunConfig& c) -> auto& { return c.train.seed; }, "Random seed");
    bind<std::size_t>(app, f, "--epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }, "Training epochs");
    bind<std::size_t>(app, f, "--batch-size", [](RunConfig& c) -> auto& { return c.train.batch_size; }, "Pairs per batch");
    bind<double>(app, f, "--lr", [](RunConfig& c) -> auto& { return c.train.peak_lr; }, "Peak learning rate");
    bind<std::size_t>(app, f, "--warmup-epochs", [](RunConfig& c) -> auto& { return c.train.warmup_epochs; }, "Linear warmup length");
    bind<double>(app, f, "--tau", [](RunConfig& c) -> auto& { return c.train.tau; }, "Softmax temperature");
    bind<std::size_t>(app, f, "--latent-dim", [](RunConfig& c) -> auto& { return c.train.latent_dim; }, "Shared latent dimension");
    bind<std::size_t>(app, f, "--hidden-dim", [](RunConfig& c) -> auto& { return c.train.hidden_dim; }, "Hidden width (0: latent dim)");
    auto direction = std::make_shared<std::string>();
    CLI::Option* dir_opt = app->add_option("--direction", *direction, "text_to_audio, audio_to_text or symmetric");
    flags.overrides.push_back([=](RunConfig& c) {
      if (dir_opt->count() == 0) return;
      auto d = parse_loss_direction(*direction);
      if (!d) throw UsageError("--direction must be text_to_audio, audio_to_text or symmetric");
      c.train.direction = *d;
    });
    add_text_flags(app, flags);
  }

  void run(std::ostream& os, std::ostream& es) const {
    const RunConfig cfg = flags.resolve();
    const Dataset ds = load_dataset(data);
    const TextEmbeddingTable table = TextEmbeddingTable::load(default_text_table(text_table, data));
    std::ostringstream log;
    log << "epoch,mean_loss,lr\n";
    const auto result = train(ds, table, cfg.text, cfg.train, [&](const EpochStats& s) {
      log << s.epoch << ',' << fmt("%.17g", s.mean_loss) << ',' << fmt("%.17g", s.lr) << '\n';
      if (!quiet) {
        es << "epoch " << (s.epoch + 1) << "/" << cfg.train.epochs << "  loss " << fmt("%.4f", s.mean_loss) << "  lr "
           << fmt("%.3g", s.lr) << "\n";
      }
    });
    write_head(result.text_head, out_text);
    write_head(result.audio_head, out_audio);
    if (!loss_log.empty()) write_text(loss_log, log.str());
    os << "first batch loss " << fmt("%.6f", result.first_batch_loss) << ", final epoch loss "
       << fmt("%.6f", result.history.back().mean_loss) << " (" << result.steps_per_epoch << " steps/epoch)\n";
    if (result.unresolved_collisions > 0) {
      es << "warning: " << result.unresolved_collisions << " same-track pairs shared a batch\n";
    }
  }
};

// ---- index ----------------------------------------------------------------

struct IndexCmd {
  std::string data, audio_head, out;

  void setup(CLI::App* app) {
    app->add_option("--data", data, "Dataset JSONL with audio chunks")->required();
    app->add_option("--audio-head", audio_head, "Audio projection head checkpoint")->required();
    app->add_option("--out", out, "Index file (embedding store)")->required();
  }

  void run(std::ostream& os) const {
    const Dataset ds = load_dataset(data);
    const EmbeddingIndex index = build_index(ds, read_head(audio_head));
    index.save(out);
    os << "indexed " << index.size() << " tracks (dim " << index.dim() << ") into " << out << "\n";
  }
};

// ---- retrieve -------------------------------------------------------------

std::vector<std::string> all_tag_keys(const TrackRecord& t) {
  auto keys = t.tag_keys(TagLevel::coarse);
  for (auto& f : t.tag_keys(TagLevel::fine)) keys.push_back(std::move(f));
  return keys;
}

struct RetrieveCmd {
  std::string index_path, id, text, text_table, text_head, data;
  std::size_t k = 10;

  void setup(CLI::App* app) {
    app->add_option("--index", index_path, "Index file")->required();
    auto* by_id = app->add_option("--query-id", id, "Query by an indexed track id");
    auto* by_text = app->add_option("--query-text", text, "Query by text (needs --text-table and --text-head)");
    by_id->excludes(by_text);
    app->add_option("--text-table", text_table, "Raw text embedding store");
    app->add_option("--text-head", text_head, "Text projection head checkpoint");
    app->add_option("--data", data, "Dataset JSONL, used to list shared tags");
    app->add_option("-k,--k", k, "Number of results")->capture_default_str()->check(CLI::PositiveNumber);
  }

  void run(std::ostream& os) const {
    if (id.empty() == text.empty()) throw UsageError("retrieve: give exactly one of --query-id or --query-text");
    const EmbeddingIndex index = EmbeddingIndex::load(index_path);
    std::optional<Dataset> ds;
    if (!data.empty()) ds = load_dataset(data);

    std::vector<ScoredId> hits;
    std::vector<std::string> query_tags;
    if (!id.empty()) {
      auto row = index.find(id);
      if (!row) throw DataError("retrieve: '" + id + "' is not in the index");
      hits = top_k(index, index.vectors().row(*row), k, id);
      if (ds) {
        if (!ds->find(id)) throw DataError("retrieve: '" + id + "' is not in the dataset");
        query_tags = all_tag_keys(ds->at(id));
      }
    } else {
      if (text_table.empty() || text_head.empty()) throw UsageError("retrieve: --query-text needs --text-table and --text-head");
      const TextEmbeddingTable table = TextEmbeddingTable::load(text_table);
      hits = top_k(index, embed_text_query(text, table, read_head(text_head)), k);
    }

    os << "rank\tid\tscore\tshared_tags\n";
    for (std::size_t r = 0; r < hits.size(); ++r) {
      std::string shared;
      if (ds && !query_tags.empty() && ds->find(hits[r].id)) {
        for (const auto& key : all_tag_keys(ds->at(hits[r].id))) {
          if (std::find(query_tags.begin(), query_tags.end(), key) == query_tags.end()) continue;
          if (!shared.empty()) shared += ',';
          shared += key;
        }
      }
      os << (r + 1) << '\t' << hits[r].id << '\t' << fmt("%.6f", hits[r].score) << '\t' << (shared.empty() ? "-" : shared)
         << '\n';
    }
  }
};

// ---- eval -----------------------------------------------------------------

struct EvalCmd {
  ConfigFlags flags;
  std::string index_path, data, level = "both", mode = "per_tag", report, text_table, text_head;

  void setup(CLI::App* app) {
    app->add_option("--index", index_path, "Index file")->required();
    app->add_option("--data", data, "Dataset JSONL holding the tags")->required();
    app->add_option("--level", level, "coarse, fine or both")
        ->capture_default_str()
        ->check(CLI::IsMember({"coarse", "fine", "both"}));
    app->add_option("--mode", mode, "M2M averaging: per_tag, per_query or both")
        ->capture_default_str()
        ->check(CLI::IsMember({"per_tag", "per_query", "both"}));
    app->add_option("--report", report, "Write the JSON report here");
    app->add_option("--text-table", text_table, "Raw text embedding store (enables T2M)");
    app->add_option("--text-head", text_head, "Text projection head checkpoint (enables T2M)");
    add_config_option(app, flags);
    bind<std::size_t>(app, flags, "--k", [](RunConfig& c) -> auto& { return c.eval.k; }, "Cut-off for M2M and same-artist");
    bind_flag(app, flags, "--same-artist", [](RunConfig& c) -> bool& { return c.eval.same_artist; }, true,
              "Report the same-artist ratio in the top k");
  }

  void run(std::ostream& os) const {
    const RunConfig cfg = flags.resolve();
    if (cfg.eval.k == 0) throw UsageError("eval: --k must be >= 1");
    if (text_table.empty() != text_head.empty()) throw UsageError("eval: T2M needs both --text-table and --text-head");
    const Dataset ds = load_dataset(data);
    const EmbeddingIndex index = EmbeddingIndex::load(index_path);

    std::vector<TagLevel> levels;
    if (level != "fine") levels.push_back(TagLevel::coarse);
    if (level != "coarse") levels.push_back(TagLevel::fine);
    std::vector<M2MMode> modes;
    if (mode != "per_query") modes.push_back(M2MMode::per_tag);
    if (mode != "per_tag") modes.push_back(M2MMode::per_query);

    EvalReport r;
    r.config = flatten(cfg);
    if (flags.config_path.empty()) {
      // Without a config file only the evaluation options are meaningful.
      std::erase_if(r.config, [](const auto& kv) { return kv.first.rfind("eval.", 0) != 0; });
    }
    r.config["eval.level"] = level;
    r.config["eval.mode"] = mode;
    r.config["digest.data"] = file_digest(data);
    r.config["digest.index"] = file_digest(index_path);

    if (!text_table.empty()) {
      r.config["digest.text_table"] = file_digest(text_table);
      r.config["digest.text_head"] = file_digest(text_head);
      const TextEmbeddingTable table = TextEmbeddingTable::load(text_table);
      const ProjectionHead head = read_head(text_head);
      std::vector<TagQuery> queries;
      for (TagLevel l : levels) {
        for (auto& q : build_tag_queries(ds, l)) queries.push_back(std::move(q));
      }
      r.t2m = eval_t2m(index, queries, head, table);
    }

    const NeighborTable neighbors = compute_neighbors(index, cfg.eval.k);
    for (M2MMode m : modes) {
      M2MScores scores;
      for (TagLevel l : levels) {
        const M2MResult res = eval_m2m(index, neighbors, ds, l, m);
        (l == TagLevel::coarse ? scores.coarse : scores.fine) = res.map;
        if (m == M2MMode::per_tag) (l == TagLevel::coarse ? r.per_tag_coarse : r.per_tag_fine) = res.per_tag;
      }
      r.m2m[to_string(m)] = scores;
    }
    if (cfg.eval.same_artist) r.same_artist = same_artist_ratio(index, neighbors, ds);

    if (!report.empty()) write_text(report, to_json(r));
    os << render_text(r);
  }
};

// ---- report ---------------------------------------------------------------

struct ReportCmd {
  std::vector<std::string> reports, labels;
  std::string out;

  void setup(CLI::App* app) {
    app->add_option("reports", reports, "EvalReport JSON files")->required();
    app->add_option("--labels", labels, "Row labels (default: file stems)")->delimiter(',');
    app->add_option("--out", out, "Write the Markdown table here instead of stdout");
  }

  void run(std::ostream& os) const {
    if (!labels.empty() && labels.size() != reports.size()) {
      throw UsageError("report: " + std::to_string(labels.size()) + " labels for " + std::to_string(reports.size()) +
                       " reports");
    }
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      rows.emplace_back(labels.empty() ? fs::path(reports[i]).stem().string() : labels[i],
                        report_from_json(read_text(reports[i])));
    }
    const std::string md = render_markdown(rows);
    if (out.empty()) {
      os << md;
    } else {
      write_text(out, md);
    }
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal music similarity: synthetic data, training, indexing and evaluation", "xmusim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "xmusim 0.1.0");

  SynthCmd synth;
  DescribeCmd describe_cmd;
  MaskCmd mask;
  TrainCmd train_cmd;
  IndexCmd index;
  RetrieveCmd retrieve;
  EvalCmd eval;
  ReportCmd report;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted clusters");
  auto* s_describe = app.add_subcommand("describe", "Generate captions and aspects with an LLM");
  auto* s_mask = app.add_subcommand("mask", "Mask titles and artists in a dataset's texts");
  auto* s_train = app.add_subcommand("train", "Train the text and audio projection heads");
  auto* s_index = app.add_subcommand("index", "Embed every track and write an index");
  auto* s_retrieve = app.add_subcommand("retrieve", "Query an index by track id or text");
  auto* s_eval = app.add_subcommand("eval", "Compute retrieval metrics and write a report");
  auto* s_report = app.add_subcommand("report", "Render reports as a Markdown table");
  synth.setup(s_synth);
  describe_cmd.setup(s_describe);
  mask.setup(s_mask);
  train_cmd.setup(s_train);
  index.setup(s_index);
  retrieve.setup(s_retrieve);
  eval.setup(s_eval);
  report.setup(s_report);

  if (argc <= 1) {
    err << app.help();
    return static_cast<int>(ErrorKind::usage);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    if (s_synth->parsed()) synth.run(out);
    if (s_describe->parsed()) describe_cmd.run(out);
    if (s_mask->parsed()) mask.run(out);
    if (s_train->parsed()) train_cmd.run(out, err);
    if (s_index->parsed()) index.run(out);
    if (s_retrieve->parsed()) retrieve.run(out);
    if (s_eval->parsed()) eval.run(out);
    if (s_report->parsed()) report.run(out);
  } catch (const Error& e) {
    err << "xmusim: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "xmusim: data error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}

}  // namespace xmusim::cli
