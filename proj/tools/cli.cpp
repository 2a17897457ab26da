#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "vpcrf/checkpoint.hpp"
#include "vpcrf/corpus.hpp"
#include "vpcrf/error.hpp"
#include "vpcrf/report.hpp"
#include "vpcrf/synthbench.hpp"
#include "vpcrf/training.hpp"

namespace vpcrf::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::vector<fs::path> train_files;
  fs::path val_file;
  std::optional<fs::path> test_file;
  EmbeddingSpec embeddings;
  Metric metric = Metric::VP;
  bool head = false;
  TrainConfig train;
  std::size_t finetune_steps = 0;
};

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    std::string_view section) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", section));
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", section, key));
    }
  }
}

Metric metric_from_name(const std::string& name) {
  const auto m = parse_metric(name);
  if (!m) {
    throw ConfigError(fmt::format(
        "unknown metric '{}' (expected vp, vpb, dot, rproj, cosine, sqeuclid, scaled-dot, "
        "dot-bias)",
        name));
  }
  return *m;
}

json read_json_file(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
}

RunConfig load_run_config(const fs::path& path) {
  const json root = read_json_file(path);
  const fs::path base = path.parent_path();
  auto resolve = [&base](const json& v) {
    fs::path p = v.get<std::string>();
    return (p.is_relative() ? base / p : p).lexically_normal();
  };

  RunConfig cfg;
  try {
    reject_unknown(root, {"data", "embeddings", "model", "train", "eval", "seed", "seeds"},
                   "config");
    if (!root.contains("data") || !root.contains("embeddings")) {
      throw ConfigError("config: 'data' and 'embeddings' sections are required");
    }
    const auto& data = root.at("data");
    reject_unknown(data, {"train", "val", "test"}, "data");
    if (!data.contains("train") || !data.contains("val")) {
      throw ConfigError("data: 'train' and 'val' are required");
    }
    for (const auto& p : data.at("train")) cfg.train_files.push_back(resolve(p));
    if (cfg.train_files.empty()) throw ConfigError("data.train: at least one file required");
    cfg.val_file = resolve(data.at("val"));
    if (data.contains("test")) cfg.test_file = resolve(data.at("test"));

    cfg.embeddings = EmbeddingSpec::from_json(root.at("embeddings"), base);

    if (root.contains("model")) {
      const auto& model = root.at("model");
      reject_unknown(model, {"metric", "head"}, "model");
      if (model.contains("metric")) cfg.metric = metric_from_name(model.at("metric").get<std::string>());
      cfg.head = model.value("head", false);
    }
    if (root.contains("train")) cfg.train = train_config_from_json(root.at("train"));
    if (root.contains("eval")) {
      const auto& ev = root.at("eval");
      reject_unknown(ev, {"averaging", "finetune_steps"}, "eval");
      if (ev.contains("averaging")) {
        cfg.train = train_config_from_json({{"averaging", ev.at("averaging")}}, cfg.train);
      }
      cfg.finetune_steps = ev.value("finetune_steps", std::size_t{0});
    }
    if (root.contains("seed")) cfg.train.seed = root.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return cfg;
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << contents;
  if (!out) throw ConfigError(fmt::format("failed writing '{}'", path.string()));
}

Table history_table(const std::vector<PassRecord>& history) {
  Table t{{"pass", "mean_loss", "val_f1"}, {}};
  for (const auto& r : history) {
    t.rows.push_back({std::to_string(r.pass), fmt::format("{:.6f}", r.mean_loss),
                      format_real(r.val_f1)});
  }
  return t;
}

Table per_episode_table(const EpisodeF1& f1) {
  Table t{{"episode", "precision", "recall", "f1", "tp", "n_pred", "n_gold"}, {}};
  for (std::size_t e = 0; e < f1.per_episode.size(); ++e) {
    const auto& r = f1.per_episode[e];
    t.rows.push_back({std::to_string(e), format_real(r.precision), format_real(r.recall),
                      format_real(r.f1), std::to_string(r.tp), std::to_string(r.n_pred),
                      std::to_string(r.n_gold)});
  }
  return t;
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::string metric;
  std::optional<std::size_t> finetune_steps;
  bool errors = false;
  bool finetune_trend = false;
  std::string out;
  std::string format = "tsv";
  std::string checkpoint;
  std::string data;
};

TableFormat table_format(const Options& opt) {
  const auto f = parse_table_format(opt.format);
  if (!f) throw ConfigError(fmt::format("unknown format '{}' (expected tsv or md)", opt.format));
  return *f;
}

int cmd_train(const Options& opt, std::ostream& out) {
  RunConfig cfg = load_run_config(opt.config);
  if (opt.seed) cfg.train.seed = *opt.seed;
  if (!opt.metric.empty()) cfg.metric = metric_from_name(opt.metric);
  const auto format = table_format(opt);

  std::vector<DomainFile> sources;
  for (const auto& p : cfg.train_files) sources.push_back(load_domain_file(p));
  const DomainFile val = load_domain_file(cfg.val_file);
  const Provider provider = load_provider(cfg.embeddings);

  const auto init = ModelParams::init(
      cfg.metric, cfg.head ? std::optional(provider_dim(provider)) : std::nullopt);
  const TrainResult result = train(init, sources, val, provider, cfg.train);

  const fs::path ckpt_path = opt.out.empty() ? fs::path("checkpoint.json") : fs::path(opt.out);
  Checkpoint ckpt{result.best, cfg.embeddings, cfg.train, result.best_pass, 0.0};
  if (result.best_pass > 0) ckpt.val_f1 = result.history[result.best_pass - 1].val_f1;
  write_file(ckpt_path, serialize_checkpoint(ckpt));
  const Table history = history_table(result.history);
  write_file(fs::path(ckpt_path.string() + ".history.tsv"), history.render(TableFormat::Tsv));
  out << history.render(format);
  return 0;
}

struct LoadedModel {
  Checkpoint ckpt;
  Provider provider;
  DomainFile data;
};

LoadedModel load_model(const Options& opt) {
  Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  Provider provider = load_provider(ckpt.embeddings);
  if (ckpt.params.head && ckpt.params.head->in_dim() != provider_dim(provider)) {
    throw DataError(fmt::format("checkpoint head expects dimension {}, provider gives {}",
                                ckpt.params.head->in_dim(), provider_dim(provider)));
  }
  DomainFile data = load_domain_file(opt.data);
  return {std::move(ckpt), std::move(provider), std::move(data)};
}

int cmd_eval(const Options& opt, std::ostream& out) {
  const auto format = table_format(opt);
  const LoadedModel model = load_model(opt);
  const std::size_t steps = opt.finetune_steps.value_or(0);
  const EvalResult result =
      evaluate(model.ckpt.params, model.data, model.provider, steps, model.ckpt.config);

  const std::string label = steps > 0 ? fmt::format("{}+ft{}", metric_name(model.ckpt.params.metric), steps)
                                      : std::string(metric_name(model.ckpt.params.metric));
  const ScoreRow row{model.data.domain, label, result.f1.mean_f1, std::nullopt};
  out << score_table(std::span(&row, 1)).render(format);
  out << '\n';
  const Table episodes = per_episode_table(result.f1);
  out << episodes.render(format);
  if (!opt.out.empty()) write_file(opt.out, episodes.render(TableFormat::Tsv));
  if (opt.errors) {
    const ErrorRow er{label, result.errors};
    out << '\n' << error_table(std::span(&er, 1)).render(format);
  }
  return 0;
}

int cmd_decode(const Options& opt, std::ostream& out) {
  const LoadedModel model = load_model(opt);
  std::string text;
  for (const auto& ep : model.data.episodes) {
    const auto pred = decode_episode(model.ckpt.params, ep, model.provider);
    for (std::size_t s = 0; s < ep.query.size(); ++s) {
      const auto& item = ep.query[s];
      for (std::size_t i = 0; i < item.tags.size(); ++i) {
        text += fmt::format("{} {} {}\n", item.sentence.tokens[i], item.tags[i], pred[s][i]);
      }
      text += '\n';
    }
  }
  if (opt.out.empty()) {
    out << text;
  } else {
    write_file(opt.out, text);
  }
  return 0;
}

void emit_synth_data(const BenchConfig& cfg, const fs::path& dir) {
  const SynthData data = generate_domains(cfg.synth);
  json train_files = json::array();
  for (const auto& d : data.train) {
    write_file(dir / (d.domain + ".json"), serialize_domain_file(d));
    train_files.push_back(d.domain + ".json");
  }
  write_file(dir / "val.json", serialize_domain_file(data.val));
  write_file(dir / "test.json", serialize_domain_file(data.test));
  write_file(dir / "embeddings.jsonl", data.store.serialize_jsonl());
  json run = {
      {"data", {{"train", train_files}, {"val", "val.json"}, {"test", "test.json"}}},
      {"embeddings", {{"kind", "contextual"}, {"path", "embeddings.jsonl"}}},
      {"model", {{"metric", "vp"}, {"head", cfg.head}}},
      {"train", train_config_to_json(cfg.train)},
      {"seed", cfg.train.seed},
  };
  run["train"].erase("seed");
  write_file(dir / "run.json", run.dump(2) + "\n");
}

int cmd_synth_bench(const Options& opt, std::ostream& out) {
  const auto format = table_format(opt);
  BenchConfig cfg = BenchConfig::from_json(read_json_file(opt.config));
  if (opt.seeds) {
    if (*opt.seeds == 0) throw ConfigError("--seeds must be positive");
    cfg.seeds = *opt.seeds;
  }
  if (opt.seed) {
    cfg.synth.seed = *opt.seed;
    cfg.train.seed = *opt.seed;
  }
  if (!opt.metric.empty()) cfg.metrics = {metric_from_name(opt.metric)};

  const auto rows = run_metric_comparison(cfg.synth, cfg.metrics, cfg.train, cfg.seeds, cfg.head);
  std::vector<ScoreRow> scores;
  std::vector<ErrorRow> errors;
  for (const auto& r : rows) {
    scores.push_back({"synthetic", std::string(metric_name(r.metric)), r.mean_f1, r.std_f1});
    errors.push_back({std::string(metric_name(r.metric)), r.errors});
  }
  const Table table = score_table(scores);
  out << table.render(format);
  if (opt.errors) out << '\n' << error_table(errors).render(format);
  if (opt.finetune_trend) {
    const auto trend = run_finetune_trend(cfg.synth, cfg.metrics.front(), cfg.train, cfg.seeds,
                                          cfg.finetune_steps, cfg.head);
    std::vector<ScoreRow> ft;
    for (const auto& r : trend) {
      ft.push_back({"synthetic",
                    fmt::format("{}+ft{}", metric_name(cfg.metrics.front()), r.steps),
                    r.mean_f1, r.std_f1});
    }
    out << '\n' << score_table(ft).render(format);
  }
  if (!opt.out.empty()) {
    emit_synth_data(cfg, opt.out);
    write_file(fs::path(opt.out) / "table.tsv", table.render(TableFormat::Tsv));
  }
  return 0;
}

int cmd_inspect(const Options& opt, std::ostream& out) {
  const auto format = table_format(opt);
  const DomainFile file = load_domain_file(opt.data);
  const DatasetStats stats = dataset_stats(file);
  Table t{{"statistic", "value"},
          {{"domain", file.domain},
           {"episodes", std::to_string(file.episodes.size())},
           {"avg_support_size", fmt::format("{:.2f}", stats.avg_support_size)},
           {"n_query_sentences", std::to_string(stats.n_query_sentences)},
           {"n_labels", std::to_string(stats.n_labels)}}};
  out << t.render(format);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot sequence labeling with vector-projection CRF emissions"};
  app.require_subcommand(1);
  Options opt;

  auto add_format = [&opt](CLI::App* sub) {
    sub->add_option("--format", opt.format, "Table format: tsv or md");
  };

  auto* train_cmd = app.add_subcommand("train", "Train on source domains, select on validation");
  train_cmd->add_option("--config", opt.config, "Run configuration JSON")->required();
  train_cmd->add_option("--seed", opt.seed, "Override the training seed");
  train_cmd->add_option("--metric", opt.metric, "Override the similarity metric");
  train_cmd->add_option("--out", opt.out, "Checkpoint path (history goes to <out>.history.tsv)");
  add_format(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Episode-averaged span F1 on a domain file");
  eval_cmd->add_option("checkpoint", opt.checkpoint)->required();
  eval_cmd->add_option("data", opt.data)->required();
  eval_cmd->add_option("--finetune-steps", opt.finetune_steps,
                       "Fine-tune on each support set before decoding");
  eval_cmd->add_flag("--errors", opt.errors, "Add the O-X / X-O / X-X table");
  eval_cmd->add_option("--out", opt.out, "Write the per-episode TSV here");
  add_format(eval_cmd);

  auto* decode_cmd = app.add_subcommand("decode", "Print token, gold and predicted tags");
  decode_cmd->add_option("checkpoint", opt.checkpoint)->required();
  decode_cmd->add_option("data", opt.data)->required();
  decode_cmd->add_option("--out", opt.out, "Write to a file instead of stdout");

  auto* bench_cmd = app.add_subcommand("synth-bench", "Synthetic metric comparison");
  bench_cmd->add_option("--config", opt.config, "Benchmark configuration JSON")->required();
  bench_cmd->add_option("--seeds", opt.seeds, "Number of seeds");
  bench_cmd->add_option("--seed", opt.seed, "Base seed for data and training");
  bench_cmd->add_option("--metric", opt.metric, "Run a single metric");
  bench_cmd->add_flag("--errors", opt.errors, "Add the O-X / X-O / X-X table");
  bench_cmd->add_flag("--finetune-trend", opt.finetune_trend,
                      "Add F1 after support-set fine-tuning for the first metric");
  bench_cmd->add_option("--out", opt.out, "Directory for generated data and the table");
  add_format(bench_cmd);

  auto* inspect_cmd = app.add_subcommand("inspect", "Dataset statistics");
  inspect_cmd->add_option("data", opt.data)->required();
  add_format(inspect_cmd);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(opt, out);
    if (eval_cmd->parsed()) return cmd_eval(opt, out);
    if (decode_cmd->parsed()) return cmd_decode(opt, out);
    if (bench_cmd->parsed()) return cmd_synth_bench(opt, out);
    if (inspect_cmd->parsed()) return cmd_inspect(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace vpcrf::cli
