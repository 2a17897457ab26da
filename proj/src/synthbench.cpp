#include "vpcrf/synthbench.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "vpcrf/checkpoint.hpp"
#include "vpcrf/error.hpp"
#include "vpcrf/report.hpp"

namespace vpcrf {
namespace {

using nlohmann::json;

struct DomainGeometry {
  std::string name;
  std::vector<std::string> slots;
  std::vector<Vector> begin_centers;
  std::vector<Vector> inside_centers;
  Vector background;
};

class Generator {
 public:
  Generator(const SynthConfig& cfg, ContextualStore& store)
      : cfg_(cfg), store_(store), rng_(cfg.seed) {}

  DomainFile domain(const std::string& name, std::size_t n_episodes) {
    const DomainGeometry geo = geometry(name);
    DomainFile file{name, {}};
    for (std::size_t e = 0; e < n_episodes; ++e) {
      Episode ep;
      for (std::size_t r = 0; r < cfg_.shots; ++r) {
        ep.support.items.push_back(support_sentence(geo, fmt::format("{}-e{}-s{}", name, e, r)));
      }
      for (std::size_t q = 0; q < cfg_.query_size; ++q) {
        ep.query.push_back(query_sentence(geo, fmt::format("{}-e{}-q{}", name, e, q)));
      }
      file.episodes.push_back(std::move(ep));
    }
    return file;
  }

 private:
  std::size_t uniform(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  Vector gaussian(double stddev) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(cfg_.dim));
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = stddev * n(rng_);
    return v;
  }

  Vector unit_vector() {
    Vector v = gaussian(1.0);
    while (v.norm() == 0.0) v = gaussian(1.0);
    return v / v.norm();
  }

  DomainGeometry geometry(const std::string& name) {
    DomainGeometry geo;
    geo.name = name;
    for (std::size_t s = 0; s < cfg_.n_slots; ++s) {
      geo.slots.push_back(fmt::format("{}_s{}", name, s));
      const double scale = s == 0 ? cfg_.norm_skew : 1.0;
      geo.begin_centers.push_back(unit_vector() * scale);
      geo.inside_centers.push_back(unit_vector() * scale);
    }
    geo.background = unit_vector() * cfg_.background_norm;
    return geo;
  }

  // Appends one token with its tag and embedding row.
  void emit(const DomainGeometry& geo, std::optional<std::size_t> slot, bool begin,
            LabeledSentence& out, std::vector<Vector>& rows) {
    out.sentence.tokens.push_back(fmt::format("w{}", token_counter_++));
    if (slot) {
      out.tags.push_back(fmt::format("{}-{}", begin ? 'B' : 'I', geo.slots[*slot]));
      const auto& centers = begin ? geo.begin_centers : geo.inside_centers;
      rows.push_back(centers[*slot] + gaussian(cfg_.cluster_std));
    } else {
      out.tags.push_back("O");
      rows.push_back(geo.background + gaussian(cfg_.background_std));
    }
  }

  LabeledSentence finish(LabeledSentence out, const std::vector<Vector>& rows,
                         const std::string& id) {
    out.sentence.id = id;
    EmbeddingMatrix m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cfg_.dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    store_.insert(id, std::move(m));
    return out;
  }

  // Contains exactly one span of every slot, in random order.
  LabeledSentence support_sentence(const DomainGeometry& geo, const std::string& id) {
    const std::size_t len = uniform(std::max(cfg_.min_len, cfg_.n_slots), cfg_.max_len);
    std::vector<std::size_t> span_len(cfg_.n_slots);
    for (auto& l : span_len) l = uniform(1, cfg_.max_span_len);
    std::size_t total = 0;
    for (auto l : span_len) total += l;
    for (std::size_t s = 0; total > len; s = (s + 1) % cfg_.n_slots) {
      if (span_len[s] > 1) {
        --span_len[s];
        --total;
      }
    }
    std::vector<std::size_t> order(cfg_.n_slots);
    for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::size_t> gap_o(cfg_.n_slots + 1, 0);
    for (std::size_t i = 0; i < len - total; ++i) ++gap_o[uniform(0, cfg_.n_slots)];

    LabeledSentence out;
    std::vector<Vector> rows;
    for (std::size_t g = 0; g <= cfg_.n_slots; ++g) {
      for (std::size_t i = 0; i < gap_o[g]; ++i) emit(geo, std::nullopt, false, out, rows);
      if (g == cfg_.n_slots) break;
      const std::size_t slot = order[g];
      for (std::size_t i = 0; i < span_len[slot]; ++i) emit(geo, slot, i == 0, out, rows);
    }
    return finish(std::move(out), rows, id);
  }

  LabeledSentence query_sentence(const DomainGeometry& geo, const std::string& id) {
    const std::size_t len = uniform(cfg_.min_len, cfg_.max_len);
    std::bernoulli_distribution starts_span(cfg_.slot_density);
    LabeledSentence out;
    std::vector<Vector> rows;
    while (out.tags.size() < len) {
      if (starts_span(rng_)) {
        const std::size_t slot = uniform(0, cfg_.n_slots - 1);
        const std::size_t span = std::min(uniform(1, cfg_.max_span_len), len - out.tags.size());
        for (std::size_t i = 0; i < span; ++i) emit(geo, slot, i == 0, out, rows);
      } else {
        emit(geo, std::nullopt, false, out, rows);
      }
    }
    return finish(std::move(out), rows, id);
  }

  const SynthConfig& cfg_;
  ContextualStore& store_;
  std::mt19937_64 rng_;
  std::size_t token_counter_ = 0;
};

struct SeedRun {
  SynthData data;
  Provider provider;
};

SeedRun make_seed_run(const SynthConfig& cfg, std::size_t s) {
  SynthConfig seeded = cfg;
  seeded.seed = cfg.seed + s;
  SynthData data = generate_domains(seeded);
  Provider provider = data.store;
  return {std::move(data), std::move(provider)};
}

TrainResult train_on(const SeedRun& run, Metric metric, const TrainConfig& train_cfg,
                     std::size_t s, bool head, std::size_t dim) {
  TrainConfig seeded = train_cfg;
  seeded.seed = train_cfg.seed + s;
  const auto init = ModelParams::init(metric, head ? std::optional(dim) : std::nullopt);
  return train(init, run.data.train, run.data.val, run.provider, seeded);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_slots == 0 || dim == 0 || shots == 0 || n_train_domains == 0 ||
      n_train_episodes == 0 || n_val_episodes == 0 || n_test_episodes == 0 ||
      query_size == 0 || max_span_len == 0) {
    throw ConfigError("synth: counts and dimensions must be positive");
  }
  if (min_len == 0 || min_len > max_len) throw ConfigError("synth: need 1 <= min_len <= max_len");
  if (max_len < n_slots) {
    throw ConfigError(fmt::format(
        "synth: max_len {} is too short to place one span of each of {} slots", max_len,
        n_slots));
  }
  if (!(cluster_std >= 0.0) || !(background_std >= 0.0) || !(background_norm >= 0.0)) {
    throw ConfigError("synth: spreads and norms must be non-negative");
  }
  if (!(norm_skew >= 1.0)) throw ConfigError("synth: norm_skew must be >= 1");
  if (!(slot_density > 0.0 && slot_density < 1.0)) {
    throw ConfigError("synth: slot_density must lie in (0, 1)");
  }
}

json SynthConfig::to_json() const {
  return {{"n_slots", n_slots},
          {"dim", dim},
          {"shots", shots},
          {"n_train_domains", n_train_domains},
          {"n_train_episodes", n_train_episodes},
          {"n_val_episodes", n_val_episodes},
          {"n_test_episodes", n_test_episodes},
          {"query_size", query_size},
          {"cluster_std", cluster_std},
          {"background_std", background_std},
          {"background_norm", background_norm},
          {"norm_skew", norm_skew},
          {"min_len", min_len},
          {"max_len", max_len},
          {"max_span_len", max_span_len},
          {"slot_density", slot_density},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth: expected an object");
  SynthConfig cfg;
  json merged = cfg.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!merged.contains(key)) throw ConfigError(fmt::format("synth: unknown key '{}'", key));
    merged[key] = value;
  }
  try {
    cfg.n_slots = merged.at("n_slots").get<std::size_t>();
    cfg.dim = merged.at("dim").get<std::size_t>();
    cfg.shots = merged.at("shots").get<std::size_t>();
    cfg.n_train_domains = merged.at("n_train_domains").get<std::size_t>();
    cfg.n_train_episodes = merged.at("n_train_episodes").get<std::size_t>();
    cfg.n_val_episodes = merged.at("n_val_episodes").get<std::size_t>();
    cfg.n_test_episodes = merged.at("n_test_episodes").get<std::size_t>();
    cfg.query_size = merged.at("query_size").get<std::size_t>();
    cfg.cluster_std = merged.at("cluster_std").get<double>();
    cfg.background_std = merged.at("background_std").get<double>();
    cfg.background_norm = merged.at("background_norm").get<double>();
    cfg.norm_skew = merged.at("norm_skew").get<double>();
    cfg.min_len = merged.at("min_len").get<std::size_t>();
    cfg.max_len = merged.at("max_len").get<std::size_t>();
    cfg.max_span_len = merged.at("max_span_len").get<std::size_t>();
    cfg.slot_density = merged.at("slot_density").get<double>();
    cfg.seed = merged.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("synth: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

SynthData generate_domains(const SynthConfig& cfg) {
  cfg.validate();
  SynthData data{{}, {}, {}, ContextualStore(cfg.dim)};
  Generator gen(cfg, data.store);
  for (std::size_t d = 0; d < cfg.n_train_domains; ++d) {
    data.train.push_back(gen.domain(fmt::format("train{}", d), cfg.n_train_episodes));
  }
  data.val = gen.domain("val", cfg.n_val_episodes);
  data.test = gen.domain("test", cfg.n_test_episodes);
  return data;
}

std::vector<BenchRow> run_metric_comparison(const SynthConfig& cfg,
                                            std::span<const Metric> metrics,
                                            const TrainConfig& train_cfg, std::size_t n_seeds,
                                            bool head) {
  if (n_seeds == 0) throw ConfigError("at least one seed is required");
  std::vector<BenchRow> rows(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) rows[m].metric = metrics[m];
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const SeedRun run = make_seed_run(cfg, s);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      const auto trained = train_on(run, metrics[m], train_cfg, s, head, cfg.dim);
      const auto eval = evaluate(trained.best, run.data.test, run.provider, 0, train_cfg);
      rows[m].f1_per_seed.push_back(eval.f1.mean_f1);
      rows[m].errors += eval.errors;
    }
  }
  for (auto& r : rows) {
    r.mean_f1 = mean(r.f1_per_seed);
    r.std_f1 = sample_std(r.f1_per_seed);
  }
  return rows;
}

std::vector<FinetuneRow> run_finetune_trend(const SynthConfig& cfg, Metric metric,
                                            const TrainConfig& train_cfg, std::size_t n_seeds,
                                            std::span<const std::size_t> steps, bool head) {
  if (n_seeds == 0) throw ConfigError("at least one seed is required");
  std::vector<FinetuneRow> rows(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) rows[i].steps = steps[i];
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const SeedRun run = make_seed_run(cfg, s);
    const auto trained = train_on(run, metric, train_cfg, s, head, cfg.dim);
    for (auto& row : rows) {
      const auto eval = evaluate(trained.best, run.data.test, run.provider, row.steps, train_cfg);
      row.f1_per_seed.push_back(eval.f1.mean_f1);
    }
  }
  for (auto& r : rows) {
    r.mean_f1 = mean(r.f1_per_seed);
    r.std_f1 = sample_std(r.f1_per_seed);
  }
  return rows;
}

BenchConfig BenchConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("bench config: expected an object");
  BenchConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "synth") {
        cfg.synth = SynthConfig::from_json(value);
      } else if (key == "train") {
        cfg.train = train_config_from_json(value);
      } else if (key == "metrics") {
        cfg.metrics.clear();
        for (const auto& name : value) {
          const auto m = parse_metric(name.get<std::string>());
          if (!m) throw ConfigError(fmt::format("unknown metric '{}'", name.get<std::string>()));
          cfg.metrics.push_back(*m);
        }
      } else if (key == "seeds") {
        cfg.seeds = value.get<std::size_t>();
      } else if (key == "head") {
        cfg.head = value.get<bool>();
      } else if (key == "finetune_steps") {
        cfg.finetune_steps = value.get<std::vector<std::size_t>>();
      } else {
        throw ConfigError(fmt::format("bench config: unknown key '{}'", key));
      }
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("bench config '{}': {}", key, e.what()));
    }
  }
  if (cfg.metrics.empty()) throw ConfigError("bench config: no metrics");
  if (cfg.seeds == 0) throw ConfigError("bench config: seeds must be positive");
  return cfg;
}

}  // namespace vpcrf
