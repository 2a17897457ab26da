#pragma once

// Seeded synthetic few-shot domains with controllable cluster geometry, and
// the metric-comparison and fine-tuning experiments that run on them.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "vpcrf/corpus.hpp"
#include "vpcrf/embeddings.hpp"
#include "vpcrf/evaluation.hpp"
#include "vpcrf/similarity.hpp"
#include "vpcrf/training.hpp"

namespace vpcrf {

struct SynthConfig {
  std::size_t n_slots = 4;
  std::size_t dim = 32;
  std::size_t shots = 5;
  std::size_t n_train_domains = 3;
  std::size_t n_train_episodes = 40;  // per training domain
  std::size_t n_val_episodes = 20;
  std::size_t n_test_episodes = 40;
  std::size_t query_size = 8;
  // Slot tokens: the slot's B or I center plus N(0, cluster_std^2) per coordinate.
  double cluster_std = 0.3;
  // O tokens: a background center of norm background_norm plus
  // N(0, background_std^2) per coordinate.
  double background_std = 0.4;
  double background_norm = 0.5;
  // Multiplier on both centers of slot 0 in every domain.
  double norm_skew = 1.0;
  std::size_t min_len = 6;
  std::size_t max_len = 14;
  std::size_t max_span_len = 3;
  double slot_density = 0.2;
  std::uint64_t seed = 0;

  // Throws ConfigError for infeasible settings.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthData {
  std::vector<DomainFile> train;
  DomainFile val;
  DomainFile test;
  ContextualStore store;
};

SynthData generate_domains(const SynthConfig& cfg);

struct BenchRow {
  Metric metric = Metric::VP;
  std::vector<double> f1_per_seed;
  double mean_f1 = 0.0;
  std::optional<double> std_f1;
  ErrorCounts errors;  // summed over seeds
};

// One model per (metric, seed). Seed s uses synth seed cfg.seed + s and
// training seed train.seed + s.
std::vector<BenchRow> run_metric_comparison(const SynthConfig& cfg,
                                            std::span<const Metric> metrics,
                                            const TrainConfig& train_cfg, std::size_t n_seeds,
                                            bool head = false);

struct FinetuneRow {
  std::size_t steps = 0;
  std::vector<double> f1_per_seed;
  double mean_f1 = 0.0;
  std::optional<double> std_f1;
};

// Trains once per seed, then evaluates the test domain after each number
// of per-episode fine-tuning steps.
std::vector<FinetuneRow> run_finetune_trend(const SynthConfig& cfg, Metric metric,
                                            const TrainConfig& train_cfg, std::size_t n_seeds,
                                            std::span<const std::size_t> steps,
                                            bool head = false);

// Frozen experiment description read by the CLI and the acceptance suite.
struct BenchConfig {
  SynthConfig synth;
  TrainConfig train;
  std::vector<Metric> metrics{std::begin(kAllMetrics), std::end(kAllMetrics)};
  std::size_t seeds = 5;
  bool head = false;
  std::vector<std::size_t> finetune_steps{0, 1, 3, 5, 10};

  static BenchConfig from_json(const nlohmann::json& j);
};

}  // namespace vpcrf
