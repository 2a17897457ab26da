#pragma once

// Episodic training with Adam, support-set fine-tuning, decoding and
// evaluation of a model on a domain file.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vpcrf/corpus.hpp"
#include "vpcrf/crf.hpp"
#include "vpcrf/embeddings.hpp"
#include "vpcrf/evaluation.hpp"
#include "vpcrf/prototypes.hpp"
#include "vpcrf/similarity.hpp"

namespace vpcrf {

struct ModelParams {
  Metric metric = Metric::VP;
  CdtTable cdt;                     // zero-initialized
  std::optional<LinearHead> head;   // identity-initialized when enabled
  std::optional<double> lambda;     // present iff metric == ScaledDot

  // Fresh parameters; `head_dim` enables a square identity head.
  static ModelParams init(Metric metric, std::optional<std::size_t> head_dim = std::nullopt);

  MetricKind metric_kind() const { return {metric, lambda.value_or(1.0)}; }
  std::size_t num_params() const;
};

struct ParamGradients {
  CdtTable cdt;
  std::optional<Matrix> head;
  std::optional<double> lambda;
};

// Flat parameter layout: 16 CDT cells, then the head (row-major), then lambda.
Vector flatten(const ModelParams& params);
Vector flatten(const ParamGradients& grads, const ModelParams& like);
void unflatten(ModelParams& params, const Vector& flat);
// Per-entry learning-rate group: true for CDT cells.
std::vector<bool> transition_mask(const ModelParams& params);

struct TrainConfig {
  double lr_transitions = 1e-3;
  double lr_other = 1e-5;
  std::size_t iterations = 5;
  std::uint64_t seed = 0;
  Averaging averaging = Averaging::Episode;
};

struct EpisodeLoss {
  double loss = 0.0;
  ParamGradients grads;
};

// Sum over query sentences of -log p(y | x, S) and its exact gradient,
// including the path through the support-set prototypes.
EpisodeLoss episode_nll(const ModelParams& params, const Episode& episode,
                        const Provider& provider);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Vector m;
  Vector v;
  std::size_t step = 0;
};

void adam_step(ModelParams& params, const ParamGradients& grads, AdamState& state,
               const TrainConfig& cfg);

struct PassRecord {
  std::size_t pass = 0;  // 1-based
  double mean_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  ModelParams best;
  std::vector<PassRecord> history;
  std::size_t best_pass = 0;  // 0 when no pass ran
};

TrainResult train(const ModelParams& init, std::span<const DomainFile> source,
                  const DomainFile& validation, const Provider& provider,
                  const TrainConfig& cfg);

// `steps` Adam updates on the support set used as its own query batch.
// Optimizer state starts fresh; the input is never modified.
ModelParams finetune_on_support(const ModelParams& params, const Episode& episode,
                                const Provider& provider, std::size_t steps,
                                const TrainConfig& cfg);

// Viterbi tags for each query sentence of the episode.
std::vector<TagSeq> decode_episode(const ModelParams& params, const Episode& episode,
                                   const Provider& provider);

struct EvalResult {
  std::vector<EpisodePredictions> predictions;
  EpisodeF1 f1;
  ErrorCounts errors;
};

// Decodes every episode (optionally after per-episode fine-tuning from the
// same starting params) and scores it.
EvalResult evaluate(const ModelParams& params, const DomainFile& file,
                    const Provider& provider, std::size_t finetune_steps = 0,
                    const TrainConfig& cfg = {});

}  // namespace vpcrf
