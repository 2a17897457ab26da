#include "vpcrf/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "vpcrf/error.hpp"

namespace vpcrf {
namespace {

// Vocabulary without the partner-synthesis warning; parsing already
// reported those once per file.
LabelVocab quiet_vocab(const SupportSet& support) {
  std::vector<std::string> tags;
  for (const auto& item : support.items) tags.insert(tags.end(), item.tags.begin(), item.tags.end());
  return LabelVocab::from_tags(tags);
}

Path gold_path(const LabelVocab& vocab, const TagSeq& tags) {
  Path path(tags.size(), 0);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    // Slots unseen in the support set cannot be represented; score them as O.
    path[i] = vocab.index_of(tags[i]).value_or(0);
  }
  return path;
}

struct PreparedSupport {
  LabelVocab vocab;
  std::vector<EmbeddingMatrix> raw;
  Prototypes prototypes;
};

PreparedSupport prepare_support(const ModelParams& params, const SupportSet& support,
                                const Provider& provider) {
  PreparedSupport out{quiet_vocab(support), {}, {}};
  std::vector<EmbeddingMatrix> projected;
  for (const auto& item : support.items) {
    out.raw.push_back(embed_sentence(provider, item.sentence));
    projected.push_back(params.head ? apply_head(*params.head, out.raw.back())
                                    : out.raw.back());
  }
  out.prototypes = compute_prototypes(projected, support, out.vocab);
  return out;
}

EmbeddingMatrix project(const ModelParams& params, EmbeddingMatrix raw) {
  return params.head ? apply_head(*params.head, raw) : raw;
}

Lattice make_lattice(const ModelParams& params, const PreparedSupport& support,
                     const EmbeddingMatrix& projected) {
  return Lattice{emission_scores(projected, support.prototypes, params.metric_kind()),
                 expand_transitions(params.cdt, support.vocab)};
}

void check_params(const ModelParams& params) {
  if ((params.metric == Metric::ScaledDot) != params.lambda.has_value()) {
    throw NumericError("lambda must be present exactly when the metric is scaled-dot");
  }
}

}  // namespace

ModelParams ModelParams::init(Metric metric, std::optional<std::size_t> head_dim) {
  ModelParams p;
  p.metric = metric;
  if (head_dim) p.head = LinearHead::identity(*head_dim);
  if (metric == Metric::ScaledDot) p.lambda = 1.0;
  return p;
}

std::size_t ModelParams::num_params() const {
  std::size_t n = CdtTable::kNumParams;
  if (head) n += static_cast<std::size_t>(head->weights.size());
  if (lambda) n += 1;
  return n;
}

Vector flatten(const ModelParams& params) {
  Vector out(static_cast<Eigen::Index>(params.num_params()));
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) out[pos++] = params.cdt.param(i);
  if (params.head) {
    const auto& w = params.head->weights;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out[pos++] = w(r, c);
    }
  }
  if (params.lambda) out[pos++] = *params.lambda;
  return out;
}

Vector flatten(const ParamGradients& grads, const ModelParams& like) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(like.num_params()));
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) out[pos++] = grads.cdt.param(i);
  if (like.head) {
    if (!grads.head || grads.head->rows() != like.head->weights.rows() ||
        grads.head->cols() != like.head->weights.cols()) {
      throw NumericError("head gradient shape does not match parameters");
    }
    for (Eigen::Index r = 0; r < grads.head->rows(); ++r) {
      for (Eigen::Index c = 0; c < grads.head->cols(); ++c) out[pos++] = (*grads.head)(r, c);
    }
  }
  if (like.lambda) out[pos++] = grads.lambda.value_or(0.0);
  return out;
}

void unflatten(ModelParams& params, const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != params.num_params()) {
    throw NumericError("flat parameter vector has the wrong size");
  }
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) params.cdt.param(i) = flat[pos++];
  if (params.head) {
    auto& w = params.head->weights;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[pos++];
    }
  }
  if (params.lambda) params.lambda = flat[pos++];
}

std::vector<bool> transition_mask(const ModelParams& params) {
  std::vector<bool> mask(params.num_params(), false);
  std::fill_n(mask.begin(), CdtTable::kNumParams, true);
  return mask;
}

EpisodeLoss episode_nll(const ModelParams& params, const Episode& episode,
                        const Provider& provider) {
  check_params(params);
  const PreparedSupport support = prepare_support(params, episode.support, provider);
  const MetricKind kind = params.metric_kind();
  const auto& protos = support.prototypes.vectors;
  const Eigen::Index K = protos.rows();
  const Eigen::Index d = protos.cols();

  EpisodeLoss out;
  RowMatrix grad_protos = RowMatrix::Zero(K, d);
  Matrix grad_head;
  if (params.head) {
    grad_head = Matrix::Zero(params.head->weights.rows(), params.head->weights.cols());
  }
  double grad_lambda = 0.0;

  for (const auto& item : episode.query) {
    const EmbeddingMatrix raw = embed_sentence(provider, item.sentence);
    const EmbeddingMatrix x = project(params, raw);
    const Lattice lat = make_lattice(params, support, x);
    const Path path = gold_path(support.vocab, item.tags);
    const NllGradients g = nll_gradients(lat, path, support.vocab);
    out.loss += g.nll;
    for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) {
      out.grads.cdt.param(i) += g.d_cdt.param(i);
    }

    RowMatrix grad_x = RowMatrix::Zero(x.rows(), d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index k = 0; k < K; ++k) {
        const double w = g.d_emissions(i, k);
        if (w == 0.0) continue;
        const SimGradient sg = sim_gradient(x.row(i).transpose(), protos.row(k).transpose(), kind);
        grad_x.row(i) += w * sg.dx.transpose();
        grad_protos.row(k) += w * sg.dc.transpose();
        grad_lambda += w * sg.dlambda;
      }
    }
    if (params.head) grad_head += grad_x.transpose() * raw;
  }

  if (params.head) {
    // c_k = M * mean_k(raw support embeddings); empty labels are constant zero.
    const Prototypes raw_means = compute_prototypes(support.raw, episode.support, support.vocab);
    grad_head += grad_protos.transpose() * raw_means.vectors;
    out.grads.head = std::move(grad_head);
  }
  if (params.lambda) out.grads.lambda = grad_lambda;
  return out;
}

void adam_step(ModelParams& params, const ParamGradients& grads, AdamState& state,
               const TrainConfig& cfg) {
  Vector p = flatten(params);
  const Vector g = flatten(grads, params);
  if (state.step == 0) {
    state.m = Vector::Zero(p.size());
    state.v = Vector::Zero(p.size());
  } else if (state.m.size() != p.size() || state.v.size() != p.size()) {
    throw NumericError("optimizer state does not match parameter shape");
  }
  if (!g.allFinite()) throw NumericError("non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
  const auto mask = transition_mask(params);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    state.m[i] = AdamState::kBeta1 * state.m[i] + (1.0 - AdamState::kBeta1) * g[i];
    state.v[i] = AdamState::kBeta2 * state.v[i] + (1.0 - AdamState::kBeta2) * g[i] * g[i];
    const double lr = mask[static_cast<std::size_t>(i)] ? cfg.lr_transitions : cfg.lr_other;
    p[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + AdamState::kEps);
  }
  unflatten(params, p);
}

std::vector<TagSeq> decode_episode(const ModelParams& params, const Episode& episode,
                                   const Provider& provider) {
  check_params(params);
  const PreparedSupport support = prepare_support(params, episode.support, provider);
  std::vector<TagSeq> out;
  out.reserve(episode.query.size());
  for (const auto& item : episode.query) {
    const Lattice lat =
        make_lattice(params, support, project(params, embed_sentence(provider, item.sentence)));
    const auto best = viterbi(lat);
    TagSeq tags;
    tags.reserve(best.path.size());
    for (auto k : best.path) tags.push_back(support.vocab.label(k));
    out.push_back(std::move(tags));
  }
  return out;
}

ModelParams finetune_on_support(const ModelParams& params, const Episode& episode,
                                const Provider& provider, std::size_t steps,
                                const TrainConfig& cfg) {
  ModelParams out = params;
  if (steps == 0) return out;
  const Episode self{episode.support, episode.support.items};
  AdamState state;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto loss = episode_nll(out, self, provider);
    if (!std::isfinite(loss.loss)) throw NumericError("non-finite support loss");
    adam_step(out, loss.grads, state, cfg);
  }
  return out;
}

EvalResult evaluate(const ModelParams& params, const DomainFile& file,
                    const Provider& provider, std::size_t finetune_steps,
                    const TrainConfig& cfg) {
  EvalResult out;
  for (const auto& ep : file.episodes) {
    EpisodePredictions pred;
    if (finetune_steps > 0) {
      pred.pred = decode_episode(finetune_on_support(params, ep, provider, finetune_steps, cfg),
                                 ep, provider);
    } else {
      pred.pred = decode_episode(params, ep, provider);
    }
    for (const auto& item : ep.query) pred.gold.push_back(item.tags);
    out.errors += error_types(pred.pred, pred.gold);
    out.predictions.push_back(std::move(pred));
  }
  out.f1 = episode_f1(out.predictions, cfg.averaging);
  return out;
}

TrainResult train(const ModelParams& init, std::span<const DomainFile> source,
                  const DomainFile& validation, const Provider& provider,
                  const TrainConfig& cfg) {
  if (source.empty()) throw ConfigError("training needs at least one source domain");
  if (!(cfg.lr_transitions > 0.0) || !(cfg.lr_other > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  TrainResult result{init, {}, 0};
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t d = 0; d < source.size(); ++d) {
    for (std::size_t e = 0; e < source[d].episodes.size(); ++e) order.emplace_back(d, e);
  }
  if (order.empty()) throw DataError("source domains contain no episodes");

  std::mt19937_64 rng(cfg.seed);
  ModelParams params = init;
  AdamState state;
  double best_f1 = -std::numeric_limits<double>::infinity();
  for (std::size_t pass = 1; pass <= cfg.iterations; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (const auto& [d, e] : order) {
      const auto loss = episode_nll(params, source[d].episodes[e], provider);
      if (!std::isfinite(loss.loss)) {
        throw NumericError(fmt::format("non-finite loss on {} episode {}", source[d].domain, e));
      }
      loss_sum += loss.loss;
      adam_step(params, loss.grads, state, cfg);
    }
    const double val_f1 = evaluate(params, validation, provider, 0, cfg).f1.mean_f1;
    result.history.push_back({pass, loss_sum / static_cast<double>(order.size()), val_f1});
    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      result.best = params;
      result.best_pass = pass;
    }
  }
  return result;
}

}  // namespace vpcrf
