#include "vpcrf/evaluation.hpp"

#include <algorithm>
#include <iterator>
#include <tuple>

#include <fmt/format.h>

#include "vpcrf/error.hpp"

namespace vpcrf {
namespace {

void check_parallel(std::span<const TagSeq> pred, std::span<const TagSeq> gold) {
  if (pred.size() != gold.size()) {
    throw DataError(fmt::format("{} predicted sentences vs {} gold sentences", pred.size(),
                                gold.size()));
  }
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size()) {
      throw DataError(fmt::format("sentence {}: {} predicted tags vs {} gold tags", s,
                                  pred[s].size(), gold[s].size()));
    }
  }
}

struct SpanCounts {
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
};

SpanCounts count_spans(std::span<const TagSeq> pred, std::span<const TagSeq> gold) {
  check_parallel(pred, gold);
  SpanCounts c;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto p = extract_spans(pred[s]);
    const auto g = extract_spans(gold[s]);
    // Both lists are sorted and non-overlapping.
    std::vector<Span> common;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common),
                          [](const Span& a, const Span& b) {
                            return std::tie(a.start, a.end, a.slot) <
                                   std::tie(b.start, b.end, b.slot);
                          });
    c.tp += common.size();
    c.n_pred += p.size();
    c.n_gold += g.size();
  }
  return c;
}

bool is_slot(const std::string& tag) { return tag != "O"; }

}  // namespace

F1Report f1_from_counts(std::size_t tp, std::size_t n_pred, std::size_t n_gold) {
  F1Report r;
  r.tp = tp;
  r.n_pred = n_pred;
  r.n_gold = n_gold;
  r.precision = n_pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_pred);
  r.recall = n_gold == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gold);
  const double denom = r.precision + r.recall;
  r.f1 = denom == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / denom;
  return r;
}

F1Report span_f1(std::span<const TagSeq> pred, std::span<const TagSeq> gold) {
  const auto c = count_spans(pred, gold);
  return f1_from_counts(c.tp, c.n_pred, c.n_gold);
}

EpisodeF1 episode_f1(std::span<const EpisodePredictions> results, Averaging averaging) {
  if (results.empty()) throw DataError("episode F1 needs at least one episode");
  EpisodeF1 out;
  SpanCounts pooled;
  double sum = 0.0;
  for (const auto& ep : results) {
    const auto c = count_spans(ep.pred, ep.gold);
    out.per_episode.push_back(f1_from_counts(c.tp, c.n_pred, c.n_gold));
    sum += out.per_episode.back().f1;
    pooled.tp += c.tp;
    pooled.n_pred += c.n_pred;
    pooled.n_gold += c.n_gold;
  }
  out.mean_f1 = averaging == Averaging::Episode
                    ? sum / static_cast<double>(results.size())
                    : f1_from_counts(pooled.tp, pooled.n_pred, pooled.n_gold).f1;
  return out;
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& other) {
  c += other.c;
  ox += other.ox;
  xo += other.xo;
  xx += other.xx;
  return *this;
}

ErrorCounts error_types(const TagSeq& pred, const TagSeq& gold) {
  if (pred.size() != gold.size()) {
    throw DataError(
        fmt::format("{} predicted tags vs {} gold tags", pred.size(), gold.size()));
  }
  ErrorCounts counts;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == gold[i]) {
      ++counts.c;
    } else if (!is_slot(gold[i])) {
      ++counts.ox;
    } else if (!is_slot(pred[i])) {
      ++counts.xo;
    } else {
      ++counts.xx;
    }
  }
  return counts;
}

ErrorCounts error_types(std::span<const TagSeq> pred, std::span<const TagSeq> gold) {
  check_parallel(pred, gold);
  ErrorCounts total;
  for (std::size_t s = 0; s < pred.size(); ++s) total += error_types(pred[s], gold[s]);
  return total;
}

}  // namespace vpcrf
