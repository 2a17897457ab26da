#pragma once

// conlleval-compatible span F1, episode-level averaging and token-level
// error-type counts (O-X, X-O, X-X).

#include <cstddef>
#include <span>
#include <vector>

#include "vpcrf/corpus.hpp"

namespace vpcrf {

struct F1Report {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
};

// 0/0 is taken as 0 for precision, recall and F1.
F1Report f1_from_counts(std::size_t tp, std::size_t n_pred, std::size_t n_gold);

F1Report span_f1(std::span<const TagSeq> pred, std::span<const TagSeq> gold);

struct EpisodePredictions {
  std::vector<TagSeq> pred;
  std::vector<TagSeq> gold;
};

enum class Averaging {
  Episode,  // F1 per episode (pooled over its query batch), then the mean
  Pooled,   // one F1 over every query sentence of every episode
};

struct EpisodeF1 {
  std::vector<F1Report> per_episode;
  double mean_f1 = 0.0;
};

EpisodeF1 episode_f1(std::span<const EpisodePredictions> results,
                     Averaging averaging = Averaging::Episode);

struct ErrorCounts {
  std::size_t c = 0;
  std::size_t ox = 0;  // gold O, predicted slot
  std::size_t xo = 0;  // gold slot, predicted O
  std::size_t xx = 0;  // both slots, different tags

  std::size_t total() const { return c + ox + xo + xx; }
  ErrorCounts& operator+=(const ErrorCounts& other);
  bool operator==(const ErrorCounts&) const = default;
};

ErrorCounts error_types(const TagSeq& pred, const TagSeq& gold);
ErrorCounts error_types(std::span<const TagSeq> pred, std::span<const TagSeq> gold);

}  // namespace vpcrf
