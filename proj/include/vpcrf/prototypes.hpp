#pragma once

#include <span>
#include <vector>

#include "vpcrf/corpus.hpp"
#include "vpcrf/embeddings.hpp"

namespace vpcrf {

// d_out x d_in projection applied to every token embedding.
struct LinearHead {
  Matrix weights;

  static LinearHead identity(std::size_t dim);
  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

EmbeddingMatrix apply_head(const LinearHead& head, const EmbeddingMatrix& m);

// Per-label mean of the support-token embeddings, aligned with vocab order.
struct Prototypes {
  LabelVocab vocab;
  RowMatrix vectors;                // K x d
  std::vector<std::size_t> counts;  // tokens per label

  // True for labels that never occur in the support set (zero vector).
  bool is_empty(std::size_t k) const { return counts.at(k) == 0; }
};

Prototypes compute_prototypes(const SupportSet& support, const Provider& provider,
                              const LabelVocab& vocab, const LinearHead* head = nullptr);

// Variant over already-embedded support sentences (one matrix per item).
Prototypes compute_prototypes(std::span<const EmbeddingMatrix> embedded,
                              const SupportSet& support, const LabelVocab& vocab);

}  // namespace vpcrf
