#include "vpcrf/prototypes.hpp"

#include <fmt/format.h>

#include "vpcrf/error.hpp"

namespace vpcrf {

LinearHead LinearHead::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return LinearHead{Matrix::Identity(d, d)};
}

EmbeddingMatrix apply_head(const LinearHead& head, const EmbeddingMatrix& m) {
  if (m.cols() != head.weights.cols()) {
    throw NumericError(fmt::format("head expects dimension {}, embeddings have {}",
                                   head.weights.cols(), m.cols()));
  }
  if (!head.weights.allFinite()) throw NumericError("head has non-finite entries");
  return m * head.weights.transpose();
}

Prototypes compute_prototypes(std::span<const EmbeddingMatrix> embedded,
                              const SupportSet& support, const LabelVocab& vocab) {
  if (embedded.size() != support.items.size()) {
    throw NumericError("one embedding matrix per support sentence is required");
  }
  const Eigen::Index dim = embedded.empty() ? 0 : embedded.front().cols();
  Prototypes p{vocab, RowMatrix::Zero(static_cast<Eigen::Index>(vocab.size()), dim),
               std::vector<std::size_t>(vocab.size(), 0)};
  for (std::size_t s = 0; s < support.items.size(); ++s) {
    const auto& tags = support.items[s].tags;
    const auto& rows = embedded[s];
    if (rows.cols() != dim || static_cast<std::size_t>(rows.rows()) != tags.size()) {
      throw NumericError(fmt::format("support sentence {} has inconsistent embeddings", s));
    }
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const auto k = vocab.index_of(tags[i]);
      if (!k) throw DataError(fmt::format("support tag '{}' missing from vocab", tags[i]));
      p.vectors.row(static_cast<Eigen::Index>(*k)) += rows.row(static_cast<Eigen::Index>(i));
      ++p.counts[*k];
    }
  }
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    if (p.counts[k] > 0) {
      p.vectors.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(p.counts[k]);
    }
  }
  return p;
}

Prototypes compute_prototypes(const SupportSet& support, const Provider& provider,
                              const LabelVocab& vocab, const LinearHead* head) {
  std::vector<EmbeddingMatrix> embedded;
  embedded.reserve(support.items.size());
  for (const auto& item : support.items) {
    auto m = embed_sentence(provider, item.sentence);
    embedded.push_back(head != nullptr ? apply_head(*head, m) : std::move(m));
  }
  return compute_prototypes(embedded, support, vocab);
}

}  // namespace vpcrf
