#pragma once

// Linear-chain CRF whose transition scores are tied through a collapsed
// table over abstract tags {O, B, I} and a same/different-slot relation, so
// the same 16 parameters serve every label set.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpcrf/corpus.hpp"
#include "vpcrf/embeddings.hpp"

namespace vpcrf {

enum class SlotRelation : std::uint8_t { Same, Diff, NA };

struct CdtTable {
  static constexpr std::size_t kStartCells = 3;
  static constexpr std::size_t kTransCells = 13;
  static constexpr std::size_t kNumParams = kStartCells + kTransCells;

  std::array<double, kStartCells> start{};  // indexed by AbstractTag
  std::array<double, kTransCells> trans{};

  // Index into `trans`, or nullopt for combinations outside the 13 cells
  // (e.g. O->B with a slot relation).
  static std::optional<std::size_t> cell(AbstractTag prev, AbstractTag next,
                                         SlotRelation rel);
  // Human-readable names, e.g. "B->I:same", "O->B".
  static std::string trans_name(std::size_t cell);
  static std::string start_name(std::size_t tag);

  // Flat view: start cells followed by transition cells.
  double param(std::size_t i) const;
  double& param(std::size_t i);

  bool operator==(const CdtTable&) const = default;
};

struct ExpandedTransitions {
  Vector start;  // K
  Matrix trans;  // K x K, trans(prev, next)
};

SlotRelation slot_relation(const LabelVocab& vocab, std::size_t prev, std::size_t next);
// CdtTable::trans index used by the concrete transition prev -> next.
std::size_t transition_cell(const LabelVocab& vocab, std::size_t prev, std::size_t next);

ExpandedTransitions expand_transitions(const CdtTable& cdt, const LabelVocab& vocab);

struct Lattice {
  RowMatrix emissions;  // T x K
  ExpandedTransitions transitions;

  std::size_t length() const { return static_cast<std::size_t>(emissions.rows()); }
  std::size_t labels() const { return static_cast<std::size_t>(emissions.cols()); }
};

using Path = std::vector<std::size_t>;

double score_sequence(const Lattice& lat, std::span<const std::size_t> path);
double log_partition(const Lattice& lat);
// -log p(path | lattice) = log Z - score(path).
double posterior_nll(const Lattice& lat, std::span<const std::size_t> path);

struct ViterbiResult {
  Path path;
  double score = 0.0;
};

// Ties go to the smallest label index.
ViterbiResult viterbi(const Lattice& lat);

struct Marginals {
  RowMatrix node;             // T x K, P(y_i = k)
  std::vector<Matrix> edge;   // T-1 entries of K x K, P(y_i = j, y_{i+1} = k)
  double log_z = 0.0;
};

Marginals marginals(const Lattice& lat);

struct NllGradients {
  double nll = 0.0;
  RowMatrix d_emissions;  // T x K
  CdtTable d_cdt;
};

NllGradients nll_gradients(const Lattice& lat, std::span<const std::size_t> path,
                           const LabelVocab& vocab);

}  // namespace vpcrf
