#include "vpcrf/crf.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "vpcrf/error.hpp"

namespace vpcrf {
namespace {

struct CellKey {
  AbstractTag prev;
  AbstractTag next;
  SlotRelation rel;
};

constexpr std::array<CellKey, CdtTable::kTransCells> kCells{{
    {AbstractTag::O, AbstractTag::O, SlotRelation::NA},
    {AbstractTag::O, AbstractTag::B, SlotRelation::NA},
    {AbstractTag::O, AbstractTag::I, SlotRelation::NA},
    {AbstractTag::B, AbstractTag::O, SlotRelation::NA},
    {AbstractTag::B, AbstractTag::B, SlotRelation::Same},
    {AbstractTag::B, AbstractTag::B, SlotRelation::Diff},
    {AbstractTag::B, AbstractTag::I, SlotRelation::Same},
    {AbstractTag::B, AbstractTag::I, SlotRelation::Diff},
    {AbstractTag::I, AbstractTag::O, SlotRelation::NA},
    {AbstractTag::I, AbstractTag::B, SlotRelation::Same},
    {AbstractTag::I, AbstractTag::B, SlotRelation::Diff},
    {AbstractTag::I, AbstractTag::I, SlotRelation::Same},
    {AbstractTag::I, AbstractTag::I, SlotRelation::Diff},
}};

constexpr const char* kTagNames[] = {"O", "B", "I"};

void validate(const Lattice& lat) {
  const auto k = lat.emissions.cols();
  if (lat.emissions.rows() < 1 || k < 1) throw NumericError("lattice must be non-empty");
  if (lat.transitions.start.size() != k || lat.transitions.trans.rows() != k ||
      lat.transitions.trans.cols() != k) {
    throw NumericError("lattice transition shape does not match emissions");
  }
  if (!lat.emissions.allFinite() || !lat.transitions.start.allFinite() ||
      !lat.transitions.trans.allFinite()) {
    throw NumericError("lattice contains non-finite scores");
  }
}

void validate_path(const Lattice& lat, std::span<const std::size_t> path) {
  if (path.size() != lat.length()) {
    throw NumericError(fmt::format("path length {} does not match lattice length {}",
                                   path.size(), lat.length()));
  }
  for (auto y : path) {
    if (y >= lat.labels()) throw NumericError(fmt::format("label index {} out of range", y));
  }
}

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// alpha(t, k): log-sum of all prefixes ending in k at t, including emission t.
RowMatrix forward(const Lattice& lat) {
  const auto T = lat.emissions.rows();
  const auto K = lat.emissions.cols();
  RowMatrix alpha(T, K);
  alpha.row(0) = lat.transitions.start.transpose() + lat.emissions.row(0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index k = 0; k < K; ++k) {
      alpha(t, k) = lat.emissions(t, k) +
                    log_sum_exp(alpha.row(t - 1).transpose() + lat.transitions.trans.col(k));
    }
  }
  return alpha;
}

// beta(t, j): log-sum of all suffixes after t given y_t = j.
RowMatrix backward(const Lattice& lat) {
  const auto T = lat.emissions.rows();
  const auto K = lat.emissions.cols();
  RowMatrix beta(T, K);
  beta.row(T - 1).setZero();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const Vector next = lat.emissions.row(t + 1).transpose() + beta.row(t + 1).transpose();
    for (Eigen::Index j = 0; j < K; ++j) {
      beta(t, j) = log_sum_exp(lat.transitions.trans.row(j).transpose() + next);
    }
  }
  return beta;
}

}  // namespace

std::optional<std::size_t> CdtTable::cell(AbstractTag prev, AbstractTag next,
                                          SlotRelation rel) {
  for (std::size_t i = 0; i < kCells.size(); ++i) {
    if (kCells[i].prev == prev && kCells[i].next == next && kCells[i].rel == rel) return i;
  }
  return std::nullopt;
}

std::string CdtTable::trans_name(std::size_t cell) {
  const auto& c = kCells.at(cell);
  std::string name = fmt::format("{}->{}", kTagNames[static_cast<int>(c.prev)],
                                 kTagNames[static_cast<int>(c.next)]);
  if (c.rel == SlotRelation::Same) name += ":same";
  if (c.rel == SlotRelation::Diff) name += ":diff";
  return name;
}

std::string CdtTable::start_name(std::size_t tag) { return kTagNames[tag]; }

double CdtTable::param(std::size_t i) const {
  return i < kStartCells ? start.at(i) : trans.at(i - kStartCells);
}

double& CdtTable::param(std::size_t i) {
  return i < kStartCells ? start.at(i) : trans.at(i - kStartCells);
}

SlotRelation slot_relation(const LabelVocab& vocab, std::size_t prev, std::size_t next) {
  if (vocab.abstract_of(prev) == AbstractTag::O || vocab.abstract_of(next) == AbstractTag::O) {
    return SlotRelation::NA;
  }
  return vocab.slot_of(prev) == vocab.slot_of(next) ? SlotRelation::Same : SlotRelation::Diff;
}

std::size_t transition_cell(const LabelVocab& vocab, std::size_t prev, std::size_t next) {
  const auto c = CdtTable::cell(vocab.abstract_of(prev), vocab.abstract_of(next),
                                slot_relation(vocab, prev, next));
  // Every concrete pair maps to exactly one of the 13 cells.
  return *c;
}

ExpandedTransitions expand_transitions(const CdtTable& cdt, const LabelVocab& vocab) {
  const auto K = static_cast<Eigen::Index>(vocab.size());
  ExpandedTransitions out{Vector(K), Matrix(K, K)};
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    out.start[k] = cdt.start[static_cast<std::size_t>(vocab.abstract_of(uk))];
    for (Eigen::Index j = 0; j < K; ++j) {
      out.trans(j, k) = cdt.trans[transition_cell(vocab, static_cast<std::size_t>(j), uk)];
    }
  }
  return out;
}

double score_sequence(const Lattice& lat, std::span<const std::size_t> path) {
  validate(lat);
  validate_path(lat, path);
  double psi = lat.transitions.start[static_cast<Eigen::Index>(path[0])];
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto yi = static_cast<Eigen::Index>(path[i]);
    if (i > 0) psi += lat.transitions.trans(static_cast<Eigen::Index>(path[i - 1]), yi);
    psi += lat.emissions(static_cast<Eigen::Index>(i), yi);
  }
  return psi;
}

double log_partition(const Lattice& lat) {
  validate(lat);
  const RowMatrix alpha = forward(lat);
  return log_sum_exp(alpha.row(alpha.rows() - 1));
}

double posterior_nll(const Lattice& lat, std::span<const std::size_t> path) {
  const double nll = log_partition(lat) - score_sequence(lat, path);
  // Rounding can leave a tiny negative value when one path dominates.
  return nll < 0.0 ? 0.0 : nll;
}

ViterbiResult viterbi(const Lattice& lat) {
  validate(lat);
  const auto T = lat.emissions.rows();
  const auto K = lat.emissions.cols();
  RowMatrix best(T, K);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(T, K);
  best.row(0) = lat.transitions.start.transpose() + lat.emissions.row(0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index k = 0; k < K; ++k) {
      Eigen::Index arg = 0;
      double top = best(t - 1, 0) + lat.transitions.trans(0, k);
      for (Eigen::Index j = 1; j < K; ++j) {
        const double s = best(t - 1, j) + lat.transitions.trans(j, k);
        if (s > top) {
          top = s;
          arg = j;
        }
      }
      best(t, k) = top + lat.emissions(t, k);
      back(t, k) = arg;
    }
  }
  ViterbiResult out;
  out.path.resize(static_cast<std::size_t>(T));
  Eigen::Index last = 0;
  for (Eigen::Index k = 1; k < K; ++k) {
    if (best(T - 1, k) > best(T - 1, last)) last = k;
  }
  out.score = best(T - 1, last);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    out.path[static_cast<std::size_t>(t)] = static_cast<std::size_t>(last);
    if (t > 0) last = back(t, last);
  }
  return out;
}

Marginals marginals(const Lattice& lat) {
  validate(lat);
  const auto T = lat.emissions.rows();
  const auto K = lat.emissions.cols();
  const RowMatrix alpha = forward(lat);
  const RowMatrix beta = backward(lat);
  Marginals out;
  out.log_z = log_sum_exp(alpha.row(T - 1));
  out.node = (alpha + beta).array().unaryExpr([&](double v) { return std::exp(v - out.log_z); });
  out.edge.reserve(static_cast<std::size_t>(T - 1));
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    Matrix e(K, K);
    for (Eigen::Index j = 0; j < K; ++j) {
      for (Eigen::Index k = 0; k < K; ++k) {
        e(j, k) = std::exp(alpha(t, j) + lat.transitions.trans(j, k) +
                           lat.emissions(t + 1, k) + beta(t + 1, k) - out.log_z);
      }
    }
    out.edge.push_back(std::move(e));
  }
  return out;
}

NllGradients nll_gradients(const Lattice& lat, std::span<const std::size_t> path,
                           const LabelVocab& vocab) {
  validate_path(lat, path);
  if (vocab.size() != lat.labels()) {
    throw NumericError("vocabulary size does not match lattice");
  }
  const Marginals m = marginals(lat);
  NllGradients g;
  const double nll = m.log_z - score_sequence(lat, path);
  g.nll = nll < 0.0 ? 0.0 : nll;
  g.d_emissions = m.node;
  const auto K = static_cast<std::size_t>(lat.labels());
  for (std::size_t i = 0; i < path.size(); ++i) {
    g.d_emissions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(path[i])) -= 1.0;
  }
  for (std::size_t k = 0; k < K; ++k) {
    g.d_cdt.start[static_cast<std::size_t>(vocab.abstract_of(k))] +=
        m.node(0, static_cast<Eigen::Index>(k));
  }
  g.d_cdt.start[static_cast<std::size_t>(vocab.abstract_of(path[0]))] -= 1.0;

  std::vector<std::size_t> cells(K * K);
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t k = 0; k < K; ++k) cells[j * K + k] = transition_cell(vocab, j, k);
  }
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const Matrix& e = m.edge[t];
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        g.d_cdt.trans[cells[j * K + k]] +=
            e(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      }
    }
    g.d_cdt.trans[cells[path[t] * K + path[t + 1]]] -= 1.0;
  }
  return g;
}

}  // namespace vpcrf
