#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/random_cases.hpp"
#include "vpcrf/crf.hpp"
#include "vpcrf/error.hpp"

namespace {

using namespace vpcrf;
using testing_support::random_lattice;

LabelVocab city_vocab() { return LabelVocab::from_tags({"O", "B-city", "I-city"}); }
LabelVocab two_slot_vocab() {
  return LabelVocab::from_tags({"O", "B-city", "I-city", "B-time", "I-time"});
}

Lattice zero_lattice(Eigen::Index T, Eigen::Index K) {
  return {RowMatrix::Zero(T, K), {Vector::Zero(K), Matrix::Zero(K, K)}};
}

TEST(CdtTable, CellNamesFollowTableOrder) {
  EXPECT_EQ(CdtTable::trans_name(0), "O->O");
  EXPECT_EQ(CdtTable::trans_name(4), "B->B:same");
  EXPECT_EQ(CdtTable::trans_name(7), "B->I:diff");
  EXPECT_EQ(CdtTable::trans_name(12), "I->I:diff");
  for (std::size_t c = 0; c < CdtTable::kTransCells; ++c) {
    EXPECT_EQ(CdtTable::trans_name(c), oracle::cell_names()[c]);
  }
  EXPECT_FALSE(CdtTable::cell(AbstractTag::O, AbstractTag::B, SlotRelation::Same));
  EXPECT_FALSE(CdtTable::cell(AbstractTag::B, AbstractTag::I, SlotRelation::NA));
}

TEST(ExpandTransitions, ZeroTableGivesZeroMatrices) {
  const auto t = expand_transitions(CdtTable{}, city_vocab());
  EXPECT_TRUE(t.trans.isZero(0.0));
  EXPECT_TRUE(t.start.isZero(0.0));
  EXPECT_EQ(t.trans.rows(), 3);
}

TEST(ExpandTransitions, SameSlotCellIsSharedAcrossSlots) {
  CdtTable cdt;
  cdt.trans[*CdtTable::cell(AbstractTag::B, AbstractTag::I, SlotRelation::Same)] = 2.0;
  cdt.trans[*CdtTable::cell(AbstractTag::B, AbstractTag::I, SlotRelation::Diff)] = -1.0;
  const auto v = two_slot_vocab();
  const auto t = expand_transitions(cdt, v);
  const auto idx = [&](const char* tag) { return static_cast<Eigen::Index>(*v.index_of(tag)); };
  EXPECT_EQ(t.trans(idx("B-city"), idx("I-city")), 2.0);
  EXPECT_EQ(t.trans(idx("B-time"), idx("I-time")), 2.0);
  EXPECT_EQ(t.trans(idx("B-city"), idx("I-time")), -1.0);
  EXPECT_EQ(t.trans(idx("O"), idx("I-time")), 0.0);
}

TEST(ExpandTransitions, StructurallyMatchingCellsAgreeAcrossVocabs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  CdtTable cdt;
  for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) cdt.param(i) = n(rng);
  const auto a = LabelVocab::from_tags({"B-city", "I-city", "B-time", "I-time"});
  const auto b = LabelVocab::from_tags({"B-x", "I-x", "B-y", "I-y", "B-z", "I-z"});
  const auto ta = expand_transitions(cdt, a);
  const auto tb = expand_transitions(cdt, b);
  const auto ia = [&](const char* t) { return static_cast<Eigen::Index>(*a.index_of(t)); };
  const auto ib = [&](const char* t) { return static_cast<Eigen::Index>(*b.index_of(t)); };
  EXPECT_EQ(ta.trans(ia("B-city"), ia("I-city")), tb.trans(ib("B-z"), ib("I-z")));
  EXPECT_EQ(ta.trans(ia("I-time"), ia("B-city")), tb.trans(ib("I-x"), ib("B-y")));
  EXPECT_EQ(ta.trans(ia("O"), ia("I-city")), tb.trans(ib("O"), ib("I-y")));
  EXPECT_EQ(ta.start[ia("I-time")], tb.start[ib("I-x")]);
}

TEST(ScoreSequence, SingleToken) {
  Lattice lat = zero_lattice(1, 1);
  lat.emissions(0, 0) = 0.5;
  EXPECT_DOUBLE_EQ(score_sequence(lat, std::vector<std::size_t>{0}), 0.5);
}

TEST(ScoreSequence, SumsEmissionsOnPath) {
  Lattice lat = zero_lattice(2, 2);
  lat.emissions(0, 1) = 1.0;
  lat.emissions(1, 0) = 2.0;
  EXPECT_DOUBLE_EQ(score_sequence(lat, std::vector<std::size_t>{1, 0}), 3.0);
}

TEST(ScoreSequence, MatchesDirectSummation) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_lattice(rng, 4, 3);
    const auto y = testing_support::random_path(rng, p.dense.T, p.dense.K);
    EXPECT_NEAR(score_sequence(p.lattice, y), oracle::path_score(p.dense, y), 1e-12);
  }
}

TEST(ScoreSequence, RejectsBadPath) {
  const Lattice lat = zero_lattice(2, 2);
  EXPECT_THROW(score_sequence(lat, std::vector<std::size_t>{0, 2}), NumericError);
  EXPECT_THROW(score_sequence(lat, std::vector<std::size_t>{0}), NumericError);
}

TEST(LogPartition, SingleTokenIsLogSumExp) {
  Lattice lat = zero_lattice(1, 2);
  lat.emissions << 0.3, -1.2;
  EXPECT_NEAR(log_partition(lat), std::log(std::exp(0.3) + std::exp(-1.2)), 1e-15);
}

TEST(LogPartition, CountsPathsWhenAllZero) {
  EXPECT_NEAR(log_partition(zero_lattice(3, 2)), 3.0 * std::log(2.0), 1e-14);
}

TEST(LogPartition, MatchesEnumerationOnLargestCase) {
  std::mt19937_64 rng(3);
  auto p = random_lattice(rng, 5, 4);
  while (p.dense.T != 5 || p.dense.K != 4) p = random_lattice(rng, 5, 4);
  EXPECT_NEAR(log_partition(p.lattice), oracle::enumerate(p.dense).log_z, 1e-9);
}

TEST(LogPartition, StableForLargeScores) {
  Lattice lat = zero_lattice(30, 3);
  lat.emissions.setConstant(800.0);
  const double z = log_partition(lat);
  EXPECT_TRUE(std::isfinite(z));
  EXPECT_NEAR(z, 30 * 800.0 + 30 * std::log(3.0), 1e-8);
}

TEST(PosteriorNll, SingleLabelIsZero) {
  Lattice lat = zero_lattice(4, 1);
  lat.emissions.setRandom();
  EXPECT_EQ(posterior_nll(lat, std::vector<std::size_t>(4, 0)), 0.0);
}

TEST(PosteriorNll, ViterbiPathHasSmallestNll) {
  std::mt19937_64 rng(8);
  const auto p = random_lattice(rng, 4, 3);
  const auto best = viterbi(p.lattice);
  const double best_nll = posterior_nll(p.lattice, best.path);
  oracle::for_each_path(p.dense.T, p.dense.K, [&](const std::vector<std::size_t>& y) {
    EXPECT_LE(best_nll, posterior_nll(p.lattice, y) + 1e-12);
  });
}

TEST(PosteriorNll, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 10; ++i) {
    const auto p = random_lattice(rng, 4, 3);
    double total = 0.0;
    oracle::for_each_path(p.dense.T, p.dense.K, [&](const std::vector<std::size_t>& y) {
      total += std::exp(-posterior_nll(p.lattice, y));
    });
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Viterbi, DiagonalEmissionsGivePerTokenArgmax) {
  Lattice lat = zero_lattice(3, 3);
  lat.emissions(0, 2) = 5.0;
  lat.emissions(1, 0) = 5.0;
  lat.emissions(2, 1) = 5.0;
  EXPECT_EQ(viterbi(lat).path, (Path{2, 0, 1}));
  EXPECT_DOUBLE_EQ(viterbi(lat).score, 15.0);
}

TEST(Viterbi, AllZeroLatticeBreaksTiesTowardIndexZero) {
  const auto r = viterbi(zero_lattice(4, 3));
  EXPECT_EQ(r.path, (Path{0, 0, 0, 0}));
  EXPECT_EQ(r.score, 0.0);
}

TEST(Viterbi, ShiftInvariance) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    auto p = random_lattice(rng, 5, 4);
    const auto before = viterbi(p.lattice).path;
    const auto m_before = marginals(p.lattice).node;
    for (Eigen::Index t = 0; t < p.lattice.emissions.rows(); ++t) {
      p.lattice.emissions.row(t).array() += 3.0 * static_cast<double>(t) - 1.0;
    }
    EXPECT_EQ(viterbi(p.lattice).path, before);
    EXPECT_TRUE(marginals(p.lattice).node.isApprox(m_before, 1e-12));
  }
}

TEST(Marginals, SingleLabelIsAllOnes) {
  const auto m = marginals(zero_lattice(3, 1));
  EXPECT_TRUE(m.node.isOnes(0.0));
}

TEST(Marginals, UniformWhenAllZero) {
  const auto m = marginals(zero_lattice(3, 2));
  for (Eigen::Index t = 0; t < 3; ++t) {
    for (Eigen::Index k = 0; k < 2; ++k) EXPECT_NEAR(m.node(t, k), 0.5, 1e-15);
  }
}

TEST(Marginals, EdgesMarginalizeToNodes) {
  std::mt19937_64 rng(4);
  const auto p = random_lattice(rng, 5, 4);
  const auto m = marginals(p.lattice);
  for (Eigen::Index t = 0; t < m.node.rows(); ++t) EXPECT_NEAR(m.node.row(t).sum(), 1.0, 1e-12);
  for (std::size_t t = 0; t < m.edge.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    EXPECT_TRUE(m.edge[t].rowwise().sum().isApprox(m.node.row(ti).transpose(), 1e-12));
    EXPECT_TRUE(m.edge[t].colwise().sum().isApprox(m.node.row(ti + 1), 1e-12));
  }
}

TEST(Marginals, MatchEnumeration) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 30; ++i) {
    const auto p = random_lattice(rng, 5, 4);
    const auto m = marginals(p.lattice);
    const auto e = oracle::enumerate(p.dense);
    for (std::size_t t = 0; t < p.dense.T; ++t) {
      for (std::size_t k = 0; k < p.dense.K; ++k) {
        EXPECT_NEAR(m.node(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)),
                    e.node[t * p.dense.K + k], 1e-9);
      }
    }
  }
}

TEST(Lattice, RejectsNonFiniteScores) {
  Lattice lat = zero_lattice(2, 2);
  lat.emissions(1, 1) = std::nan("");
  EXPECT_THROW(log_partition(lat), NumericError);
  EXPECT_THROW(viterbi(zero_lattice(0, 2)), NumericError);
}

Lattice vocab_lattice(std::mt19937_64& rng, const LabelVocab& v, const CdtTable& cdt,
                      Eigen::Index T) {
  std::normal_distribution<double> n;
  Lattice lat{RowMatrix(T, static_cast<Eigen::Index>(v.size())), expand_transitions(cdt, v)};
  for (Eigen::Index t = 0; t < lat.emissions.rows(); ++t) {
    for (Eigen::Index k = 0; k < lat.emissions.cols(); ++k) lat.emissions(t, k) = n(rng);
  }
  return lat;
}

TEST(NllGradients, OnlyPathGivesZeroGradients) {
  const auto v = LabelVocab::from_tags({"O"});
  std::mt19937_64 rng(1);
  const auto lat = vocab_lattice(rng, v, CdtTable{}, 3);
  const auto g = nll_gradients(lat, std::vector<std::size_t>(3, 0), v);
  EXPECT_EQ(g.nll, 0.0);
  EXPECT_TRUE(g.d_emissions.isZero(1e-15));
  for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) EXPECT_NEAR(g.d_cdt.param(i), 0.0, 1e-15);
}

TEST(NllGradients, EmissionRowsSumToZero) {
  std::mt19937_64 rng(6);
  const auto v = two_slot_vocab();
  const auto lat = vocab_lattice(rng, v, CdtTable{}, 4);
  const auto g = nll_gradients(lat, testing_support::random_path(rng, 4, v.size()), v);
  for (Eigen::Index t = 0; t < 4; ++t) EXPECT_NEAR(g.d_emissions.row(t).sum(), 0.0, 1e-12);
}

TEST(NllGradients, MatchCentralDifferences) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  const auto v = two_slot_vocab();
  for (int rep = 0; rep < 10; ++rep) {
    CdtTable cdt;
    for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) cdt.param(i) = n(rng);
    const Lattice lat = vocab_lattice(rng, v, cdt, 4);
    const auto y = testing_support::random_path(rng, 4, v.size());
    const auto g = nll_gradients(lat, y, v);
    const double h = 1e-5;
    for (std::size_t i = 0; i < CdtTable::kNumParams; ++i) {
      CdtTable up = cdt, down = cdt;
      up.param(i) += h;
      down.param(i) -= h;
      Lattice lu{lat.emissions, expand_transitions(up, v)};
      Lattice ld{lat.emissions, expand_transitions(down, v)};
      const double num = (posterior_nll(lu, y) - posterior_nll(ld, y)) / (2 * h);
      EXPECT_NEAR(g.d_cdt.param(i), num, 1e-7) << "param " << i;
    }
    for (Eigen::Index t = 0; t < 4; ++t) {
      for (Eigen::Index k = 0; k < lat.emissions.cols(); ++k) {
        Lattice lu = lat, ld = lat;
        lu.emissions(t, k) += h;
        ld.emissions(t, k) -= h;
        const double num = (posterior_nll(lu, y) - posterior_nll(ld, y)) / (2 * h);
        EXPECT_NEAR(g.d_emissions(t, k), num, 1e-7);
      }
    }
  }
}

}  // namespace
