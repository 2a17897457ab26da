#pragma once

// Word-label similarity functions used as CRF emission scores.

#include <optional>
#include <string_view>
#include <vector>

#include "vpcrf/embeddings.hpp"

namespace vpcrf {

struct Prototypes;

enum class Metric {
  VP,                 // x.c / |c|
  VPB,                // x.c / |c| - |c| / 2
  Dot,                // x.c
  ReverseProjection,  // (x / |x|).c
  Cosine,             // x.c / (|x| |c|)
  NegHalfSqEuclid,    // -|x - c|^2 / 2
  ScaledDot,          // lambda * x.c
  DotBias,            // x.c - c.c / 2
};

inline constexpr Metric kAllMetrics[] = {
    Metric::VP,     Metric::VPB,             Metric::Dot,       Metric::ReverseProjection,
    Metric::Cosine, Metric::NegHalfSqEuclid, Metric::ScaledDot, Metric::DotBias};

struct MetricKind {
  Metric id = Metric::VP;
  double lambda = 1.0;  // only read by ScaledDot

  MetricKind() = default;
  MetricKind(Metric m, double scale = 1.0) : id(m), lambda(scale) {}  // NOLINT
};

// CLI names: vp, vpb, dot, rproj, cosine, sqeuclid, scaled-dot, dot-bias.
std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);

using VecRef = Eigen::Ref<const Vector>;

// Any term that divides by a zero norm evaluates to 0.
double sim(const VecRef& x, const VecRef& c, const MetricKind& metric);

struct SimGradient {
  Vector dx;
  Vector dc;
  double dlambda = 0.0;
};

// Partial derivatives of sim with respect to x, c and lambda. Terms that
// are zero by the zero-norm convention have zero gradient.
SimGradient sim_gradient(const VecRef& x, const VecRef& c, const MetricKind& metric);

// Entry (i, k) = sim(m.row(i), p.vectors.row(k)).
RowMatrix emission_scores(const EmbeddingMatrix& m, const Prototypes& p,
                          const MetricKind& metric);
RowMatrix emission_scores(const EmbeddingMatrix& m, const RowMatrix& prototypes,
                          const MetricKind& metric);

// VPB as a linear model: sim = x.w + b with w = c/|c|, b = -|c|/2.
struct NormalizedLinearView {
  Vector w;
  double b = 0.0;
};

NormalizedLinearView normalized_linear_view(const VecRef& c);

}  // namespace vpcrf
