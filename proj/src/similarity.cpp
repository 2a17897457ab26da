#include "vpcrf/similarity.hpp"

#include <array>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "vpcrf/error.hpp"
#include "vpcrf/prototypes.hpp"

namespace vpcrf {
namespace {

constexpr std::array<std::pair<Metric, std::string_view>, 8> kNames{{
    {Metric::VP, "vp"},
    {Metric::VPB, "vpb"},
    {Metric::Dot, "dot"},
    {Metric::ReverseProjection, "rproj"},
    {Metric::Cosine, "cosine"},
    {Metric::NegHalfSqEuclid, "sqeuclid"},
    {Metric::ScaledDot, "scaled-dot"},
    {Metric::DotBias, "dot-bias"},
}};

void check_inputs(const VecRef& x, const VecRef& c, const MetricKind& metric) {
  if (x.size() != c.size()) {
    throw NumericError(
        fmt::format("similarity dimension mismatch: {} vs {}", x.size(), c.size()));
  }
  if (!x.allFinite() || !c.allFinite() || !std::isfinite(metric.lambda)) {
    throw NumericError("similarity inputs must be finite");
  }
}

}  // namespace

std::string_view metric_name(Metric m) {
  for (const auto& [id, name] : kNames) {
    if (id == m) return name;
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (const auto& [id, n] : kNames) {
    if (n == name) return id;
  }
  return std::nullopt;
}

double sim(const VecRef& x, const VecRef& c, const MetricKind& metric) {
  check_inputs(x, c, metric);
  const double xc = x.dot(c);
  switch (metric.id) {
    case Metric::VP: {
      const double cn = c.norm();
      return cn > 0.0 ? xc / cn : 0.0;
    }
    case Metric::VPB: {
      const double cn = c.norm();
      return cn > 0.0 ? xc / cn - 0.5 * cn : 0.0;
    }
    case Metric::Dot:
      return xc;
    case Metric::ReverseProjection: {
      const double xn = x.norm();
      return xn > 0.0 ? xc / xn : 0.0;
    }
    case Metric::Cosine: {
      const double denom = x.norm() * c.norm();
      return denom > 0.0 ? xc / denom : 0.0;
    }
    case Metric::NegHalfSqEuclid:
      return -0.5 * (x - c).squaredNorm();
    case Metric::ScaledDot:
      return metric.lambda * xc;
    case Metric::DotBias:
      return xc - 0.5 * c.squaredNorm();
  }
  throw NumericError("unknown metric");
}

SimGradient sim_gradient(const VecRef& x, const VecRef& c, const MetricKind& metric) {
  check_inputs(x, c, metric);
  const auto d = x.size();
  SimGradient g{Vector::Zero(d), Vector::Zero(d), 0.0};
  switch (metric.id) {
    case Metric::VP:
    case Metric::VPB: {
      const double cn = c.norm();
      if (cn == 0.0) break;
      const Vector u = c / cn;
      g.dx = u;
      g.dc = (x - x.dot(u) * u) / cn;
      if (metric.id == Metric::VPB) g.dc -= 0.5 * u;
      break;
    }
    case Metric::Dot:
      g.dx = c;
      g.dc = x;
      break;
    case Metric::ReverseProjection: {
      const double xn = x.norm();
      if (xn == 0.0) break;
      const Vector v = x / xn;
      g.dc = v;
      g.dx = (c - c.dot(v) * v) / xn;
      break;
    }
    case Metric::Cosine: {
      const double xn = x.norm();
      const double cn = c.norm();
      if (xn == 0.0 || cn == 0.0) break;
      const Vector v = x / xn;
      const Vector u = c / cn;
      const double cos = v.dot(u);
      g.dx = (u - cos * v) / xn;
      g.dc = (v - cos * u) / cn;
      break;
    }
    case Metric::NegHalfSqEuclid:
      g.dx = c - x;
      g.dc = x - c;
      break;
    case Metric::ScaledDot:
      g.dx = metric.lambda * c;
      g.dc = metric.lambda * x;
      g.dlambda = x.dot(c);
      break;
    case Metric::DotBias:
      g.dx = c;
      g.dc = x - c;
      break;
  }
  return g;
}

RowMatrix emission_scores(const EmbeddingMatrix& m, const RowMatrix& prototypes,
                          const MetricKind& metric) {
  if (m.cols() != prototypes.cols()) {
    throw NumericError(fmt::format("embedding dimension {} does not match prototypes {}",
                                   m.cols(), prototypes.cols()));
  }
  RowMatrix out(m.rows(), prototypes.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
      out(i, k) = sim(m.row(i).transpose(), prototypes.row(k).transpose(), metric);
    }
  }
  if (!out.allFinite()) throw NumericError("non-finite emission score");
  return out;
}

RowMatrix emission_scores(const EmbeddingMatrix& m, const Prototypes& p,
                          const MetricKind& metric) {
  return emission_scores(m, p.vectors, metric);
}

NormalizedLinearView normalized_linear_view(const VecRef& c) {
  const double cn = c.norm();
  if (!(cn > 0.0) || !std::isfinite(cn)) {
    throw NumericError("normalized linear view needs a finite non-zero label vector");
  }
  return {c / cn, -0.5 * cn};
}

}  // namespace vpcrf
