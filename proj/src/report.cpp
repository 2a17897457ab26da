#include "vpcrf/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace vpcrf {

std::optional<TableFormat> parse_table_format(std::string_view name) {
  if (name == "tsv") return TableFormat::Tsv;
  if (name == "md") return TableFormat::Markdown;
  return std::nullopt;
}

std::string Table::render(TableFormat format) const {
  std::string out;
  if (format == TableFormat::Tsv) {
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += '\t';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  std::vector<std::size_t> width(header.size(), 3);
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = std::max(width[i], header[i].size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], r[i].size());
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    out += '|';
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < cells.size() ? cells[i] : "";
      out += fmt::format(" {:<{}} |", cell, width[i]);
    }
    out += '\n';
  };
  line(header);
  out += '|';
  for (auto w : width) out += fmt::format(" {} |", std::string(w, '-'));
  out += '\n';
  for (const auto& r : rows) line(r);
  return out;
}

std::string format_real(double v) { return fmt::format("{:.4f}", v); }

Table score_table(std::span<const ScoreRow> rows) {
  Table t{{"domain", "metric", "mean_f1", "std"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.domain, r.metric, format_real(r.mean_f1),
                      r.std_f1 ? format_real(*r.std_f1) : "-"});
  }
  return t;
}

Table error_table(std::span<const ErrorRow> rows) {
  Table t{{"model", "O-X", "X-O", "X-X"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.model, std::to_string(r.counts.ox), std::to_string(r.counts.xo),
                      std::to_string(r.counts.xx)});
  }
  return t;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

std::optional<double> sample_std(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace vpcrf
