#pragma once

// TSV and aligned-Markdown tables for scores and error counts.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpcrf/evaluation.hpp"

namespace vpcrf {

enum class TableFormat { Tsv, Markdown };

std::optional<TableFormat> parse_table_format(std::string_view name);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render(TableFormat format) const;
};

struct ScoreRow {
  std::string domain;
  std::string metric;
  double mean_f1 = 0.0;
  std::optional<double> std_f1;  // sample standard deviation over seeds
};

struct ErrorRow {
  std::string model;
  ErrorCounts counts;
};

Table score_table(std::span<const ScoreRow> rows);
Table error_table(std::span<const ErrorRow> rows);

std::string format_real(double v);

// Sample standard deviation; nullopt for fewer than two values.
std::optional<double> sample_std(std::span<const double> values);
double mean(std::span<const double> values);

}  // namespace vpcrf
