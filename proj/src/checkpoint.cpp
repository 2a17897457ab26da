#include "vpcrf/checkpoint.hpp"

#include <fmt/format.h>

#include "vpcrf/error.hpp"

namespace vpcrf {
namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "vpcrf-checkpoint";

const char* averaging_name(Averaging a) {
  return a == Averaging::Episode ? "episode" : "pooled";
}

}  // namespace

json train_config_to_json(const TrainConfig& cfg) {
  return {{"lr_transitions", cfg.lr_transitions},
          {"lr_other", cfg.lr_other},
          {"iterations", cfg.iterations},
          {"seed", cfg.seed},
          {"averaging", averaging_name(cfg.averaging)}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig cfg) {
  if (!j.is_object()) throw ConfigError("train: expected an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr_transitions") {
        cfg.lr_transitions = value.get<double>();
      } else if (key == "lr_other") {
        cfg.lr_other = value.get<double>();
      } else if (key == "iterations") {
        cfg.iterations = value.get<std::size_t>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "averaging") {
        const auto name = value.get<std::string>();
        if (name != "episode" && name != "pooled") {
          throw ConfigError("averaging must be 'episode' or 'pooled'");
        }
        cfg.averaging = name == "episode" ? Averaging::Episode : Averaging::Pooled;
      } else {
        throw ConfigError(fmt::format("train: unknown key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("train: {}", e.what()));
  }
  if (!(cfg.lr_transitions > 0.0) || !(cfg.lr_other > 0.0)) {
    throw ConfigError("train: learning rates must be positive");
  }
  return cfg;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  json start = json::object();
  for (std::size_t i = 0; i < CdtTable::kStartCells; ++i) {
    start[CdtTable::start_name(i)] = p.cdt.start[i];
  }
  json trans = json::object();
  for (std::size_t i = 0; i < CdtTable::kTransCells; ++i) {
    trans[CdtTable::trans_name(i)] = p.cdt.trans[i];
  }
  json head = nullptr;
  if (p.head) {
    head = json::array();
    for (Eigen::Index r = 0; r < p.head->weights.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < p.head->weights.cols(); ++c) row.push_back(p.head->weights(r, c));
      head.push_back(std::move(row));
    }
  }
  json root = {
      {"format", kFormat},
      {"version", 1},
      {"metric", metric_name(p.metric)},
      {"cdt", {{"start", std::move(start)}, {"trans", std::move(trans)}}},
      {"head", std::move(head)},
      {"lambda", p.lambda ? json(*p.lambda) : json(nullptr)},
      {"embeddings", ckpt.embeddings.to_json()},
      {"config", train_config_to_json(ckpt.config)},
      {"best_pass", ckpt.best_pass},
      {"val_f1", ckpt.val_f1},
  };
  return root.dump(2) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  Checkpoint ckpt;
  try {
    const json root = json::parse(text);
    if (root.value("format", std::string{}) != kFormat) {
      throw DataError("not a vpcrf checkpoint");
    }
    const auto metric = parse_metric(root.at("metric").get<std::string>());
    if (!metric) throw DataError("checkpoint names an unknown metric");
    auto& p = ckpt.params;
    p.metric = *metric;
    const auto& cdt = root.at("cdt");
    for (std::size_t i = 0; i < CdtTable::kStartCells; ++i) {
      p.cdt.start[i] = cdt.at("start").at(CdtTable::start_name(i)).get<double>();
    }
    for (std::size_t i = 0; i < CdtTable::kTransCells; ++i) {
      p.cdt.trans[i] = cdt.at("trans").at(CdtTable::trans_name(i)).get<double>();
    }
    if (const auto& head = root.at("head"); !head.is_null()) {
      const auto rows = static_cast<Eigen::Index>(head.size());
      const auto cols = rows > 0 ? static_cast<Eigen::Index>(head[0].size()) : 0;
      Matrix w(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(head[r].size()) != cols) throw DataError("ragged head matrix");
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = head[r][c].get<double>();
      }
      p.head = LinearHead{std::move(w)};
    }
    if (const auto& lambda = root.at("lambda"); !lambda.is_null()) p.lambda = lambda.get<double>();
    if ((p.metric == Metric::ScaledDot) != p.lambda.has_value()) {
      throw DataError("checkpoint lambda must be present exactly for scaled-dot");
    }
    ckpt.embeddings = EmbeddingSpec::from_json(root.at("embeddings"));
    ckpt.config = train_config_from_json(root.at("config"));
    ckpt.best_pass = root.value("best_pass", std::size_t{0});
    ckpt.val_f1 = root.value("val_f1", 0.0);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed checkpoint: {}", e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("malformed checkpoint: {}", e.what()));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace vpcrf
