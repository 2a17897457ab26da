#pragma once

// JSON checkpoint: metric, named CDT cells, optional head and lambda, the
// embedding provider descriptor and the training configuration.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vpcrf/embeddings.hpp"
#include "vpcrf/training.hpp"

namespace vpcrf {

struct Checkpoint {
  ModelParams params;
  EmbeddingSpec embeddings;
  TrainConfig config;
  std::size_t best_pass = 0;
  double val_f1 = 0.0;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vpcrf
