#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "jtanet/losses.hpp"
#include "jtanet/model.hpp"
#include "jtanet/optimizer.hpp"

namespace jtanet {

/// Everything needed to resume training or extract features.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::optional<AdamState> adam;
  std::uint64_t seed = 0;
  LossWeights weights;
  nlohmann::json train_config = nlohmann::json::object();
};

inline constexpr const char* kCheckpointKind = "jtanet-checkpoint";

// Container kind "jtanet-checkpoint". Meta holds config, seed, loss weights,
// the training config, Adam hyperparameters/step and a layer manifest. Arrays
// are the parameters in model order, then "adam.m.<name>" / "adam.v.<name>".
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Hash over parameter names, shapes and values; ties databases to encoders.
std::string params_fingerprint(const ModelParams& params);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace jtanet
