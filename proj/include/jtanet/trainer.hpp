#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "jtanet/dataset.hpp"
#include "jtanet/losses.hpp"
#include "jtanet/mining.hpp"
#include "jtanet/model.hpp"
#include "jtanet/optimizer.hpp"

namespace jtanet {

/// Defaults follow the reference training setup: batch 256, 50 epochs,
/// Adam lr 0.001, margin 0.5, unit loss weights.
struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 50;
  double lr = 0.001;
  MiningStrategy strategy = MiningStrategy::random_hard;
  LossWeights weights;  // margin lives here
  std::size_t embedding_len = 1024;
  std::uint64_t seed = 0;
  double channel_scale = 1.0;
  HingeMode hinge = HingeMode::per_triplet;
  /// Stop after this many iterations when set (0 = run all epochs).
  std::size_t max_iterations = 0;

  ModelConfig model_config(std::size_t input_side = 64) const;
  void validate() const;
  nlohmann::json to_json() const;
};

struct TrainLogRow {
  std::size_t iteration = 0;  // 1-based
  std::size_t epoch = 0;      // 1-based
  LossReport report;
  bool single_class = false;

  bool operator==(const TrainLogRow& o) const {
    return iteration == o.iteration && epoch == o.epoch && report.ae == o.report.ae && report.sm == o.report.sm &&
           report.fr == o.report.fr && report.total == o.report.total &&
           report.n_triplets == o.report.n_triplets && single_class == o.single_class;
  }
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::vector<std::size_t> epoch_end_iterations;
  double wall_seconds = 0.0;
};

/// Gradients and loss values of one joint step, without applying them.
struct StepResult {
  GradStore grads;
  LossReport report;
  TripletSet triplets;
  Tensor features;  // raw encoder output
};

// Forward through the encoder (train mode), mine triplets on normalized
// features, evaluate the three losses on raw features / reconstructions, and
// back-propagate the weighted total. Batch-norm running statistics in `params`
// are updated (decoder ones only when the AE weight is non-zero).
StepResult compute_step(ModelParams& params, const ModelConfig& model, const TrainConfig& config,
                        const Tensor& patches, const std::vector<int>& labels, std::uint64_t mining_seed);

/// Per-iteration mining seed derived from the run seed.
std::uint64_t mining_seed(std::uint64_t run_seed, std::size_t iteration);

struct TrainHooks {
  /// Called after every iteration.
  std::function<void(const TrainLogRow&)> on_iteration;
  /// Called with every mined triplet set (for dumps).
  std::function<void(std::size_t iteration, const Tensor& normalized, const TripletSet&)> on_triplets;
  /// Ends training after the current iteration when it returns true.
  std::function<bool(const TrainLogRow&)> should_stop;
};

struct TrainResult {
  ModelParams params;
  AdamState adam;
  TrainLog log;
};

/// Joint training over `data` (shuffled each epoch by the seed; last partial
/// batch kept). Starts from init_params(config, seed) unless `initial` is given.
TrainResult train(const PatchSet& data, const TrainConfig& config, const TrainHooks& hooks = {},
                  std::optional<ModelParams> initial = std::nullopt);

/// CSV with header "iteration,ae,sm,fr,total,n_triplets"; values use 17 significant digits.
void write_train_log_csv(const TrainLog& log, std::ostream& out);
TrainLog read_train_log_csv(const std::filesystem::path& path);

}  // namespace jtanet
