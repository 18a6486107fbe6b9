#include "jtanet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "jtanet/container.hpp"

namespace jtanet {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ModelConfig TrainConfig::model_config(std::size_t input_side) const {
  ModelConfig m;
  m.embedding_len = embedding_len;
  m.input_side = input_side;
  m.channel_scale = channel_scale;
  m.validate();
  return m;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  weights.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"lr", lr},
          {"strategy", to_string(strategy)},
          {"loss_weights", weights.to_string()},
          {"margin", weights.margin},
          {"embedding_len", embedding_len},
          {"seed", seed},
          {"channel_scale", channel_scale},
          {"hinge", to_string(hinge)},
          {"max_iterations", max_iterations}};
}

std::uint64_t mining_seed(std::uint64_t run_seed, std::size_t iteration) {
  return splitmix64(run_seed ^ splitmix64(static_cast<std::uint64_t>(iteration)));
}

StepResult compute_step(ModelParams& params, const ModelConfig& model, const TrainConfig& config,
                        const Tensor& patches, const std::vector<int>& labels, std::uint64_t seed) {
  const LossWeights& w = config.weights;
  StepResult step;

  EncoderOutput enc = siamcoder_forward(params, model, patches, ops::Mode::train);
  step.features = enc.features;

  const NormalizedEmbeddings normalized = normalize_embeddings(enc.features);
  step.triplets = mine_triplets(normalized.rows, labels, config.strategy, w.margin, seed);
  const SiameseLoss sm = siamese_loss(enc.features, step.triplets.triplets, w.margin, config.hinge);
  const LossValue fr = feature_reg_loss(enc.features);

  // Decoder batch-norm statistics only move when the reconstruction term trains.
  DecoderOutput dec = decoder_forward(params, model, enc.features, ops::Mode::train, w.ae > 0.0);
  const LossValue ae = autoencoder_loss(patches, dec.reconstructions);
  step.report = total_loss(ae.value, sm.value, fr.value, step.triplets.triplets.size(), w);

  step.grads = zero_grads(params);
  Tensor grad_features = w.sm * sm.grad;
  grad_features += w.fr * fr.grad;
  if (w.ae > 0.0) {
    grad_features += decoder_backward(params, model, dec.trace, w.ae * ae.grad, step.grads);
  }
  siamcoder_backward(params, enc.trace, grad_features, step.grads);
  return step;
}

TrainResult train(const PatchSet& data, const TrainConfig& config, const TrainHooks& hooks,
                  std::optional<ModelParams> initial) {
  config.validate();
  if (data.size() < 2) throw std::invalid_argument("training needs at least two patches");
  const ModelConfig model = config.model_config(data.side);
  TrainResult result;
  result.params = initial ? std::move(*initial) : init_params(model, config.seed);
  result.adam = AdamState::for_params(result.params, config.lr);

  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 shuffle_rng(splitmix64(config.seed ^ 0x5348554646ULL));
  std::vector<std::size_t> order(data.size());
  std::size_t iteration = 0;
  bool done = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (auto i : batch) labels.push_back(data.labels[i]);

      ++iteration;
      StepResult step = compute_step(result.params, model, config, data.gather(batch), labels,
                                     mining_seed(config.seed, iteration));
      adam_step(result.params, step.grads, result.adam);

      TrainLogRow row{iteration, epoch, step.report, step.triplets.single_class};
      result.log.rows.push_back(row);
      if (hooks.on_triplets) {
        hooks.on_triplets(iteration, normalize_embeddings(step.features).rows, step.triplets);
      }
      if (hooks.on_iteration) hooks.on_iteration(row);
      if ((config.max_iterations > 0 && iteration >= config.max_iterations) ||
          (hooks.should_stop && hooks.should_stop(row))) {
        done = true;
        break;
      }
    }
    result.log.epoch_end_iterations.push_back(iteration);
  }
  result.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_train_log_csv(const TrainLog& log, std::ostream& out) {
  out << "iteration,ae,sm,fr,total,n_triplets\n";
  for (const auto& r : log.rows) {
    out << r.iteration << ',' << format_double(r.report.ae) << ',' << format_double(r.report.sm) << ','
        << format_double(r.report.fr) << ',' << format_double(r.report.total) << ',' << r.report.n_triplets << '\n';
  }
}

TrainLog read_train_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training log " + path.string());
  TrainLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("iteration,ae,sm,fr,total,n_triplets", 0) != 0) {
        throw FormatError(path.string() + ": unexpected training-log header");
      }
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 6 columns");
    TrainLogRow row;
    try {
      row.iteration = std::stoull(cells[0]);
      row.report.ae = std::stod(cells[1]);
      row.report.sm = std::stod(cells[2]);
      row.report.fr = std::stod(cells[3]);
      row.report.total = std::stod(cells[4]);
      row.report.n_triplets = std::stoull(cells[5]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    if (!log.rows.empty() && row.iteration <= log.rows.back().iteration) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": iterations must increase");
    }
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace jtanet
