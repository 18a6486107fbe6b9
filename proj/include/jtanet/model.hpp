#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "jtanet/layers.hpp"
#include "jtanet/tensor.hpp"

namespace jtanet {

/// Shape of the encoder/decoder pair.
struct ModelConfig {
  std::size_t embedding_len = 1024;  // EL
  std::size_t input_side = 64;       // m
  double channel_scale = 1.0;        // multiplier on the reference channel widths

  /// Throws ShapeError when the configuration cannot be built.
  void validate() const;
  /// Spatial side of the encoder output (m / 64).
  std::size_t bottleneck_side() const { return input_side / 64; }
  /// Length of a flattened embedding: EL * bottleneck_side^2.
  std::size_t feature_len() const;
  /// Output channels of encoder layers 1..7.
  std::vector<std::size_t> encoder_channels() const;
  /// Output channels of decoder layers 1..7.
  std::vector<std::size_t> decoder_channels() const;

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr std::size_t kNumLayers = 7;
inline constexpr std::size_t kImageChannels = 3;

/// Ordered name -> tensor store. Holds trainable weights and batch-norm
/// running statistics; the latter are flagged as non-trainable buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  void add(std::string name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const ParamStore& other) const;

 private:
  const Entry* find(const std::string& name) const;
  std::vector<Entry> entries_;
};

using ModelParams = ParamStore;

/// Gradients keyed by parameter name, same order as the trainable params.
using GradStore = ParamStore;

std::string encoder_prefix(std::size_t layer);  // "encoder.<layer>"
std::string decoder_prefix(std::size_t layer);  // "decoder.<layer>"

struct ParamSpec {
  std::string name;
  Shape shape;
  bool trainable;
  std::size_t fan_in;  // kernels only, 0 otherwise
};

/// Names and shapes of every parameter, in model order.
std::vector<ParamSpec> param_layout(const ModelConfig& config);

/// Deterministic He-style initialization (fan-in, leaky-ReLU gain for slope 0.2);
/// batch-norm gamma = 1, beta = 0, running mean 0, running var 1.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Target standard deviation of a kernel with the given fan-in.
double init_stddev(std::size_t fan_in);

/// A zeroed gradient store matching the trainable entries of `params`.
GradStore zero_grads(const ModelParams& params);

/// Intermediate values of one encoder or decoder layer kept for backward.
struct LayerTrace {
  Tensor input;
  ops::BatchNormResult bn;
  Tensor activation;                    // after LeakyReLU or Tanh
  std::vector<std::uint32_t> pool_argmax;  // encoder layers 1..6
  Tensor output;                        // after pool / upsample, or the activation
};

struct NetworkTrace {
  std::vector<LayerTrace> layers;
  ops::Mode mode = ops::Mode::eval;
};

/// Table-style input/output shapes of one sub-layer, recorded during forward.
struct ShapeRecord {
  std::size_t layer;
  std::string op;
  Shape input;
  Shape output;
};

struct EncoderOutput {
  Tensor features;  // [B, feature_len]
  NetworkTrace trace;
  std::vector<ShapeRecord> shapes;
};

struct DecoderOutput {
  Tensor reconstructions;  // [B, 3, m, m]
  NetworkTrace trace;
  std::vector<ShapeRecord> shapes;
};

/// Encoder (Siamcoder): 7 x [conv, batch-norm, LeakyReLU], max-pool after 1..6.
/// In train mode the running statistics in `params` are updated only when
/// `update_running_stats` is set.
EncoderOutput siamcoder_forward(ModelParams& params, const ModelConfig& config, const Tensor& patches,
                                ops::Mode mode, bool update_running_stats = true);
/// Read-only eval-mode overload.
Tensor siamcoder_forward(const ModelParams& params, const ModelConfig& config, const Tensor& patches);

/// Decoder: 7 x [conv-transpose, batch-norm, activation], bilinear 2x upsample
/// after 1..6, LeakyReLU on 1..6 and Tanh on 7.
DecoderOutput decoder_forward(ModelParams& params, const ModelConfig& config, const Tensor& features,
                              ops::Mode mode, bool update_running_stats = true);
Tensor decoder_forward(const ModelParams& params, const ModelConfig& config, const Tensor& features);

/// Accumulates encoder parameter gradients into `grads`.
void siamcoder_backward(const ModelParams& params, const NetworkTrace& trace, const Tensor& grad_features,
                        GradStore& grads);
/// Accumulates decoder parameter gradients into `grads`, returns d/d features.
Tensor decoder_backward(const ModelParams& params, const ModelConfig& config, const NetworkTrace& trace,
                        const Tensor& grad_reconstructions, GradStore& grads);

}  // namespace jtanet
