#include "jtanet/model.hpp"

#include <array>
#include <cmath>
#include <random>

namespace jtanet {
namespace {

constexpr std::array<std::size_t, 6> kEncoderWidths = {64, 128, 256, 512, 1024, 1024};
constexpr std::array<std::size_t, 6> kDecoderWidths = {1024, 1024, 512, 256, 128, 64};

std::size_t scaled(std::size_t width, double scale) {
  const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(width) * scale));
  return v == 0 ? 1 : v;
}

Tensor normal_kernel(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

// Shared body of both forward flavours. `running` receives updated statistics
// when non-null.
struct BlockSpec {
  bool transpose;
  bool last;  // Tanh instead of LeakyReLU, no resampling
  bool pool;  // encoder: max-pool; decoder: upsample
};

LayerTrace run_block(const ModelParams& params, const std::string& prefix, const BlockSpec& spec, Tensor input,
                     ops::Mode mode, ModelParams* running, std::size_t layer, std::vector<ShapeRecord>& shapes) {
  LayerTrace t;
  t.input = std::move(input);
  const Tensor& w = params.get(prefix + (spec.transpose ? ".deconv.weight" : ".conv.weight"));
  const Tensor conv_out =
      spec.transpose ? ops::conv2d_transpose_forward(t.input, w) : ops::conv2d_forward(t.input, w);
  shapes.push_back({layer, spec.transpose ? "ConvTranspose" : "Conv", t.input.shape(), conv_out.shape()});

  t.bn = ops::batchnorm_forward(conv_out, params.get(prefix + ".bn.weight"), params.get(prefix + ".bn.bias"),
                                params.get(prefix + ".bn.running_mean"), params.get(prefix + ".bn.running_var"),
                                mode);
  if (running != nullptr && mode == ops::Mode::train) {
    running->get(prefix + ".bn.running_mean") = t.bn.running_mean;
    running->get(prefix + ".bn.running_var") = t.bn.running_var;
  }
  if (spec.last && spec.transpose) {
    t.activation = ops::tanh_forward(t.bn.output);
    shapes.push_back({layer, "BatchNorm, Tanh", conv_out.shape(), t.activation.shape()});
  } else {
    t.activation = ops::leaky_relu_forward(t.bn.output);
    shapes.push_back({layer, "BatchNorm, LeakyReLU", conv_out.shape(), t.activation.shape()});
  }
  if (!spec.pool) {
    t.output = t.activation;
  } else if (spec.transpose) {
    t.output = ops::upsample_bilinear2x_forward(t.activation);
    shapes.push_back({layer, "UpSample", t.activation.shape(), t.output.shape()});
  } else {
    auto pooled = ops::maxpool2x2_forward(t.activation);
    t.output = std::move(pooled.output);
    t.pool_argmax = std::move(pooled.argmax);
    shapes.push_back({layer, "MaxPool", t.activation.shape(), t.output.shape()});
  }
  return t;
}

void check_patches(const ModelConfig& config, const Tensor& patches) {
  require_rank(patches, 4, "siamcoder input");
  const std::size_t m = config.input_side;
  if (patches.dim(1) != kImageChannels) {
    throw ShapeError("siamcoder input must have 3 channels, got " + shape_to_string(patches.shape()));
  }
  if (patches.dim(2) != m || patches.dim(3) != m) {
    throw ShapeError("siamcoder input side must be " + std::to_string(m) + ", got " +
                     shape_to_string(patches.shape()));
  }
}

EncoderOutput encoder_impl(const ModelParams& params, const ModelConfig& config, const Tensor& patches,
                           ops::Mode mode, ModelParams* running) {
  check_patches(config, patches);
  EncoderOutput out;
  out.trace.mode = mode;
  Tensor x = patches;
  for (std::size_t layer = 1; layer <= kNumLayers; ++layer) {
    const BlockSpec spec{false, layer == kNumLayers, layer < kNumLayers};
    out.trace.layers.push_back(
        run_block(params, encoder_prefix(layer), spec, std::move(x), mode, running, layer, out.shapes));
    x = out.trace.layers.back().output;
  }
  out.features = x.reshaped({x.dim(0), config.feature_len()});
  return out;
}

DecoderOutput decoder_impl(const ModelParams& params, const ModelConfig& config, const Tensor& features,
                           ops::Mode mode, ModelParams* running) {
  require_rank(features, 2, "decoder input");
  if (features.dim(1) != config.feature_len()) {
    throw ShapeError("decoder expects features of length " + std::to_string(config.feature_len()) + ", got " +
                     shape_to_string(features.shape()));
  }
  const std::size_t s = config.bottleneck_side();
  DecoderOutput out;
  out.trace.mode = mode;
  Tensor x = features.reshaped({features.dim(0), config.embedding_len, s, s});
  for (std::size_t layer = 1; layer <= kNumLayers; ++layer) {
    const BlockSpec spec{true, layer == kNumLayers, layer < kNumLayers};
    out.trace.layers.push_back(
        run_block(params, decoder_prefix(layer), spec, std::move(x), mode, running, layer, out.shapes));
    x = out.trace.layers.back().output;
  }
  out.reconstructions = std::move(x);
  return out;
}

void accumulate(GradStore& grads, const std::string& name, const Tensor& g) { grads.get(name) += g; }

}  // namespace

void ModelConfig::validate() const {
  if (embedding_len == 0) throw ShapeError("embedding length must be positive");
  if (!(channel_scale > 0.0) || !std::isfinite(channel_scale)) throw ShapeError("channel scale must be positive");
  if (input_side < 64 || input_side % 64 != 0) {
    throw ShapeError("input side must be a positive multiple of 64, got " + std::to_string(input_side));
  }
  if (channel_scale == 1.0 && input_side != 64) {
    throw ShapeError("full-width model requires input side 64, got " + std::to_string(input_side));
  }
}

std::size_t ModelConfig::feature_len() const {
  const std::size_t s = bottleneck_side();
  return embedding_len * s * s;
}

std::vector<std::size_t> ModelConfig::encoder_channels() const {
  std::vector<std::size_t> c;
  for (auto w : kEncoderWidths) c.push_back(scaled(w, channel_scale));
  c.push_back(embedding_len);
  return c;
}

std::vector<std::size_t> ModelConfig::decoder_channels() const {
  std::vector<std::size_t> c;
  for (auto w : kDecoderWidths) c.push_back(scaled(w, channel_scale));
  c.push_back(kImageChannels);
  return c;
}

void ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.push_back({std::move(name), std::move(value), trainable});
}

const ParamStore::Entry* ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

bool ParamStore::contains(const std::string& name) const { return find(name) != nullptr; }

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

const Tensor& ParamStore::get(const std::string& name) const {
  const Entry* e = find(name);
  if (e == nullptr) throw std::out_of_range("no parameter named " + name);
  return e->value;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.trainable != b.trainable || !(a.value == b.value)) return false;
  }
  return true;
}

std::string encoder_prefix(std::size_t layer) { return "encoder." + std::to_string(layer); }
std::string decoder_prefix(std::size_t layer) { return "decoder." + std::to_string(layer); }

double init_stddev(std::size_t fan_in) {
  const double gain = std::sqrt(2.0 / (1.0 + ops::kLeakySlope * ops::kLeakySlope));
  return gain / std::sqrt(static_cast<double>(fan_in));
}

std::vector<ParamSpec> param_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParamSpec> layout;
  auto add_block = [&](const std::string& prefix, const std::string& conv, Shape kernel, std::size_t fan_in,
                       std::size_t out) {
    layout.push_back({prefix + conv, std::move(kernel), true, fan_in});
    layout.push_back({prefix + ".bn.weight", {out}, true, 0});
    layout.push_back({prefix + ".bn.bias", {out}, true, 0});
    layout.push_back({prefix + ".bn.running_mean", {out}, false, 0});
    layout.push_back({prefix + ".bn.running_var", {out}, false, 0});
  };
  std::size_t in = kImageChannels;
  for (std::size_t layer = 1; layer <= kNumLayers; ++layer) {
    const std::size_t out = config.encoder_channels()[layer - 1];
    add_block(encoder_prefix(layer), ".conv.weight", {out, in, 3, 3}, in * 9, out);
    in = out;
  }
  in = config.embedding_len;
  for (std::size_t layer = 1; layer <= kNumLayers; ++layer) {
    const std::size_t out = config.decoder_channels()[layer - 1];
    // Each transposed-conv output sums over in * 9 inputs.
    add_block(decoder_prefix(layer), ".deconv.weight", {in, out, 3, 3}, in * 9, out);
    in = out;
  }
  return layout;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  for (auto& spec : param_layout(config)) {
    Tensor value;
    if (spec.fan_in > 0) {
      value = normal_kernel(spec.shape, init_stddev(spec.fan_in), rng);
    } else {
      const bool ones = spec.name.ends_with(".bn.weight") || spec.name.ends_with(".bn.running_var");
      value = Tensor(spec.shape, ones ? 1.0 : 0.0);
    }
    params.add(std::move(spec.name), std::move(value), spec.trainable);
  }
  return params;
}

GradStore zero_grads(const ModelParams& params) {
  GradStore grads;
  for (const auto& e : params.entries()) {
    if (e.trainable) grads.add(e.name, Tensor::zeros_like(e.value));
  }
  return grads;
}

EncoderOutput siamcoder_forward(ModelParams& params, const ModelConfig& config, const Tensor& patches,
                                ops::Mode mode, bool update_running_stats) {
  return encoder_impl(params, config, patches, mode, update_running_stats ? &params : nullptr);
}

Tensor siamcoder_forward(const ModelParams& params, const ModelConfig& config, const Tensor& patches) {
  return encoder_impl(params, config, patches, ops::Mode::eval, nullptr).features;
}

DecoderOutput decoder_forward(ModelParams& params, const ModelConfig& config, const Tensor& features,
                              ops::Mode mode, bool update_running_stats) {
  return decoder_impl(params, config, features, mode, update_running_stats ? &params : nullptr);
}

Tensor decoder_forward(const ModelParams& params, const ModelConfig& config, const Tensor& features) {
  return decoder_impl(params, config, features, ops::Mode::eval, nullptr).reconstructions;
}

void siamcoder_backward(const ModelParams& params, const NetworkTrace& trace, const Tensor& grad_features,
                        GradStore& grads) {
  if (trace.layers.size() != kNumLayers) throw ShapeError("siamcoder_backward: incomplete trace");
  Tensor g = grad_features.reshaped(trace.layers.back().output.shape());
  for (std::size_t layer = kNumLayers; layer >= 1; --layer) {
    const LayerTrace& t = trace.layers[layer - 1];
    const std::string prefix = encoder_prefix(layer);
    if (layer < kNumLayers) g = ops::maxpool2x2_backward(t.activation.shape(), t.pool_argmax, g);
    g = ops::leaky_relu_backward(t.bn.output, g);
    const Tensor& gamma = params.get(prefix + ".bn.weight");
    LayerGrad bn = ops::batchnorm_backward(t.bn, gamma, g, trace.mode);
    accumulate(grads, prefix + ".bn.weight", bn.param_grads.at("weight"));
    accumulate(grads, prefix + ".bn.bias", bn.param_grads.at("bias"));
    LayerGrad conv = ops::conv2d_backward(t.input, params.get(prefix + ".conv.weight"), bn.input_grad);
    accumulate(grads, prefix + ".conv.weight", conv.param_grads.at("weight"));
    g = std::move(conv.input_grad);
  }
}

Tensor decoder_backward(const ModelParams& params, const ModelConfig& config, const NetworkTrace& trace,
                        const Tensor& grad_reconstructions, GradStore& grads) {
  if (trace.layers.size() != kNumLayers) throw ShapeError("decoder_backward: incomplete trace");
  require_shape(grad_reconstructions, trace.layers.back().output.shape(), "decoder_backward grad");
  Tensor g = grad_reconstructions;
  for (std::size_t layer = kNumLayers; layer >= 1; --layer) {
    const LayerTrace& t = trace.layers[layer - 1];
    const std::string prefix = decoder_prefix(layer);
    if (layer == kNumLayers) {
      g = ops::tanh_backward(t.activation, g);
    } else {
      g = ops::upsample_bilinear2x_backward(g);
      g = ops::leaky_relu_backward(t.bn.output, g);
    }
    LayerGrad bn = ops::batchnorm_backward(t.bn, params.get(prefix + ".bn.weight"), g, trace.mode);
    accumulate(grads, prefix + ".bn.weight", bn.param_grads.at("weight"));
    accumulate(grads, prefix + ".bn.bias", bn.param_grads.at("bias"));
    LayerGrad deconv =
        ops::conv2d_transpose_backward(t.input, params.get(prefix + ".deconv.weight"), bn.input_grad);
    accumulate(grads, prefix + ".deconv.weight", deconv.param_grads.at("weight"));
    g = std::move(deconv.input_grad);
  }
  return g.reshaped({g.dim(0), config.feature_len()});
}

}  // namespace jtanet
