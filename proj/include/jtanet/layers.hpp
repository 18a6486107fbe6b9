#pragma once

#include <cstdint>
#include <vector>

#include "jtanet/tensor.hpp"

// Forward and backward primitives for the layer types used by the encoder and
// decoder. All image tensors are NCHW. Every function is pure.
namespace jtanet::ops {

enum class Mode { train, eval };

inline constexpr double kLeakySlope = 0.2;

// Convolution: 3x3 kernel, stride 1, zero padding 1, no bias, cross-correlation.
// Weight layout is [C_out, C_in, 3, 3].
Tensor conv2d_forward(const Tensor& x, const Tensor& w);
/// param_grads["weight"].
LayerGrad conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out);

// Transposed convolution, the exact adjoint of conv2d_forward for the same
// kernel. Weight layout is [C_in, C_out, 3, 3] so that
// <conv2d_forward(x, w), y> == <x, conv2d_transpose_forward(y, w)>.
Tensor conv2d_transpose_forward(const Tensor& x, const Tensor& w);
LayerGrad conv2d_transpose_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out);

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Output of batchnorm_forward plus what the backward pass needs.
struct BatchNormResult {
  Tensor output;
  Tensor normalized;            // x_hat
  std::vector<double> inv_std;  // per channel
  Tensor running_mean;          // updated in train mode, copied in eval mode
  Tensor running_var;
};

// Per-channel normalization over batch and spatial dims. Train mode uses biased
// batch variance for normalization and folds the unbiased variance into the
// running estimate with the given momentum. Eval mode uses the running stats.
BatchNormResult batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                  const Tensor& running_mean, const Tensor& running_var, Mode mode,
                                  const BatchNormOptions& options = {});
/// param_grads["weight"] (gamma) and ["bias"] (beta).
LayerGrad batchnorm_backward(const BatchNormResult& forward, const Tensor& gamma, const Tensor& grad_out,
                             Mode mode);

Tensor leaky_relu_forward(const Tensor& x, double slope = kLeakySlope);
/// Subgradient at exactly 0 is 1.
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope = kLeakySlope);

struct MaxPoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 2x2 window, stride 2. Ties go to the first element in row-major scan order.
MaxPoolResult maxpool2x2_forward(const Tensor& x);
Tensor maxpool2x2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                           const Tensor& grad_out);

/// Bilinear resize with half-pixel centers (align_corners = false).
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);
/// Adjoint of resize_bilinear.
Tensor resize_bilinear_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w);

Tensor upsample_bilinear2x_forward(const Tensor& x);
Tensor upsample_bilinear2x_backward(const Tensor& grad_out);

Tensor tanh_forward(const Tensor& x);
/// Uses the forward output: d/dx = 1 - tanh(x)^2.
Tensor tanh_backward(const Tensor& output, const Tensor& grad_out);

}  // namespace jtanet::ops
