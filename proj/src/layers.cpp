#include "jtanet/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "jtanet/parallel.hpp"

namespace jtanet::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel;
// Weight gradients are summed per fixed-size chunk of samples, then the chunks
// are combined in order, so results do not depend on the thread count.
constexpr std::size_t kChunk = 8;

// cols[(c*9 + ky*3 + kx), y*W + x] = img[c, y+ky-1, x+kx-1] (zero outside).
void im2col(const double* img, std::size_t channels, std::size_t h, std::size_t w, double* cols) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = img + c * hw;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        double* row = cols + (c * kTaps + ky * kKernel + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          double* out = row + y * w;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(out, out + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x + kx) - 1;
            out[x] = (sx < 0 || sx >= static_cast<long>(w)) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im(const double* cols, std::size_t channels, std::size_t h, std::size_t w, double* img) {
  const std::size_t hw = h * w;
  std::fill(img, img + channels * hw, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = img + c * hw;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const double* row = cols + (c * kTaps + ky * kKernel + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          const double* in = row + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) dst[sx] += in[x];
          }
        }
      }
    }
  }
}

void check_kernel(const Tensor& w, const char* what) {
  require_rank(w, 4, what);
  if (w.dim(2) != kKernel || w.dim(3) != kKernel) {
    throw ShapeError(std::string(what) + ": kernel must be 3x3, got " + shape_to_string(w.shape()));
  }
}

std::size_t chunk_count(std::size_t batch) { return (batch + kChunk - 1) / kChunk; }

Tensor reduce_chunks(const std::vector<Tensor>& partials) {
  Tensor total = partials.front();
  for (std::size_t i = 1; i < partials.size(); ++i) total += partials[i];
  return total;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w) {
  require_rank(x, 4, "conv2d input");
  check_kernel(w, "conv2d weight");
  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t c_out = w.dim(0);
  if (w.dim(1) != c_in) {
    throw ShapeError("conv2d: input has " + std::to_string(c_in) + " channels, kernel expects " +
                     std::to_string(w.dim(1)));
  }
  const std::size_t hw = h * wd;
  Tensor out({batch, c_out, h, wd});
  ConstMatrixMap weight(w.data().data(), c_out, c_in * kTaps);
  parallel_for(batch, [&](std::size_t b) {
    RowMatrix cols(c_in * kTaps, hw);
    im2col(x.data().data() + b * c_in * hw, c_in, h, wd, cols.data());
    MatrixMap y(out.data().data() + b * c_out * hw, c_out, hw);
    y.noalias() = weight * cols;
  });
  return out;
}

LayerGrad conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out) {
  require_rank(x, 4, "conv2d input");
  check_kernel(w, "conv2d weight");
  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t c_out = w.dim(0);
  if (w.dim(1) != c_in) throw ShapeError("conv2d_backward: channel mismatch between input and kernel");
  require_shape(grad_out, {batch, c_out, h, wd}, "conv2d_backward grad_out");
  const std::size_t hw = h * wd;

  LayerGrad grad;
  grad.input_grad = Tensor(x.shape());
  ConstMatrixMap weight(w.data().data(), c_out, c_in * kTaps);
  std::vector<Tensor> partials(chunk_count(batch), Tensor(w.shape()));
  parallel_for(partials.size(), [&](std::size_t chunk) {
    MatrixMap dw(partials[chunk].data().data(), c_out, c_in * kTaps);
    RowMatrix cols(c_in * kTaps, hw);
    RowMatrix dcols(c_in * kTaps, hw);
    const std::size_t end = std::min(batch, (chunk + 1) * kChunk);
    for (std::size_t b = chunk * kChunk; b < end; ++b) {
      im2col(x.data().data() + b * c_in * hw, c_in, h, wd, cols.data());
      ConstMatrixMap dy(grad_out.data().data() + b * c_out * hw, c_out, hw);
      dw.noalias() += dy * cols.transpose();
      dcols.noalias() = weight.transpose() * dy;
      col2im(dcols.data(), c_in, h, wd, grad.input_grad.data().data() + b * c_in * hw);
    }
  });
  grad.param_grads["weight"] = reduce_chunks(partials);
  return grad;
}

Tensor conv2d_transpose_forward(const Tensor& x, const Tensor& w) {
  require_rank(x, 4, "conv2d_transpose input");
  check_kernel(w, "conv2d_transpose weight");
  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  if (w.dim(0) != c_in) {
    throw ShapeError("conv2d_transpose: input has " + std::to_string(c_in) + " channels, kernel expects " +
                     std::to_string(w.dim(0)));
  }
  const std::size_t c_out = w.dim(1);
  const std::size_t hw = h * wd;
  Tensor out({batch, c_out, h, wd});
  ConstMatrixMap weight(w.data().data(), c_in, c_out * kTaps);
  parallel_for(batch, [&](std::size_t b) {
    ConstMatrixMap xb(x.data().data() + b * c_in * hw, c_in, hw);
    RowMatrix cols(c_out * kTaps, hw);
    cols.noalias() = weight.transpose() * xb;
    col2im(cols.data(), c_out, h, wd, out.data().data() + b * c_out * hw);
  });
  return out;
}

LayerGrad conv2d_transpose_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out) {
  require_rank(x, 4, "conv2d_transpose input");
  check_kernel(w, "conv2d_transpose weight");
  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  if (w.dim(0) != c_in) throw ShapeError("conv2d_transpose_backward: channel mismatch between input and kernel");
  const std::size_t c_out = w.dim(1);
  require_shape(grad_out, {batch, c_out, h, wd}, "conv2d_transpose_backward grad_out");
  const std::size_t hw = h * wd;

  LayerGrad grad;
  grad.input_grad = Tensor(x.shape());
  ConstMatrixMap weight(w.data().data(), c_in, c_out * kTaps);
  std::vector<Tensor> partials(chunk_count(batch), Tensor(w.shape()));
  parallel_for(partials.size(), [&](std::size_t chunk) {
    MatrixMap dw(partials[chunk].data().data(), c_in, c_out * kTaps);
    RowMatrix dcols(c_out * kTaps, hw);
    const std::size_t end = std::min(batch, (chunk + 1) * kChunk);
    for (std::size_t b = chunk * kChunk; b < end; ++b) {
      im2col(grad_out.data().data() + b * c_out * hw, c_out, h, wd, dcols.data());
      ConstMatrixMap xb(x.data().data() + b * c_in * hw, c_in, hw);
      dw.noalias() += xb * dcols.transpose();
      MatrixMap dx(grad.input_grad.data().data() + b * c_in * hw, c_in, hw);
      dx.noalias() = weight * dcols;
    }
  });
  grad.param_grads["weight"] = reduce_chunks(partials);
  return grad;
}

BatchNormResult batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                  const Tensor& running_mean, const Tensor& running_var, Mode mode,
                                  const BatchNormOptions& options) {
  require_rank(x, 4, "batchnorm input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  for (const Tensor* t : {&gamma, &beta, &running_mean, &running_var}) {
    require_shape(*t, {channels}, "batchnorm parameter");
  }
  BatchNormResult r;
  r.output = Tensor(x.shape());
  r.normalized = Tensor(x.shape());
  r.inv_std.assign(channels, 0.0);
  r.running_mean = running_mean;
  r.running_var = running_var;
  const double count = static_cast<double>(batch * hw);

  parallel_for(channels, [&](std::size_t c) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::train) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = x.data().data() + (b * channels + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) mean += p[i];
      }
      mean /= count;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = x.data().data() + (b * channels + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      const double unbiased = count > 1.0 ? var / (count - 1.0) : 0.0;
      var /= count;
      r.running_mean[c] = (1.0 - options.momentum) * running_mean[c] + options.momentum * mean;
      r.running_var[c] = (1.0 - options.momentum) * running_var[c] + options.momentum * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + options.eps);
    r.inv_std[c] = inv_std;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xhat = (x[off + i] - mean) * inv_std;
        r.normalized[off + i] = xhat;
        r.output[off + i] = gamma[c] * xhat + beta[c];
      }
    }
  });
  return r;
}

LayerGrad batchnorm_backward(const BatchNormResult& forward, const Tensor& gamma, const Tensor& grad_out,
                             Mode mode) {
  const Tensor& xhat = forward.normalized;
  require_shape(grad_out, xhat.shape(), "batchnorm_backward grad_out");
  const std::size_t batch = xhat.dim(0), channels = xhat.dim(1), hw = xhat.dim(2) * xhat.dim(3);
  require_shape(gamma, {channels}, "batchnorm_backward gamma");
  LayerGrad grad;
  grad.input_grad = Tensor(xhat.shape());
  Tensor dgamma({channels});
  Tensor dbeta({channels});
  const double count = static_cast<double>(batch * hw);

  parallel_for(channels, [&](std::size_t c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * xhat[off + i];
      }
    }
    dgamma[c] = sum_dy_xhat;
    dbeta[c] = sum_dy;
    const double scale = gamma[c] * forward.inv_std[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        if (mode == Mode::train) {
          grad.input_grad[off + i] =
              scale * (grad_out[off + i] - sum_dy / count - xhat[off + i] * sum_dy_xhat / count);
        } else {
          grad.input_grad[off + i] = scale * grad_out[off + i];
        }
      }
    }
  });
  grad.param_grads["weight"] = std::move(dgamma);
  grad.param_grads["bias"] = std::move(dbeta);
  return grad;
}

Tensor leaky_relu_forward(const Tensor& x, double slope) {
  Tensor out = x;
  for (double& v : out.storage()) {
    if (v < 0.0) v *= slope;
  }
  return out;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope) {
  require_shape(grad_out, x.shape(), "leaky_relu_backward grad_out");
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (x[i] < 0.0) dx[i] *= slope;
  }
  return dx;
}

MaxPoolResult maxpool2x2_forward(const Tensor& x) {
  require_rank(x, 4, "maxpool input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2 needs even spatial dims, got " + shape_to_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult r;
  r.output = Tensor({batch, channels, oh, ow});
  r.argmax.assign(r.output.size(), 0);
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const std::size_t in_base = plane * h * w;
    const std::size_t out_base = plane * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = in_base + (2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = in_base + (2 * oy + dy) * w + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        r.output[out_base + oy * ow + ox] = x[best];
        r.argmax[out_base + oy * ow + ox] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool2x2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                           const Tensor& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2x2_backward: argmax/grad_out size mismatch");
  Tensor dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_out[i];
  return dx;
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi
};

// Half-pixel-center source taps for each output coordinate along one axis.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 4, "resize_bilinear input");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor out({x.dim(0), x.dim(1), out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data().data() + p * h * w;
    double* dst = out.data().data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        const double top = (1.0 - b.frac) * src[a.lo * w + b.lo] + b.frac * src[a.lo * w + b.hi];
        const double bottom = (1.0 - b.frac) * src[a.hi * w + b.lo] + b.frac * src[a.hi * w + b.hi];
        dst[oy * out_w + ox] = (1.0 - a.frac) * top + a.frac * bottom;
      }
    }
  }
  return out;
}

Tensor resize_bilinear_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w) {
  require_rank(grad_out, 4, "resize_bilinear_backward grad_out");
  const std::size_t planes = grad_out.dim(0) * grad_out.dim(1), out_h = grad_out.dim(2), out_w = grad_out.dim(3);
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  Tensor dx({grad_out.dim(0), grad_out.dim(1), in_h, in_w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* g = grad_out.data().data() + p * out_h * out_w;
    double* dst = dx.data().data() + p * in_h * in_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[ox];
        const double v = g[oy * out_w + ox];
        dst[a.lo * in_w + b.lo] += (1.0 - a.frac) * (1.0 - b.frac) * v;
        dst[a.lo * in_w + b.hi] += (1.0 - a.frac) * b.frac * v;
        dst[a.hi * in_w + b.lo] += a.frac * (1.0 - b.frac) * v;
        dst[a.hi * in_w + b.hi] += a.frac * b.frac * v;
      }
    }
  }
  return dx;
}

Tensor upsample_bilinear2x_forward(const Tensor& x) {
  require_rank(x, 4, "upsample input");
  return resize_bilinear(x, 2 * x.dim(2), 2 * x.dim(3));
}

Tensor upsample_bilinear2x_backward(const Tensor& grad_out) {
  require_rank(grad_out, 4, "upsample_backward grad_out");
  if (grad_out.dim(2) % 2 != 0 || grad_out.dim(3) % 2 != 0) {
    throw ShapeError("upsample_backward: odd spatial dims " + shape_to_string(grad_out.shape()));
  }
  return resize_bilinear_backward(grad_out, grad_out.dim(2) / 2, grad_out.dim(3) / 2);
}

Tensor tanh_forward(const Tensor& x) {
  // std::tanh rounds to exactly +-1 past |x| ~ 19; keep the open interval.
  const double bound = std::nextafter(1.0, 0.0);
  Tensor out = x;
  for (double& v : out.storage()) v = std::clamp(std::tanh(v), -bound, bound);
  return out;
}

Tensor tanh_backward(const Tensor& output, const Tensor& grad_out) {
  require_shape(grad_out, output.shape(), "tanh_backward grad_out");
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - output[i] * output[i];
  return dx;
}

}  // namespace jtanet::ops
