#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "jtanet/losses.hpp"
#include "jtanet/tensor.hpp"

namespace jtanet::oracle {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.storage()) v = d(rng);
  return t;
}

/// Direct six-loop 3x3 cross-correlation, stride 1, zero padding 1.
inline Tensor naive_conv(const Tensor& x, const Tensor& w) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3), Co = w.dim(0);
  Tensor y({B, Co, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < Ci; ++c)
            for (std::size_t ki = 0; ki < 3; ++ki)
              for (std::size_t kj = 0; kj < 3; ++kj) {
                const long si = static_cast<long>(i + ki) - 1, sj = static_cast<long>(j + kj) - 1;
                if (si < 0 || sj < 0 || si >= static_cast<long>(H) || sj >= static_cast<long>(W)) continue;
                acc += x.at(b, c, static_cast<std::size_t>(si), static_cast<std::size_t>(sj)) * w.at(o, c, ki, kj);
              }
          y.at(b, o, i, j) = acc;
        }
  return y;
}

/// Central finite-difference gradient of a scalar function.
inline Tensor numeric_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const Tensor& a, const Tensor& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Direct scalar loops for the three losses.
inline double ae_loss_loop(const Tensor& I, const Tensor& R) {
  const std::size_t B = I.dim(0), C = I.dim(1), H = I.dim(2), W = I.dim(3);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t u = 0; u < H; ++u)
      for (std::size_t v = 0; v < W; ++v)
        for (std::size_t c = 0; c < C; ++c) {
          const double d = I.at(i, c, u, v) - R.at(i, c, u, v);
          s += d * d;
        }
    total += s / static_cast<double>(H * W * C);
  }
  return total;
}

inline double ssd(const Tensor& f, std::size_t a, std::size_t b) {
  const std::size_t dim = f.dim(1);
  double s = 0.0;
  for (std::size_t v = 0; v < dim; ++v) {
    const double d = f[a * dim + v] - f[b * dim + v];
    s += d * d;
  }
  return s;
}

inline double siamese_loop(const Tensor& f, const std::vector<Triplet>& ts, double margin, bool batch_mode) {
  if (ts.empty()) return 0.0;  // no mined triplets: loss 0 by contract
  if (batch_mode) {
    double intra = 0.0, inter = 0.0;
    for (const auto& t : ts) {
      intra += ssd(f, t.anchor, t.positive);
      inter += ssd(f, t.anchor, t.negative);
    }
    const double ls = intra - inter + margin;
    return ls <= 0.0 ? 0.0 : ls;
  }
  double total = 0.0;
  for (const auto& t : ts) total += std::max(ssd(f, t.anchor, t.positive) - ssd(f, t.anchor, t.negative) + margin, 0.0);
  return total;
}

inline double fr_loop(const Tensor& f) {
  const std::size_t B = f.dim(0), dim = f.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t v = 0; v < dim; ++v) s += f[i * dim + v] * f[i * dim + v];
    total += s;
  }
  return total;
}

/// Qualifying negatives of (a, p) under brute force, with their scores.
struct NegativeBands {
  std::vector<std::size_t> positive_score;  // score > 0
  std::vector<std::size_t> semi_hard;       // 0 < score <= margin
  std::size_t hardest = static_cast<std::size_t>(-1);
  double hardest_score = -1e300;
};

inline NegativeBands brute_force_negatives(const Tensor& e, const std::vector<int>& labels, std::size_t a,
                                           std::size_t p, double margin) {
  NegativeBands bands;
  const double d_ap = ssd(e, a, p);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] == labels[a]) continue;
    const double score = d_ap - ssd(e, a, n) + margin;
    if (score > bands.hardest_score) {
      bands.hardest_score = score;
      bands.hardest = n;
    }
    if (score > 0.0) bands.positive_score.push_back(n);
    if (score > 0.0 && score <= margin) bands.semi_hard.push_back(n);
  }
  return bands;
}

/// Full sort by (distance, index) of every database row.
inline std::vector<std::pair<double, std::size_t>> full_scan(const Tensor& db, const std::vector<double>& q) {
  const std::size_t n = db.dim(0), dim = db.dim(1);
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t z = 0; z < dim; ++z) s += (q[z] - db[i * dim + z]) * (q[z] - db[i * dim + z]);
    all.emplace_back(std::sqrt(s), i);
  }
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace jtanet::oracle
