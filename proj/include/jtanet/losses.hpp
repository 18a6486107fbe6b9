#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jtanet/tensor.hpp"

namespace jtanet {

/// Weights of the three loss terms and the triplet margin.
struct LossWeights {
  double ae = 1.0;
  double sm = 1.0;
  double fr = 1.0;
  double margin = 0.5;

  /// Parses "AE:SM:FR", e.g. "1:5:1". Margin keeps its default.
  static LossWeights parse(const std::string& text);
  std::string to_string() const;
  void validate() const;
};

enum class HingeMode { per_triplet, batch };

HingeMode parse_hinge_mode(const std::string& text);
std::string to_string(HingeMode mode);

struct LossReport {
  double ae = 0.0;
  double sm = 0.0;
  double fr = 0.0;
  double total = 0.0;
  std::size_t n_triplets = 0;
};

struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;

  bool operator==(const Triplet&) const = default;
};

/// Scalar loss value plus gradient w.r.t. the tensor it was computed from.
struct LossValue {
  double value = 0.0;
  Tensor grad;
};

// Sum over the batch of the per-image mean squared error (mean over m*m*3).
// Inputs are [B, ...] with identical shapes. Gradient is w.r.t. reconstructions.
LossValue autoencoder_loss(const Tensor& originals, const Tensor& reconstructions);

struct SiameseLoss {
  double value = 0.0;
  Tensor grad;              // w.r.t. the feature batch, [B, dim]
  bool no_triplets = false;  // set when the triplet list was empty
};

// Triplet hinge on squared Euclidean distances between rows of `features`.
// per_triplet: sum_i max(d_ap_i - d_an_i + margin, 0).
// batch:       max(sum_i d_ap_i - sum_i d_an_i + margin, 0).
// The hinge is inactive at exactly zero.
SiameseLoss siamese_loss(const Tensor& features, const std::vector<Triplet>& triplets, double margin,
                         HingeMode mode);

/// Column form: fa, fp, fn are [nb, dim] with row i forming triplet i.
double siamese_loss(const Tensor& fa, const Tensor& fp, const Tensor& fn, double margin, HingeMode mode,
                    bool* no_triplets = nullptr);

/// Sum over the batch of squared L2 norms of the feature rows.
LossValue feature_reg_loss(const Tensor& features);

/// total = ae*w.ae + sm*w.sm + fr*w.fr, accumulated in that order.
LossReport total_loss(double ae, double sm, double fr, std::size_t n_triplets, const LossWeights& weights);

}  // namespace jtanet
