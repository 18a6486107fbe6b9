#pragma once

#include <cstdint>

#include "jtanet/model.hpp"

namespace jtanet {

/// Adam moments for every trainable parameter, plus hyperparameters.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  ParamStore first_moment;
  ParamStore second_moment;

  /// Zeroed moments shaped like the trainable entries of `params`.
  static AdamState for_params(const ModelParams& params, double lr = 0.001);

  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update over every trainable parameter that has a
// gradient. Rejects the whole step (nothing modified) with NumericError when
// any gradient is NaN/Inf, and ShapeError on shape mismatch.
void adam_step(ModelParams& params, const GradStore& grads, AdamState& state);

}  // namespace jtanet
