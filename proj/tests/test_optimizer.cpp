#include <cmath>
#include <limits>

#include "doctest.h"
#include "jtanet/optimizer.hpp"

using namespace jtanet;

namespace {

ModelParams scalar_param(double v) {
  ModelParams p;
  p.add("w", Tensor({1}, v));
  p.add("buffer", Tensor({1}, 7.0), false);
  return p;
}

GradStore scalar_grad(double g) {
  GradStore s;
  s.add("w", Tensor({1}, g));
  return s;
}

/// Adam written out directly for one scalar.
double adam_reference(double w, const std::vector<double>& grads, double lr = 0.001) {
  double m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, static_cast<double>(t)));
    const double vh = v / (1.0 - std::pow(0.999, static_cast<double>(t)));
    w -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  return w;
}

}  // namespace

TEST_CASE("adam defaults") {
  const AdamState s;
  CHECK(s.lr == 0.001);
  CHECK(s.beta1 == 0.9);
  CHECK(s.beta2 == 0.999);
  CHECK(s.eps == 1e-8);
}

TEST_CASE("first adam step moves by about lr") {
  ModelParams p = scalar_param(1.0);
  AdamState s = AdamState::for_params(p);
  CHECK(s.first_moment.size() == 1);
  adam_step(p, scalar_grad(0.5), s);
  CHECK(p.get("w")[0] - 1.0 == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(p.get("w")[0] == doctest::Approx(adam_reference(1.0, {0.5})).epsilon(1e-15));
  CHECK(p.get("buffer")[0] == 7.0);
  CHECK(s.step == 1);
}

TEST_CASE("zero gradient leaves parameters and advances the step") {
  ModelParams p = scalar_param(2.0);
  AdamState s = AdamState::for_params(p);
  adam_step(p, scalar_grad(0.0), s);
  CHECK(p.get("w")[0] == 2.0);
  CHECK(s.step == 1);
}

TEST_CASE("two steps differ from one doubled step") {
  ModelParams a = scalar_param(0.0), b = scalar_param(0.0);
  AdamState sa = AdamState::for_params(a), sb = AdamState::for_params(b);
  adam_step(a, scalar_grad(0.3), sa);
  adam_step(a, scalar_grad(0.3), sa);
  adam_step(b, scalar_grad(0.6), sb);
  CHECK(a.get("w")[0] != b.get("w")[0]);
  CHECK(a.get("w")[0] == doctest::Approx(adam_reference(0.0, {0.3, 0.3})).epsilon(1e-15));
}

TEST_CASE("non-finite gradients reject the whole step") {
  ModelParams p;
  p.add("a", Tensor({2}, 1.0));
  p.add("b", Tensor({2}, 1.0));
  AdamState s = AdamState::for_params(p);
  GradStore g;
  g.add("a", Tensor({2}, 0.1));
  g.add("b", Tensor({2}, std::vector<double>{0.1, std::numeric_limits<double>::quiet_NaN()}));
  const ModelParams before = p;
  const AdamState s_before = s;
  CHECK_THROWS_AS(adam_step(p, g, s), NumericError);
  CHECK(p == before);
  CHECK(s == s_before);

  GradStore bad;
  bad.add("a", Tensor({3}, 0.1));
  CHECK_THROWS_AS(adam_step(p, bad, s), ShapeError);
}
