#include <cmath>
#include <random>

#include "doctest.h"
#include "jtanet/losses.hpp"
#include "oracles.hpp"

using namespace jtanet;
using oracle::numeric_grad;
using oracle::random_tensor;
using oracle::relative_error;

namespace {

Tensor column(std::initializer_list<double> v) { return Tensor({v.size(), 1}, std::vector<double>(v)); }

std::vector<Triplet> random_triplets(std::size_t batch, std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, batch - 1);
  std::vector<Triplet> ts;
  for (std::size_t i = 0; i < count; ++i) ts.push_back({pick(rng), pick(rng), pick(rng)});
  return ts;
}

}  // namespace

TEST_CASE("autoencoder loss examples") {
  Tensor a({1, 3, 64, 64});
  CHECK(autoencoder_loss(a, a).value == 0.0);
  Tensor b = a;
  b.at(0, 1, 10, 20) = 0.3;
  CHECK(autoencoder_loss(a, b).value == doctest::Approx(0.09 / (64.0 * 64.0 * 3.0)).epsilon(1e-14));
  CHECK(autoencoder_loss(a, b).value == doctest::Approx(7.324e-6).epsilon(1e-4));

  Tensor a2({2, 3, 64, 64}), b2({2, 3, 64, 64});
  b2.at(0, 1, 10, 20) = 0.3;
  b2.at(1, 2, 5, 5) = -0.3;
  CHECK(autoencoder_loss(a2, b2).value == doctest::Approx(2.0 * autoencoder_loss(a, b).value).epsilon(1e-14));
  CHECK_THROWS_AS(autoencoder_loss(a, a2), ShapeError);
}

TEST_CASE("siamese loss examples") {
  // Anchors equal positives and negatives sit beyond the margin.
  CHECK(siamese_loss(column({0, 1}), column({0, 1}), column({1, 2}), 0.5, HingeMode::per_triplet) == 0.0);
  CHECK(siamese_loss(column({0, 1}), column({0, 1}), column({1, 2}), 0.5, HingeMode::batch) == 0.0);

  // d(A,P) = 0.2, d(A,N) = 0.1, margin 0.5.
  const Tensor fa = column({0.0}), fp = column({std::sqrt(0.2)}), fn = column({std::sqrt(0.1)});
  CHECK(siamese_loss(fa, fp, fn, 0.5, HingeMode::per_triplet) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(siamese_loss(fa, fp, fn, 0.5, HingeMode::batch) == doctest::Approx(0.6).epsilon(1e-14));

  const auto none = siamese_loss(Tensor({3, 2}, 1.0), {}, 0.5, HingeMode::per_triplet);
  CHECK(none.value == 0.0);
  CHECK(none.no_triplets);
}

TEST_CASE("hinge modes diverge on mixed-sign triplet scores") {
  // Scores d(A,P) - d(A,N) are 0.6 and -0.3 with no margin offset.
  const Tensor fa = column({0.0, 0.0});
  const Tensor fp = column({1.0, std::sqrt(0.1)});
  const Tensor fn = column({std::sqrt(0.4), std::sqrt(0.4)});
  CHECK(std::abs(siamese_loss(fa, fp, fn, 0.0, HingeMode::per_triplet) - 0.6) < 1e-15);
  CHECK(std::abs(siamese_loss(fa, fp, fn, 0.0, HingeMode::batch) - 0.3) < 1e-15);
}

TEST_CASE("feature regularization examples") {
  CHECK(feature_reg_loss(Tensor({3, 4})).value == 0.0);
  CHECK(feature_reg_loss(Tensor({1, 2}, std::vector<double>{0.6, 0.8})).value == doctest::Approx(1.0).epsilon(1e-15));
  std::mt19937_64 rng(1);
  const Tensor f = random_tensor({4, 5}, rng);
  CHECK(feature_reg_loss(2.5 * f).value == doctest::Approx(6.25 * feature_reg_loss(f).value).epsilon(1e-13));
}

TEST_CASE("total loss weighting") {
  CHECK(total_loss(2, 3, 5, 0, LossWeights{}).total == 10.0);
  const auto w0 = LossWeights::parse("0:1:1");
  CHECK(total_loss(2, 3, 5, 0, w0).total == 8.0);
  CHECK(total_loss(1, 2, 3, 0, LossWeights::parse("1:5:1")).total == 14.0);
  CHECK(LossWeights::parse("1:5:1").sm == 5.0);
  CHECK(LossWeights::parse("1:5:1").margin == 0.5);
  CHECK(LossWeights::parse("0.5:2:0").to_string() == "0.5:2:0");
  CHECK_THROWS(LossWeights::parse("1:1"));
  CHECK_THROWS(LossWeights::parse("1:-1:1"));
  CHECK_THROWS(LossWeights::parse("a:b:c"));
  CHECK(parse_hinge_mode("batch") == HingeMode::batch);
  CHECK_THROWS(parse_hinge_mode("mean"));
}

TEST_CASE("losses agree with scalar loop oracles on random inputs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t B = 2 + trial % 5, dim = 1 + trial % 7;
    const Tensor f = random_tensor({B, dim}, rng);
    const auto ts = random_triplets(B, 1 + trial % 6, rng);
    for (double margin : {0.0, 0.5, 1.3}) {
      CHECK(std::abs(siamese_loss(f, ts, margin, HingeMode::per_triplet).value -
                     oracle::siamese_loop(f, ts, margin, false)) < 1e-10);
      CHECK(std::abs(siamese_loss(f, ts, margin, HingeMode::batch).value - oracle::siamese_loop(f, ts, margin, true)) <
            1e-10);
    }
    CHECK(std::abs(feature_reg_loss(f).value - oracle::fr_loop(f)) < 1e-10);
    const Tensor I = random_tensor({B, 3, 4, 4}, rng), R = random_tensor({B, 3, 4, 4}, rng);
    CHECK(std::abs(autoencoder_loss(I, R).value - oracle::ae_loss_loop(I, R)) < 1e-10);
  }
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t B = 3 + trial % 4, dim = 2 + trial % 3;
    const Tensor f = random_tensor({B, dim}, rng);
    const auto ts = random_triplets(B, 2 + trial % 4, rng);
    for (auto mode : {HingeMode::per_triplet, HingeMode::batch}) {
      const double margin = 0.7;
      const bool batch = mode == HingeMode::batch;
      const Tensor num = numeric_grad([&](const Tensor& t) { return oracle::siamese_loop(t, ts, margin, batch); }, f);
      CAPTURE(trial);
      CHECK(relative_error(siamese_loss(f, ts, margin, mode).grad, num) < 1e-4);
    }
    CHECK(relative_error(feature_reg_loss(f).grad, numeric_grad(oracle::fr_loop, f)) < 1e-4);
    const Tensor I = random_tensor({2, 3, 3, 3}, rng), R = random_tensor({2, 3, 3, 3}, rng);
    CHECK(relative_error(autoencoder_loss(I, R).grad,
                         numeric_grad([&](const Tensor& t) { return oracle::ae_loss_loop(I, t); }, R)) < 1e-4);
  }
}

TEST_CASE("siamese loss is translation invariant") {
  std::mt19937_64 rng(4);
  const Tensor f = random_tensor({5, 3}, rng);
  Tensor g = f;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t v = 0; v < 3; ++v) g[i * 3 + v] += 0.25 * static_cast<double>(v + 1);
  const auto ts = random_triplets(5, 4, rng);
  CHECK(siamese_loss(f, ts, 0.5, HingeMode::per_triplet).value ==
        doctest::Approx(siamese_loss(g, ts, 0.5, HingeMode::per_triplet).value).epsilon(1e-12));
}
