#include <algorithm>
#include <random>

#include "doctest.h"
#include "jtanet/mining.hpp"
#include "oracles.hpp"

using namespace jtanet;
using oracle::random_tensor;

TEST_CASE("normalization examples") {
  const auto n = normalize_embeddings(Tensor({2, 2}, std::vector<double>{3, 4, 0, 0}));
  CHECK(n.rows[0] == doctest::Approx(0.6));
  CHECK(n.rows[1] == doctest::Approx(0.8));
  CHECK(n.rows[2] == 0.0);
  CHECK(n.rows[3] == 0.0);
  CHECK(n.had_zero_rows);
  const auto u = normalize_embeddings(Tensor({1, 2}, std::vector<double>{1, 0}));
  CHECK(u.rows[0] == 1.0);
  CHECK(!u.had_zero_rows);
}

TEST_CASE("distance matrix examples") {
  const Tensor d = distance_matrix(Tensor({2, 2}, std::vector<double>{1, 0, 0, 1}));
  CHECK(d[1] == 2.0);
  CHECK(d[2] == 2.0);
  CHECK(d[0] == 0.0);
  const Tensor same = distance_matrix(Tensor({3, 4}, 0.7));
  for (double v : same.data()) CHECK(v == 0.0);
  std::mt19937_64 rng(1);
  const Tensor e = random_tensor({7, 5}, rng);
  const Tensor dm = distance_matrix(e);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(dm[i * 7 + j] - oracle::ssd(e, i, j)) < 1e-10);
}

TEST_CASE("hard mining picks the unique closest negative") {
  // Class 0 at (1,0) and (0.9, 0.1); negatives at various distances.
  const Tensor e({4, 2}, std::vector<double>{1.0, 0.0, 0.9, 0.1, 0.8, 0.3, -1.0, 0.0});
  const std::vector<int> labels = {0, 0, 1, 1};
  const auto set = mine_triplets(e, labels, MiningStrategy::hard, 0.5, 1);
  bool found = false;
  for (const auto& t : set.triplets) {
    if (t.anchor == 0 && t.positive == 1) {
      CHECK(t.negative == 2);
      found = true;
    }
    CHECK(labels[t.anchor] == labels[t.positive]);
    CHECK(labels[t.anchor] != labels[t.negative]);
  }
  CHECK(found);
}

TEST_CASE("semi-hard returns nothing when every negative is beyond the margin") {
  const Tensor e({4, 2}, std::vector<double>{1, 0, 1, 0, -1, 0, -1, 0});
  const auto set = mine_triplets(e, {0, 0, 1, 1}, MiningStrategy::semi_hard, 0.5, 1);
  CHECK(set.triplets.empty());
  CHECK(set.anchor_positive_pairs == 4);
  CHECK(mine_triplets(e, {0, 0, 0, 0}, MiningStrategy::hard, 0.5, 1).single_class);
  CHECK_THROWS_AS(mine_triplets(e, {0, 1, 0}, MiningStrategy::hard, 0.5, 1), ShapeError);
}

TEST_CASE("random strategies are reproducible and stay in the qualifying sets") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t B = 8 + trial % 20;
    const Tensor e = normalize_embeddings(random_tensor({B, 3}, rng)).rows;
    std::vector<int> labels(B);
    for (std::size_t i = 0; i < B; ++i) labels[i] = static_cast<int>(i % (2 + trial % 3));
    for (auto s : {MiningStrategy::semi_hard, MiningStrategy::random_hard}) {
      const auto a = mine_triplets(e, labels, s, 0.5, 99);
      const auto b = mine_triplets(e, labels, s, 0.5, 99);
      CHECK(a.triplets == b.triplets);
      for (const auto& t : a.triplets) {
        const auto bands = oracle::brute_force_negatives(e, labels, t.anchor, t.positive, 0.5);
        const auto& set = s == MiningStrategy::semi_hard ? bands.semi_hard : bands.positive_score;
        CHECK(std::find(set.begin(), set.end(), t.negative) != set.end());
      }
    }
  }
}

TEST_CASE("strategy names round-trip") {
  for (auto s : {MiningStrategy::hard, MiningStrategy::semi_hard, MiningStrategy::random_hard})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS(parse_strategy("easy"));
}
