#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jtanet/losses.hpp"
#include "jtanet/tensor.hpp"

namespace jtanet {

enum class MiningStrategy { hard, semi_hard, random_hard };

MiningStrategy parse_strategy(const std::string& text);
std::string to_string(MiningStrategy strategy);

struct NormalizedEmbeddings {
  Tensor rows;                 // unit-norm rows; zero rows left as zero
  bool had_zero_rows = false;
};

NormalizedEmbeddings normalize_embeddings(const Tensor& embeddings);

/// B x B squared Euclidean distances between rows; exact zeros on the diagonal.
Tensor distance_matrix(const Tensor& embeddings);

struct TripletSet {
  std::vector<Triplet> triplets;
  MiningStrategy strategy = MiningStrategy::hard;
  double margin = 0.0;
  bool single_class = false;  // batch had fewer than two classes; nothing mined
  std::size_t anchor_positive_pairs = 0;
};

// One negative per ordered same-label pair (a, p), a != p, with
// score = d(a,p) - d(a,n) + margin:
//   hard         the negative with the largest score (smallest d(a,n)), lowest
//                index on ties, kept only if score > 0
//   semi_hard    uniform among negatives with 0 < score <= margin
//   random_hard  uniform among negatives with score > 0
// Pairs with no qualifying negative are dropped. `embeddings` are expected to be
// normalized already; distances are computed on them as given.
TripletSet mine_triplets(const Tensor& embeddings, const std::vector<int>& labels, MiningStrategy strategy,
                         double margin, std::uint64_t seed);

/// Mining on a precomputed distance matrix.
TripletSet mine_from_distances(const Tensor& distances, const std::vector<int>& labels, MiningStrategy strategy,
                               double margin, std::uint64_t seed);

}  // namespace jtanet
