#include "jtanet/mining.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace jtanet {

MiningStrategy parse_strategy(const std::string& text) {
  if (text == "hard") return MiningStrategy::hard;
  if (text == "semi_hard") return MiningStrategy::semi_hard;
  if (text == "random_hard") return MiningStrategy::random_hard;
  throw std::invalid_argument("unknown strategy '" + text + "' (hard|semi_hard|random_hard)");
}

std::string to_string(MiningStrategy strategy) {
  switch (strategy) {
    case MiningStrategy::hard:
      return "hard";
    case MiningStrategy::semi_hard:
      return "semi_hard";
    case MiningStrategy::random_hard:
      return "random_hard";
  }
  return "unknown";
}

NormalizedEmbeddings normalize_embeddings(const Tensor& embeddings) {
  require_rank(embeddings, 2, "normalize_embeddings");
  const std::size_t batch = embeddings.dim(0), dim = embeddings.dim(1);
  NormalizedEmbeddings out{embeddings, false};
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = out.rows.data().data() + b * dim;
    double sq = 0.0;
    for (std::size_t v = 0; v < dim; ++v) sq += row[v] * row[v];
    if (sq == 0.0) {
      out.had_zero_rows = true;
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t v = 0; v < dim; ++v) row[v] *= inv;
  }
  return out;
}

Tensor distance_matrix(const Tensor& embeddings) {
  require_rank(embeddings, 2, "distance_matrix");
  const std::size_t batch = embeddings.dim(0), dim = embeddings.dim(1);
  Tensor d({batch, batch});
  const double* e = embeddings.data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = i + 1; j < batch; ++j) {
      double acc = 0.0;
      for (std::size_t v = 0; v < dim; ++v) {
        const double diff = e[i * dim + v] - e[j * dim + v];
        acc += diff * diff;
      }
      d[i * batch + j] = acc;
      d[j * batch + i] = acc;
    }
  }
  return d;
}

TripletSet mine_from_distances(const Tensor& distances, const std::vector<int>& labels, MiningStrategy strategy,
                               double margin, std::uint64_t seed) {
  require_rank(distances, 2, "mine_triplets distances");
  const std::size_t batch = distances.dim(0);
  if (distances.dim(1) != batch || labels.size() != batch) {
    throw ShapeError("mine_triplets: distance matrix and labels disagree on batch size");
  }
  TripletSet out;
  out.strategy = strategy;
  out.margin = margin;
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    out.single_class = true;
    return out;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> candidates;
  candidates.reserve(batch);
  for (std::size_t a = 0; a < batch; ++a) {
    const double* row = distances.data().data() + a * batch;
    for (std::size_t p = 0; p < batch; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      ++out.anchor_positive_pairs;
      const double d_ap = row[p];
      if (strategy == MiningStrategy::hard) {
        std::size_t best = batch;
        for (std::size_t n = 0; n < batch; ++n) {
          if (labels[n] == labels[a]) continue;
          if (best == batch || row[n] < row[best]) best = n;
        }
        if (best != batch && d_ap - row[best] + margin > 0.0) out.triplets.push_back({a, p, best});
        continue;
      }
      candidates.clear();
      for (std::size_t n = 0; n < batch; ++n) {
        if (labels[n] == labels[a]) continue;
        const double score = d_ap - row[n] + margin;
        const bool ok = strategy == MiningStrategy::semi_hard ? (score > 0.0 && score <= margin) : score > 0.0;
        if (ok) candidates.push_back(n);
      }
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      out.triplets.push_back({a, p, candidates[pick(rng)]});
    }
  }
  return out;
}

TripletSet mine_triplets(const Tensor& embeddings, const std::vector<int>& labels, MiningStrategy strategy,
                         double margin, std::uint64_t seed) {
  return mine_from_distances(distance_matrix(embeddings), labels, strategy, margin, seed);
}

}  // namespace jtanet
