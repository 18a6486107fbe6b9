#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jtanet/dataset.hpp"
#include "jtanet/model.hpp"
#include "jtanet/tensor.hpp"

namespace jtanet {

/// Encoder features of a reference patch set; the retrieval index.
struct FeatureDatabase {
  Tensor features;  // [N, dim]
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
  std::size_t embedding_len = 0;
  std::string fingerprint;  // params_fingerprint of the encoder that built it

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.dim(1); }
  void validate() const;

  bool operator==(const FeatureDatabase&) const = default;
};

struct Match {
  std::size_t index;
  double distance;
};

struct RetrievalResult {
  std::int64_t query_id = -1;
  std::optional<int> query_label;
  std::vector<Match> ranking;  // non-decreasing distance
};

struct PrecisionReport {
  std::size_t delta = 0;
  double mean = 0.0;                     // Pr
  std::vector<double> per_query;         // Pr_j
  std::vector<double> per_class;         // mean Pr_j over queries of each class
  std::vector<std::size_t> class_queries;
};

/// Eval-mode encoder features in fixed-size chunks; each row depends only on its patch.
Tensor extract_features(const ModelParams& params, const ModelConfig& config, const Tensor& patches);
Tensor extract_features(const ModelParams& params, const ModelConfig& config, const PatchSet& patches);

FeatureDatabase build_index(const ModelParams& params, const ModelConfig& config, const PatchSet& reference);

/// The `delta` entries nearest to `feature` by Euclidean distance; ties go to
/// the lower database index. Throws ShapeError on dim mismatch or bad delta.
RetrievalResult query(const FeatureDatabase& db, std::span<const double> feature, std::size_t delta);

// Pr_j = 100 * (#retrieved with the query's label) / delta, Pr = mean over
// queries. Query rows are evaluated independently and reduced in query order.
PrecisionReport mean_precision(const FeatureDatabase& db, const Tensor& query_features,
                               const std::vector<int>& query_labels, std::size_t delta, std::size_t n_classes);
PrecisionReport mean_precision(const FeatureDatabase& db, const PatchSet& queries, const ModelParams& params,
                               const ModelConfig& config, std::size_t delta, std::size_t n_classes);

/// delta = 5, 10, ..., 100 (capped at the database size).
std::vector<std::size_t> default_delta_sweep(std::size_t db_size);

inline constexpr const char* kDatabaseKind = "jtanet-database";

// Container kind "jtanet-database": meta {embedding_len, fingerprint}; arrays
// "features" (f64, N x dim), "labels" (i32), "ids" (i32).
void save_database(const std::filesystem::path& path, const FeatureDatabase& db);
FeatureDatabase load_database(const std::filesystem::path& path);

}  // namespace jtanet
