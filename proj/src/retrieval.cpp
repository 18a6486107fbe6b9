#include "jtanet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jtanet/checkpoint.hpp"
#include "jtanet/container.hpp"
#include "jtanet/parallel.hpp"

namespace jtanet {
namespace {

constexpr std::size_t kExtractChunk = 64;

}  // namespace

void FeatureDatabase::validate() const {
  require_rank(features, 2, "feature database");
  if (features.dim(0) != labels.size() || labels.size() != ids.size()) {
    throw ShapeError("feature database: features, labels and ids disagree in length");
  }
}

Tensor extract_features(const ModelParams& params, const ModelConfig& config, const Tensor& patches) {
  require_rank(patches, 4, "extract_features");
  const std::size_t n = patches.dim(0);
  const std::size_t per = patches.size() / n;
  const std::size_t dim = config.feature_len();
  Tensor out({n, dim});
  for (std::size_t start = 0; start < n; start += kExtractChunk) {
    const std::size_t count = std::min(kExtractChunk, n - start);
    Shape shape = patches.shape();
    shape[0] = count;
    std::vector<double> chunk(patches.data().begin() + static_cast<std::ptrdiff_t>(start * per),
                              patches.data().begin() + static_cast<std::ptrdiff_t>((start + count) * per));
    const Tensor f = siamcoder_forward(params, config, Tensor(shape, std::move(chunk)));
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
  return out;
}

Tensor extract_features(const ModelParams& params, const ModelConfig& config, const PatchSet& patches) {
  return extract_features(params, config, patches.all());
}

FeatureDatabase build_index(const ModelParams& params, const ModelConfig& config, const PatchSet& reference) {
  FeatureDatabase db;
  db.features = extract_features(params, config, reference);
  db.labels = reference.labels;
  db.ids.resize(reference.size());
  std::iota(db.ids.begin(), db.ids.end(), 0);
  db.embedding_len = config.embedding_len;
  db.fingerprint = params_fingerprint(params);
  return db;
}

RetrievalResult query(const FeatureDatabase& db, std::span<const double> feature, std::size_t delta) {
  db.validate();
  const std::size_t n = db.size(), dim = db.dim();
  if (feature.size() != dim) {
    throw ShapeError("query feature has length " + std::to_string(feature.size()) + ", database has " +
                     std::to_string(dim));
  }
  if (delta < 1 || delta > n) {
    throw ShapeError("delta must be in [1, " + std::to_string(n) + "], got " + std::to_string(delta));
  }
  std::vector<Match> all(n);
  const double* f = db.features.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t z = 0; z < dim; ++z) {
      const double d = feature[z] - f[i * dim + z];
      acc += d * d;
    }
    all[i] = {i, std::sqrt(acc)};
  }
  const auto closer = [](const Match& a, const Match& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(delta), all.end(), closer);
  RetrievalResult r;
  r.ranking.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(delta));
  return r;
}

PrecisionReport mean_precision(const FeatureDatabase& db, const Tensor& query_features,
                               const std::vector<int>& query_labels, std::size_t delta, std::size_t n_classes) {
  require_rank(query_features, 2, "mean_precision queries");
  const std::size_t nq = query_features.dim(0), dim = query_features.dim(1);
  if (query_labels.size() != nq) throw ShapeError("mean_precision: labels and queries disagree in length");
  PrecisionReport rep;
  rep.delta = delta;
  rep.per_query.assign(nq, 0.0);
  parallel_for(nq, [&](std::size_t j) {
    const auto r = query(db, query_features.data().subspan(j * dim, dim), delta);
    std::size_t correct = 0;
    for (const auto& m : r.ranking) {
      if (db.labels[m.index] == query_labels[j]) ++correct;
    }
    rep.per_query[j] = 100.0 * static_cast<double>(correct) / static_cast<double>(delta);
  });
  rep.per_class.assign(n_classes, 0.0);
  rep.class_queries.assign(n_classes, 0);
  double total = 0.0;
  for (std::size_t j = 0; j < nq; ++j) {
    total += rep.per_query[j];
    const auto c = static_cast<std::size_t>(query_labels[j]);
    if (c < n_classes) {
      rep.per_class[c] += rep.per_query[j];
      ++rep.class_queries[c];
    }
  }
  rep.mean = nq == 0 ? 0.0 : total / static_cast<double>(nq);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (rep.class_queries[c] > 0) rep.per_class[c] /= static_cast<double>(rep.class_queries[c]);
  }
  return rep;
}

PrecisionReport mean_precision(const FeatureDatabase& db, const PatchSet& queries, const ModelParams& params,
                               const ModelConfig& config, std::size_t delta, std::size_t n_classes) {
  return mean_precision(db, extract_features(params, config, queries), queries.labels, delta, n_classes);
}

std::vector<std::size_t> default_delta_sweep(std::size_t db_size) {
  std::vector<std::size_t> deltas;
  for (std::size_t d = 5; d <= 100 && d <= db_size; d += 5) deltas.push_back(d);
  return deltas;
}

void save_database(const std::filesystem::path& path, const FeatureDatabase& db) {
  db.validate();
  Container c;
  c.kind = kDatabaseKind;
  c.meta = {{"embedding_len", db.embedding_len}, {"fingerprint", db.fingerprint}};
  c.arrays.push_back(Array::from_tensor("features", db.features));
  c.arrays.push_back(Array::from_ints("labels", std::vector<std::int32_t>(db.labels.begin(), db.labels.end())));
  c.arrays.push_back(Array::from_ints("ids", std::vector<std::int32_t>(db.ids.begin(), db.ids.end())));
  write_container(path, c);
}

FeatureDatabase load_database(const std::filesystem::path& path) {
  const Container c = read_container(path, kDatabaseKind);
  FeatureDatabase db;
  try {
    db.embedding_len = c.meta.at("embedding_len").get<std::size_t>();
    db.fingerprint = c.meta.at("fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad database header: " + e.what());
  }
  db.features = c.array("features").to_tensor();
  const auto& labels = c.array("labels").ints();
  const auto& ids = c.array("ids").ints();
  db.labels.assign(labels.begin(), labels.end());
  db.ids.assign(ids.begin(), ids.end());
  try {
    db.validate();
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return db;
}

}  // namespace jtanet
