#include "jtanet/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace jtanet {
namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t v = 0; v < dim; ++v) {
    const double d = a[v] - b[v];
    acc += d * d;
  }
  return acc;
}

double parse_weight(const std::string& text, const std::string& whole) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v) || v < 0.0) {
    throw std::invalid_argument("bad loss weights '" + whole + "': expected AE:SM:FR with non-negative numbers");
  }
  return v;
}

}  // namespace

LossWeights LossWeights::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3 || text.back() == ':') {
    throw std::invalid_argument("bad loss weights '" + text + "': expected AE:SM:FR");
  }
  LossWeights w;
  w.ae = parse_weight(parts[0], text);
  w.sm = parse_weight(parts[1], text);
  w.fr = parse_weight(parts[2], text);
  return w;
}

std::string LossWeights::to_string() const {
  std::ostringstream os;
  os << ae << ':' << sm << ':' << fr;
  return os.str();
}

void LossWeights::validate() const {
  for (double v : {ae, sm, fr, margin}) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights and margin must be non-negative");
  }
}

HingeMode parse_hinge_mode(const std::string& text) {
  if (text == "per_triplet") return HingeMode::per_triplet;
  if (text == "batch") return HingeMode::batch;
  throw std::invalid_argument("unknown hinge mode '" + text + "' (per_triplet|batch)");
}

std::string to_string(HingeMode mode) { return mode == HingeMode::per_triplet ? "per_triplet" : "batch"; }

LossValue autoencoder_loss(const Tensor& originals, const Tensor& reconstructions) {
  if (originals.shape() != reconstructions.shape()) {
    throw ShapeError("autoencoder_loss: " + shape_to_string(originals.shape()) + " vs " +
                     shape_to_string(reconstructions.shape()));
  }
  if (originals.rank() < 2) throw ShapeError("autoencoder_loss: expected a batch of images");
  const std::size_t batch = originals.dim(0);
  const std::size_t per_image = originals.size() / batch;
  const double inv = 1.0 / static_cast<double>(per_image);
  LossValue out;
  out.grad = Tensor(originals.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * per_image; i < (b + 1) * per_image; ++i) {
      const double d = reconstructions[i] - originals[i];
      acc += d * d;
      out.grad[i] = 2.0 * d * inv;
    }
    out.value += acc * inv;
  }
  return out;
}

SiameseLoss siamese_loss(const Tensor& features, const std::vector<Triplet>& triplets, double margin,
                         HingeMode mode) {
  require_rank(features, 2, "siamese_loss features");
  const std::size_t batch = features.dim(0), dim = features.dim(1);
  SiameseLoss out;
  out.grad = Tensor(features.shape());
  if (triplets.empty()) {
    out.no_triplets = true;
    return out;
  }
  const double* f = features.data().data();
  std::vector<double> scores(triplets.size());
  double d_ap_sum = 0.0, d_an_sum = 0.0;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.anchor >= batch || t.positive >= batch || t.negative >= batch) {
      throw ShapeError("siamese_loss: triplet index outside the batch");
    }
    const double d_ap = squared_distance(f + t.anchor * dim, f + t.positive * dim, dim);
    const double d_an = squared_distance(f + t.anchor * dim, f + t.negative * dim, dim);
    d_ap_sum += d_ap;
    d_an_sum += d_an;
    scores[i] = d_ap - d_an + margin;
  }

  auto add_grad = [&](const Triplet& t) {
    const double* a = f + t.anchor * dim;
    const double* p = f + t.positive * dim;
    const double* n = f + t.negative * dim;
    double* ga = out.grad.data().data() + t.anchor * dim;
    double* gp = out.grad.data().data() + t.positive * dim;
    double* gn = out.grad.data().data() + t.negative * dim;
    for (std::size_t v = 0; v < dim; ++v) {
      ga[v] += 2.0 * (n[v] - p[v]);
      gp[v] += -2.0 * (a[v] - p[v]);
      gn[v] += 2.0 * (a[v] - n[v]);
    }
  };

  if (mode == HingeMode::per_triplet) {
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      if (scores[i] > 0.0) {
        out.value += scores[i];
        add_grad(triplets[i]);
      }
    }
  } else {
    const double s = d_ap_sum - d_an_sum + margin;
    if (s > 0.0) {
      out.value = s;
      for (const auto& t : triplets) add_grad(t);
    }
  }
  return out;
}

double siamese_loss(const Tensor& fa, const Tensor& fp, const Tensor& fn, double margin, HingeMode mode,
                    bool* no_triplets) {
  require_rank(fa, 2, "siamese_loss anchors");
  require_shape(fp, fa.shape(), "siamese_loss positives");
  require_shape(fn, fa.shape(), "siamese_loss negatives");
  const std::size_t nb = fa.dim(0), dim = fa.dim(1);
  if (no_triplets != nullptr) *no_triplets = false;
  double intra = 0.0, inter = 0.0, per_triplet = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    const double d_ap = squared_distance(fa.data().data() + i * dim, fp.data().data() + i * dim, dim);
    const double d_an = squared_distance(fa.data().data() + i * dim, fn.data().data() + i * dim, dim);
    intra += d_ap;
    inter += d_an;
    const double s = d_ap - d_an + margin;
    if (s > 0.0) per_triplet += s;
  }
  if (mode == HingeMode::per_triplet) return per_triplet;
  const double s = intra - inter + margin;
  return s > 0.0 ? s : 0.0;
}

LossValue feature_reg_loss(const Tensor& features) {
  LossValue out;
  out.grad = Tensor(features.shape());
  for (std::size_t i = 0; i < features.size(); ++i) {
    out.value += features[i] * features[i];
    out.grad[i] = 2.0 * features[i];
  }
  return out;
}

LossReport total_loss(double ae, double sm, double fr, std::size_t n_triplets, const LossWeights& weights) {
  LossReport r;
  r.ae = ae;
  r.sm = sm;
  r.fr = fr;
  r.n_triplets = n_triplets;
  r.total = weights.ae * ae;
  r.total += weights.sm * sm;
  r.total += weights.fr * fr;
  return r;
}

}  // namespace jtanet
