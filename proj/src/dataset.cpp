#include "jtanet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "jtanet/container.hpp"
#include "jtanet/layers.hpp"

namespace jtanet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_label(const std::string& text, const std::filesystem::path& file, std::size_t line) {
  for (std::size_t i = 0; i < kRccClassNames.size(); ++i) {
    if (text == kRccClassNames[i]) return static_cast<int>(i);
  }
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '3') return text[0] - '0';
  throw FormatError(file.string() + ":" + std::to_string(line) + ": unknown label '" + text + "'");
}

struct Annotation {
  double x;
  double y;
  int label;
};

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing annotation file " + path.string());
  std::vector<Annotation> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected x,y,label");
    }
    if (line_no == 1 && cells[0] == "x") continue;
    try {
      rows.push_back({std::stod(cells[0]), std::stod(cells[1]), parse_label(cells[2], path, line_no)});
    } catch (const std::invalid_argument&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad coordinate");
    }
  }
  return rows;
}

Tensor image_region(const RgbImage& image, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  Tensor t({1, 3, h, w});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        t.at(0, c, y, x) = static_cast<double>(image.at(x0 + x, y0 + y, c)) / 127.5 - 1.0;
      }
    }
  }
  return t;
}

std::vector<double> to_patch(const Tensor& region, std::size_t side) {
  Tensor resized = ops::resize_bilinear(region, side, side);
  for (double& v : resized.storage()) v = std::clamp(v, -1.0, 1.0);
  return std::move(resized.storage());
}

Array pixel_array(const std::string& name, const PatchSet& set) {
  return Array{name, {set.size(), 3, set.side, set.side}, set.pixels};
}

Array int_array(const std::string& name, const std::vector<int>& v) {
  return Array::from_ints(name, std::vector<std::int32_t>(v.begin(), v.end()));
}

PatchSet read_split(const Container& c, const std::string& prefix, std::size_t side) {
  PatchSet set;
  set.side = side;
  const auto& labels = c.array(prefix + ".labels").ints();
  const auto& source = c.array(prefix + ".source").ints();
  const Array& centers = c.array(prefix + ".centers");
  const Array& pixels = c.array(prefix + ".pixels");
  const auto* center_values = std::get_if<std::vector<double>>(&centers.values);
  const auto* pixel_values = std::get_if<std::vector<double>>(&pixels.values);
  if (center_values == nullptr || pixel_values == nullptr) throw FormatError("patch container: wrong dtype");
  const std::size_t n = labels.size();
  if (source.size() != n || center_values->size() != 2 * n || pixel_values->size() != n * 3 * side * side) {
    throw FormatError("patch container: inconsistent array sizes in split " + prefix);
  }
  set.labels.assign(labels.begin(), labels.end());
  set.source_ids.assign(source.begin(), source.end());
  set.centers = *center_values;
  set.pixels = *pixel_values;
  return set;
}

}  // namespace

std::span<const double> PatchSet::patch(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("patch index " + std::to_string(i) + " out of range");
  return std::span<const double>(pixels).subspan(i * patch_len(), patch_len());
}

void PatchSet::append(std::span<const double> patch, int label, int source_id, double cx, double cy) {
  if (patch.size() != patch_len()) throw ShapeError("patch has wrong size for side " + std::to_string(side));
  pixels.insert(pixels.end(), patch.begin(), patch.end());
  labels.push_back(label);
  source_ids.push_back(source_id);
  centers.push_back(cx);
  centers.push_back(cy);
}

Tensor PatchSet::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ShapeError("gather needs at least one index");
  Tensor t({indices.size(), 3, side, side});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto p = patch(indices[k]);
    std::copy(p.begin(), p.end(), t.data().begin() + static_cast<std::ptrdiff_t>(k * patch_len()));
  }
  return t;
}

Tensor PatchSet::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather(idx);
}

DatasetSplit synth_dataset(const SynthOptions& o) {
  if (o.n_classes < 2 || o.n_per_class == 0 || o.side == 0 || o.noise_sigma < 0.0) {
    throw std::invalid_argument("synth_dataset: need >= 2 classes, >= 1 patch per class, sigma >= 0");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  DatasetSplit split;
  split.split_seed = o.seed;
  split.train.side = split.test.side = o.side;
  for (std::size_t k = 0; k < o.n_classes; ++k) split.class_names.push_back("class" + std::to_string(k));

  const std::size_t plane = o.side * o.side;
  const double s = static_cast<double>(o.side);
  std::vector<double> patch(3 * plane);
  for (std::size_t k = 0; k < o.n_classes; ++k) {
    const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(o.n_classes);
    const double freq = 3.0 + static_cast<double>(k % 3);
    const double phase = phase_dist(rng);
    std::vector<double> prototype(3 * plane);
    for (std::size_t c = 0; c < 3; ++c) {
      const double hue = 2.0 * std::numbers::pi * (static_cast<double>(k) / static_cast<double>(o.n_classes) +
                                                    static_cast<double>(c) / 3.0);
      const double base = 0.1 * std::cos(hue);
      const double tint = 0.5 + 0.5 * std::cos(hue);
      for (std::size_t y = 0; y < o.side; ++y) {
        for (std::size_t x = 0; x < o.side; ++x) {
          const double u = static_cast<double>(x) * std::cos(angle) + static_cast<double>(y) * std::sin(angle);
          prototype[c * plane + y * o.side + x] =
              base + o.texture_amplitude * tint * std::sin(2.0 * std::numbers::pi * freq * u / s + phase);
        }
      }
    }
    const auto n_train =
        static_cast<std::size_t>(std::llround(static_cast<double>(o.n_per_class) * (1.0 - o.test_fraction)));
    for (std::size_t i = 0; i < o.n_per_class; ++i) {
      for (std::size_t j = 0; j < patch.size(); ++j) {
        patch[j] = std::clamp(prototype[j] + o.noise_sigma * noise(rng), -1.0, 1.0);
      }
      PatchSet& target = i < n_train ? split.train : split.test;
      target.append(patch, static_cast<int>(k), -1, 0.0, 0.0);
    }
  }
  return split;
}

std::vector<double> extract_patch(const RgbImage& image, double cx, double cy, std::size_t crop, std::size_t side) {
  if (image.width < crop || image.height < crop) {
    throw ShapeError("image smaller than the " + std::to_string(crop) + " pixel crop");
  }
  const long half = static_cast<long>(crop / 2);
  const long max_x = static_cast<long>(image.width - crop);
  const long max_y = static_cast<long>(image.height - crop);
  const long x0 = std::clamp(std::lround(cx) - half, 0L, max_x);
  const long y0 = std::clamp(std::lround(cy) - half, 0L, max_y);
  return to_patch(image_region(image, static_cast<std::size_t>(x0), static_cast<std::size_t>(y0), crop, crop),
                  side);
}

std::vector<double> image_to_patch(const RgbImage& image, std::size_t side) {
  return to_patch(image_region(image, 0, 0, image.width, image.height), side);
}

std::vector<std::size_t> stratified_quota(const std::vector<std::size_t>& class_counts, std::size_t test_size) {
  std::size_t total = 0;
  for (auto n : class_counts) total += n;
  if (test_size > total) throw std::invalid_argument("test size exceeds dataset size");
  std::vector<std::size_t> quota(class_counts.size(), 0);
  if (total == 0) return quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    const double exact = static_cast<double>(test_size) * static_cast<double>(class_counts[c]) /
                         static_cast<double>(total);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < test_size; ++i, ++assigned) ++quota[remainders[i].second];
  return quota;
}

IngestResult ingest_rcc(const std::filesystem::path& root, std::uint64_t split_seed, const IngestOptions& o) {
  if (!std::filesystem::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  IngestResult result;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".bmp" || ext == ".png") result.images.push_back(entry.path());
  }
  std::sort(result.images.begin(), result.images.end());
  if (result.images.empty()) throw IoError("no .bmp/.png images under " + root.string());

  // All patches in (image, annotation row) order before splitting.
  PatchSet everything;
  everything.side = o.side;
  for (std::size_t id = 0; id < result.images.size(); ++id) {
    const auto& image_path = result.images[id];
    auto csv = image_path;
    csv.replace_extension(".csv");
    const auto rows = read_annotations(csv);
    const RgbImage image = read_image(image_path);
    const double tol = o.coordinate_tolerance;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& a = rows[r];
      if (a.x < -tol || a.y < -tol || a.x > static_cast<double>(image.width) - 1.0 + tol ||
          a.y > static_cast<double>(image.height) - 1.0 + tol) {
        throw FormatError(csv.string() + ": nucleus " + std::to_string(r) + " at (" + std::to_string(a.x) + ", " +
                          std::to_string(a.y) + ") lies outside the image");
      }
      everything.append(extract_patch(image, a.x, a.y, o.crop, o.side), a.label, static_cast<int>(id), a.x, a.y);
    }
  }

  result.class_counts.assign(kRccClassNames.size(), 0);
  for (int label : everything.labels) ++result.class_counts[static_cast<std::size_t>(label)];
  for (std::size_t c = 0; c < kRccClassNames.size(); ++c) {
    if (result.class_counts[c] != kRccClassCounts[c]) {
      result.warnings.push_back("class " + kRccClassNames[c] + " has " + std::to_string(result.class_counts[c]) +
                                " patches, full release has " + std::to_string(kRccClassCounts[c]));
    }
  }
  const std::size_t test_size = std::min(o.test_size, everything.size());
  if (test_size != o.test_size) {
    result.warnings.push_back("only " + std::to_string(everything.size()) + " patches; test split reduced to " +
                              std::to_string(test_size));
  }

  const auto quota = stratified_quota(result.class_counts, test_size);
  std::mt19937_64 rng(split_seed);
  std::vector<bool> in_test(everything.size(), false);
  for (std::size_t c = 0; c < quota.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < everything.size(); ++i) {
      if (everything.labels[i] == static_cast<int>(c)) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < quota[c]; ++k) in_test[members[k]] = true;
  }

  DatasetSplit& split = result.split;
  split.class_names = kRccClassNames;
  split.split_seed = split_seed;
  split.train.side = split.test.side = o.side;
  for (std::size_t i = 0; i < everything.size(); ++i) {
    PatchSet& target = in_test[i] ? split.test : split.train;
    target.append(everything.patch(i), everything.labels[i], everything.source_ids[i], everything.centers[2 * i],
                  everything.centers[2 * i + 1]);
  }
  return result;
}

void export_patches(const DatasetSplit& split, const std::filesystem::path& path) {
  Container c;
  c.kind = kPatchKind;
  c.meta = {{"side", split.train.side},
            {"class_names", split.class_names},
            {"split_seed", split.split_seed},
            {"train_count", split.train.size()},
            {"test_count", split.test.size()}};
  for (const auto& [name, set] : {std::pair<std::string, const PatchSet*>{"train", &split.train},
                                  std::pair<std::string, const PatchSet*>{"test", &split.test}}) {
    c.arrays.push_back(int_array(name + ".labels", set->labels));
    c.arrays.push_back(int_array(name + ".source", set->source_ids));
    c.arrays.push_back(Array{name + ".centers", {set->size(), 2}, set->centers});
    c.arrays.push_back(pixel_array(name + ".pixels", *set));
  }
  write_container(path, c);
}

DatasetSplit import_patches(const std::filesystem::path& path) {
  const Container c = read_container(path, kPatchKind);
  DatasetSplit split;
  try {
    const auto side = c.meta.at("side").get<std::size_t>();
    split.class_names = c.meta.at("class_names").get<std::vector<std::string>>();
    split.split_seed = c.meta.at("split_seed").get<std::uint64_t>();
    split.train = read_split(c, "train", side);
    split.test = read_split(c, "test", side);
    if (split.train.size() != c.meta.at("train_count").get<std::size_t>() ||
        split.test.size() != c.meta.at("test_count").get<std::size_t>()) {
      throw FormatError(path.string() + ": header counts disagree with payload");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad patch header: " + e.what());
  }
  for (const PatchSet* set : {&split.train, &split.test}) {
    for (int label : set->labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= split.class_names.size()) {
        throw FormatError(path.string() + ": label out of range");
      }
    }
  }
  return split;
}

}  // namespace jtanet
