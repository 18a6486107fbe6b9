#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jtanet/image_io.hpp"
#include "jtanet/tensor.hpp"

namespace jtanet {

inline const std::vector<std::string> kRccClassNames = {"epithelial", "fibroblast", "inflammatory", "others"};
/// Per-class nucleus counts of the full RCC release, in kRccClassNames order.
inline constexpr std::array<std::size_t, 4> kRccClassCounts = {7722, 5712, 6971, 2039};
inline constexpr std::size_t kRccTestSize = 2000;

/// Labeled square RGB patches in [-1, 1], stored contiguously as N x 3 x side x side.
struct PatchSet {
  std::size_t side = 64;
  std::vector<double> pixels;
  std::vector<int> labels;
  std::vector<int> source_ids;   // image the patch was cut from (-1 when synthetic)
  std::vector<double> centers;   // x, y per patch

  std::size_t size() const { return labels.size(); }
  std::size_t patch_len() const { return 3 * side * side; }
  std::span<const double> patch(std::size_t i) const;

  void append(std::span<const double> patch, int label, int source_id, double cx, double cy);
  /// [indices.size(), 3, side, side] tensor of the chosen patches.
  Tensor gather(std::span<const std::size_t> indices) const;
  Tensor all() const;

  bool operator==(const PatchSet&) const = default;
};

struct DatasetSplit {
  PatchSet train;
  PatchSet test;
  std::vector<std::string> class_names;
  std::uint64_t split_seed = 0;

  bool operator==(const DatasetSplit&) const = default;
};

struct SynthOptions {
  std::size_t n_per_class = 100;
  std::size_t n_classes = 4;
  double noise_sigma = 0.5;
  std::uint64_t seed = 1;
  std::size_t side = 64;
  /// Amplitude of the class texture relative to the mid-grey base.
  double texture_amplitude = 0.2;
  double test_fraction = 0.2;
};

// Each class is an oriented sinusoidal grating with its own orientation,
// frequency, phase and colour tint; every patch is its class prototype plus iid
// Gaussian pixel noise, clamped to [-1, 1]. Per class, round(n * (1 - f)) go to
// train and the rest to test.
DatasetSplit synth_dataset(const SynthOptions& options);

struct IngestOptions {
  std::size_t crop = 32;
  std::size_t side = 64;
  std::size_t test_size = kRccTestSize;
  /// How far (pixels) an annotation may sit outside the image before it is rejected.
  double coordinate_tolerance = 2.0;
};

struct IngestResult {
  DatasetSplit split;
  std::vector<std::size_t> class_counts;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> images;
};

// Reads every .bmp/.png under `root` (sorted by path) together with a sidecar
// annotation CSV of the same stem ("img1.bmp" -> "img1.csv"). Each CSV row is
// "x,y,label" with 0-based pixel coordinates (x = column) and label either a
// class name or 0..3; a header line is optional. Crops a `crop`-square window
// centred on each nucleus (clamped inside the image), resizes it bilinearly to
// `side`, maps [0,255] to [-1,1] and makes a stratified split by `split_seed`.
IngestResult ingest_rcc(const std::filesystem::path& root, std::uint64_t split_seed, const IngestOptions& options = {});

/// Cuts one patch out of an image (same processing as ingest_rcc).
std::vector<double> extract_patch(const RgbImage& image, double cx, double cy, std::size_t crop, std::size_t side);
/// Whole image resized to side x side and mapped to [-1, 1].
std::vector<double> image_to_patch(const RgbImage& image, std::size_t side);

/// Per-class test counts for a stratified split: proportional, largest remainder.
std::vector<std::size_t> stratified_quota(const std::vector<std::size_t>& class_counts, std::size_t test_size);

inline constexpr const char* kPatchKind = "jtanet-patches";

// Container kind "jtanet-patches": meta holds side, class names, split seed and
// counts; arrays "<split>.labels" (i32), "<split>.source" (i32),
// "<split>.centers" (f64, N x 2), "<split>.pixels" (f64, N x 3 x side x side).
void export_patches(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit import_patches(const std::filesystem::path& path);

}  // namespace jtanet
