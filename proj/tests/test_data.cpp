#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "jtanet/checkpoint.hpp"
#include "jtanet/container.hpp"
#include "jtanet/dataset.hpp"

using namespace jtanet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("jtanet_test_" + name);
  fs::remove_all(p);
  return p;
}

RgbImage gradient_image(std::size_t w, std::size_t h) {
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(w * h * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      img.pixels[(y * w + x) * 3 + 0] = static_cast<std::uint8_t>((x * 5) % 256);
      img.pixels[(y * w + x) * 3 + 1] = static_cast<std::uint8_t>((y * 7) % 256);
      img.pixels[(y * w + x) * 3 + 2] = static_cast<std::uint8_t>((x + y) % 256);
    }
  return img;
}

RgbImage sub_image(const RgbImage& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  RgbImage out;
  out.width = w;
  out.height = h;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.pixels.push_back(img.at(x0 + x, y0 + y, c));
  return out;
}

}  // namespace

TEST_CASE("synthetic split arithmetic and determinism") {
  SynthOptions o;
  o.n_per_class = 100;
  o.n_classes = 4;
  const auto s = synth_dataset(o);
  CHECK(s.train.size() == 320);
  CHECK(s.test.size() == 80);
  CHECK(s.train.side == 64);
  CHECK(std::all_of(s.train.pixels.begin(), s.train.pixels.end(), [](double v) { return v >= -1.0 && v <= 1.0; }));
  CHECK(synth_dataset(o) == s);
  SynthOptions o2 = o;
  o2.seed = 2;
  CHECK(!(synth_dataset(o2) == s));

  SynthOptions clean = o;
  clean.n_per_class = 6;
  clean.noise_sigma = 0.0;
  const auto c = synth_dataset(clean);
  for (std::size_t i = 0; i < c.train.size(); ++i)
    for (std::size_t j = 0; j < c.train.size(); ++j) {
      const auto a = c.train.patch(i), b = c.train.patch(j);
      const bool same = std::equal(a.begin(), a.end(), b.begin());
      CHECK(same == (c.train.labels[i] == c.train.labels[j]));
    }
}

TEST_CASE("patch container round-trip, truncation and class names") {
  SynthOptions o;
  o.n_per_class = 5;
  const auto s = synth_dataset(o);
  const fs::path dir = scratch("patches");
  fs::create_directories(dir);
  const fs::path p = dir / "synth.bin";
  export_patches(s, p);
  const auto back = import_patches(p);
  CHECK(back == s);
  CHECK(back.class_names == s.class_names);

  fs::resize_file(p, fs::file_size(p) - 100);
  CHECK_THROWS_AS(import_patches(p), FormatError);
  fs::resize_file(p, 10);
  CHECK_THROWS_AS(import_patches(p), FormatError);
  CHECK_THROWS_AS(import_patches(dir / "missing.bin"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("stratified quota is proportional within one per class") {
  const std::vector<std::size_t> counts(kRccClassCounts.begin(), kRccClassCounts.end());
  const auto q = stratified_quota(counts, kRccTestSize);
  std::size_t total = 0, all = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    total += q[c];
    all += counts[c];
  }
  CHECK(all == 22444);
  CHECK(total == 2000);
  for (std::size_t c = 0; c < 4; ++c) {
    const double exact = 2000.0 * static_cast<double>(counts[c]) / 22444.0;
    CHECK(std::abs(static_cast<double>(q[c]) - exact) < 1.0);
  }
  CHECK_THROWS(stratified_quota({3, 4}, 8));
}

TEST_CASE("patch extraction clamps the crop window at image borders") {
  const RgbImage img = gradient_image(48, 40);
  const auto corner = extract_patch(img, 5, 5, 32, 64);
  CHECK(corner.size() == 3 * 64 * 64);
  CHECK(corner == image_to_patch(sub_image(img, 0, 0, 32, 32), 64));
  CHECK(extract_patch(img, 46, 39, 32, 64) == image_to_patch(sub_image(img, 16, 8, 32, 32), 64));
  CHECK(extract_patch(img, 20, 18, 32, 64) == image_to_patch(sub_image(img, 4, 2, 32, 32), 64));

  // A flat image maps 0 -> -1 and 255 -> 1.
  RgbImage flat;
  flat.width = flat.height = 32;
  flat.pixels.assign(32 * 32 * 3, 255);
  const auto white = image_to_patch(flat, 64);
  CHECK(std::all_of(white.begin(), white.end(), [](double v) { return v == 1.0; }));
  flat.pixels.assign(32 * 32 * 3, 0);
  const auto black = image_to_patch(flat, 64);
  CHECK(std::all_of(black.begin(), black.end(), [](double v) { return v == -1.0; }));
}

TEST_CASE("RCC-style ingestion from images and annotation CSVs") {
  const fs::path root = scratch("rcc");
  fs::create_directories(root / "img2");
  write_bmp(root / "img1.bmp", gradient_image(40, 36));
  write_bmp(root / "img2" / "img2.bmp", gradient_image(50, 45));
  {
    std::ofstream a(root / "img1.csv");
    a << "x,y,label\n5,5,epithelial\n20,20,fibroblast\n39,35,2\n";
    std::ofstream b(root / "img2" / "img2.csv");
    b << "10,10,others\n25.5,30.25,inflammatory\n40,40,0\n";
  }
  IngestOptions o;
  o.test_size = 2;
  const auto r = ingest_rcc(root, 7, o);
  CHECK(r.images.size() == 2);
  CHECK(r.split.train.size() + r.split.test.size() == 6);
  CHECK(r.split.test.size() == 2);
  CHECK(r.class_counts == std::vector<std::size_t>{2, 1, 2, 1});
  CHECK(r.warnings.size() >= 4);
  CHECK(r.split.class_names == kRccClassNames);
  CHECK(ingest_rcc(root, 7, o).split == r.split);

  // Whichever split it landed in, the (5,5) nucleus is a clamped 32x32 crop.
  const auto expected = image_to_patch(sub_image(read_image(root / "img1.bmp"), 0, 0, 32, 32), 64);
  bool seen = false;
  for (const PatchSet* set : {&r.split.train, &r.split.test})
    for (std::size_t i = 0; i < set->size(); ++i)
      if (set->source_ids[i] == 0 && set->centers[2 * i] == 5.0 && set->centers[2 * i + 1] == 5.0) {
        const auto p = set->patch(i);
        CHECK(std::vector<double>(p.begin(), p.end()) == expected);
        CHECK(set->labels[i] == 0);
        seen = true;
      }
  CHECK(seen);

  {
    std::ofstream bad(root / "img1.csv");
    bad << "100,5,epithelial\n";
  }
  CHECK_THROWS_AS(ingest_rcc(root, 7, o), FormatError);
  {
    std::ofstream bad(root / "img1.csv");
    bad << "5,5,mitotic\n";
  }
  CHECK_THROWS_AS(ingest_rcc(root, 7, o), FormatError);
  fs::remove(root / "img1.csv");
  CHECK_THROWS_AS(ingest_rcc(root, 7, o), IoError);
  CHECK_THROWS_AS(ingest_rcc(root / "nope", 7, o), IoError);
  fs::remove_all(root);
}

TEST_CASE("BMP write/read round-trip") {
  const fs::path dir = scratch("bmp");
  fs::create_directories(dir);
  const RgbImage img = gradient_image(13, 7);
  write_bmp(dir / "a.bmp", img);
  const RgbImage back = read_image(dir / "a.bmp");
  CHECK(back.width == 13);
  CHECK(back.height == 7);
  CHECK(back.pixels == img.pixels);
  {
    std::ofstream junk(dir / "b.bmp");
    junk << "not an image";
  }
  CHECK_THROWS_AS(read_image(dir / "b.bmp"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("container round-trip and validation") {
  const fs::path dir = scratch("container");
  fs::create_directories(dir);
  Container c;
  c.kind = "test-kind";
  c.meta = {{"answer", 42}};
  c.arrays.push_back(Array::from_tensor("x", Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, -0.0})));
  c.arrays.push_back(Array::from_ints("y", {7, -8}));
  write_container(dir / "c.bin", c);
  const Container back = read_container(dir / "c.bin", "test-kind");
  CHECK(back.meta["answer"] == 42);
  CHECK(back.array("x").to_tensor() == c.arrays[0].to_tensor());
  CHECK(back.array("y").ints() == std::vector<std::int32_t>{7, -8});
  CHECK_THROWS_AS(read_container(dir / "c.bin", "other-kind"), FormatError);
  CHECK_THROWS_AS(back.array("z"), FormatError);
  CHECK(file_hash(dir / "c.bin").size() == 16);
  CHECK(fnv1a_hex("", 0) == "cbf29ce484222325");
  fs::resize_file(dir / "c.bin", fs::file_size(dir / "c.bin") - 1);
  CHECK_THROWS_AS(read_container(dir / "c.bin"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint round-trip") {
  const fs::path dir = scratch("ckpt");
  fs::create_directories(dir);
  Checkpoint ck;
  ck.config.embedding_len = 5;
  ck.config.channel_scale = 1.0 / 32.0;
  ck.params = init_params(ck.config, 3);
  ck.adam = AdamState::for_params(ck.params, 0.002);
  ck.adam->step = 9;
  ck.adam->first_moment.entries()[0].value.fill(0.25);
  ck.seed = 3;
  ck.weights = LossWeights::parse("1:5:1");
  save_checkpoint(dir / "m.ckpt", ck);
  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.config == ck.config);
  CHECK(back.params == ck.params);
  REQUIRE(back.adam.has_value());
  CHECK(*back.adam == *ck.adam);
  CHECK(back.seed == 3);
  CHECK(back.weights.sm == 5.0);
  CHECK(params_fingerprint(back.params) == params_fingerprint(ck.params));

  Container c = read_container(dir / "m.ckpt");
  c.meta["config"]["embedding_len"] = 6;
  write_container(dir / "bad.ckpt", c);
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), FormatError);
  fs::remove_all(dir);
}
