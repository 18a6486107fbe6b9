#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jtanet::cli {

struct IngestArgs {
  std::string rcc_root;
  bool synth = false;
  std::size_t synth_per_class = 100;
  std::size_t synth_classes = 4;
  double synth_noise = 0.5;
  double synth_test_fraction = 0.2;
  std::uint64_t seed = 1;
  std::size_t test_size = 2000;
  std::string out;
  std::string manifest;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::size_t el = 1024;
  std::string strategy = "random_hard";
  double margin = 0.5;
  std::string loss_weights = "1:1:1";
  std::string hinge = "per_triplet";
  std::size_t batch = 256;
  std::size_t epochs = 50;
  double lr = 0.001;
  std::uint64_t seed = 0;
  std::string channel_scale = "1";
  std::size_t max_iterations = 0;
  std::string triplet_dump;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::optional<std::size_t> delta;
  bool sweep = false;
};

struct QueryArgs {
  std::string checkpoint;
  std::string db;
  std::string image;
  std::string patches;
  std::string split = "test";
  std::size_t index = 0;
  std::size_t delta = 10;
  std::string out;
  std::string manifest;
};

struct PlotArgs {
  std::string log;
  std::string out;
  bool log_y = false;
};

int run_ingest(const IngestArgs& args);
int run_train(const TrainArgs& args);
int run_eval(const EvalArgs& args);
int run_query(const QueryArgs& args);
int run_plot(const PlotArgs& args);

/// "1/8", "0.125" or "1" -> value in (0, 1].
double parse_scale(const std::string& text);

}  // namespace jtanet::cli
