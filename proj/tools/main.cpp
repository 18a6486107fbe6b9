#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "jtanet/container.hpp"
#include "jtanet/parallel.hpp"
#include "jtanet/tensor.hpp"

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kValidation = 2, kIo = 3, kNumeric = 4 };

}  // namespace

int main(int argc, char** argv) {
  using namespace jtanet::cli;
  jtanet::configure_allocator();

  CLI::App app{"jtanet: joint triplet autoencoder for nucleus patch retrieval"};
  app.require_subcommand(1);

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Build a patch container from an RCC-style directory or synthetic data");
  ingest->add_option("--rcc", ia.rcc_root, "Root with .bmp/.png images and same-stem .csv annotations");
  ingest->add_flag("--synth", ia.synth, "Generate the synthetic grating dataset instead");
  ingest->add_option("--synth-per-class", ia.synth_per_class, "Synthetic patches per class")->capture_default_str();
  ingest->add_option("--synth-classes", ia.synth_classes, "Synthetic class count")->capture_default_str();
  ingest->add_option("--synth-noise", ia.synth_noise, "Synthetic pixel noise sigma")->capture_default_str();
  ingest->add_option("--synth-test-fraction", ia.synth_test_fraction, "Synthetic test fraction")->capture_default_str();
  ingest->add_option("--test-size", ia.test_size, "RCC stratified test size")->capture_default_str();
  ingest->add_option("--seed", ia.seed, "Split / generation seed")->capture_default_str();
  ingest->add_option("--out", ia.out, "Output patch container")->required();
  ingest->add_option("--manifest", ia.manifest, "Manifest path (default OUT.manifest.json)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the encoder/decoder jointly");
  tr->add_option("--data", ta.data, "Patch container")->required();
  tr->add_option("--out", ta.out, "Output directory")->required();
  tr->add_option("--el", ta.el, "Embedding length")->capture_default_str();
  tr->add_option("--strategy", ta.strategy, "hard | semi_hard | random_hard")->capture_default_str();
  tr->add_option("--margin", ta.margin, "Triplet margin")->capture_default_str();
  tr->add_option("--loss-weights", ta.loss_weights, "AE:SM:FR weights")->capture_default_str();
  tr->add_option("--hinge", ta.hinge, "per_triplet | batch")->capture_default_str();
  tr->add_option("--batch", ta.batch, "Batch size")->capture_default_str();
  tr->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str();
  tr->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--seed", ta.seed, "Run seed")->capture_default_str();
  tr->add_option("--channel-scale", ta.channel_scale, "Width multiplier, e.g. 1/8")->capture_default_str();
  tr->add_option("--max-iterations", ta.max_iterations, "Stop early (0 = all epochs)")->capture_default_str();
  tr->add_option("--triplet-dump", ta.triplet_dump, "CSV of every mined triplet");
  tr->add_flag("--quiet", ta.quiet, "No progress on stderr");

  EvalArgs ea;
  std::size_t eval_delta = 0;
  auto* ev = app.add_subcommand("eval", "Index the train split and score test queries");
  ev->add_option("--checkpoint", ea.checkpoint, "Trained checkpoint")->required();
  ev->add_option("--data", ea.data, "Patch container")->required();
  ev->add_option("--out", ea.out, "Output directory")->required();
  auto* delta_opt = ev->add_option("--delta", eval_delta, "Single delta");
  auto* sweep_opt = ev->add_flag("--delta-sweep", ea.sweep, "delta = 5, 10, ..., 100 (default)");
  delta_opt->excludes(sweep_opt);

  QueryArgs qa;
  auto* qu = app.add_subcommand("query", "Rank database patches by distance to one query");
  qu->add_option("--checkpoint", qa.checkpoint, "Checkpoint that built the database")->required();
  qu->add_option("--db", qa.db, "Feature database")->required();
  qu->add_option("--image", qa.image, "Query image (.bmp/.png), resized to the input side");
  qu->add_option("--patches", qa.patches, "Patch container holding the query");
  qu->add_option("--split", qa.split, "train | test")->capture_default_str();
  qu->add_option("--index", qa.index, "Query index within the split")->capture_default_str();
  qu->add_option("--delta", qa.delta, "Number of results")->capture_default_str();
  qu->add_option("--out", qa.out, "Also write the ranking CSV here");
  qu->add_option("--manifest", qa.manifest, "Manifest path");

  PlotArgs pa;
  auto* pl = app.add_subcommand("plot", "Loss curves of a training log as SVG");
  pl->add_option("--log", pa.log, "train_log.csv")->required();
  pl->add_option("--out", pa.out, "Output SVG")->required();
  pl->add_flag("--log-y", pa.log_y, "Logarithmic loss axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*ingest) return run_ingest(ia);
    if (*tr) return run_train(ta);
    if (*ev) {
      if (*delta_opt) ea.delta = eval_delta;
      return run_eval(ea);
    }
    if (*qu) return run_query(qa);
    if (*pl) return run_plot(pa);
  } catch (const jtanet::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const jtanet::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const jtanet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
