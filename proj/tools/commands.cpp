#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "jtanet/checkpoint.hpp"
#include "jtanet/container.hpp"
#include "jtanet/dataset.hpp"
#include "jtanet/retrieval.hpp"
#include "jtanet/trainer.hpp"
#include "manifest.hpp"
#include "svg.hpp"

namespace jtanet::cli {

namespace fs = std::filesystem;

namespace {

fs::path manifest_path(const std::string& explicit_path, const fs::path& fallback) {
  return explicit_path.empty() ? fallback : fs::path(explicit_path);
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

// Triplet distances in the normalized space mining saw.
double sq_dist(const Tensor& e, std::size_t a, std::size_t b) {
  const std::size_t dim = e.dim(1);
  double s = 0.0;
  for (std::size_t z = 0; z < dim; ++z) {
    const double d = e[a * dim + z] - e[b * dim + z];
    s += d * d;
  }
  return s;
}

void write_loss_plot(const TrainLog& log, const fs::path& out, bool log_y);

Checkpoint load_for_inference(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--checkpoint is required");
  return load_checkpoint(path);
}

}  // namespace

double parse_scale(const std::string& text) {
  double v = 0.0;
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("");
    } else {
      const std::string num = text.substr(0, slash), den = text.substr(slash + 1);
      std::size_t u1 = 0, u2 = 0;
      v = std::stod(num, &u1) / std::stod(den, &u2);
      if (u1 != num.size() || u2 != den.size()) throw std::invalid_argument("");
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("bad channel scale '" + text + "'");
  }
  if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("channel scale must lie in (0, 1], got '" + text + "'");
  return v;
}

int run_ingest(const IngestArgs& a) {
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  if (a.synth == !a.rcc_root.empty()) throw std::invalid_argument("give exactly one of --rcc ROOT or --synth");
  RunManifest manifest("ingest", a.seed);
  DatasetSplit split;
  if (a.synth) {
    SynthOptions o;
    o.n_per_class = a.synth_per_class;
    o.n_classes = a.synth_classes;
    o.noise_sigma = a.synth_noise;
    o.test_fraction = a.synth_test_fraction;
    o.seed = a.seed;
    manifest.config() = {{"source", "synthetic"},       {"n_per_class", o.n_per_class}, {"n_classes", o.n_classes},
                         {"noise_sigma", o.noise_sigma}, {"texture_amplitude", o.texture_amplitude},
                         {"test_fraction", o.test_fraction}, {"side", o.side}};
    split = synth_dataset(o);
  } else {
    IngestOptions o;
    o.test_size = a.test_size;
    manifest.config() = {{"source", "rcc"},       {"root", a.rcc_root},   {"crop", o.crop},
                         {"side", o.side},        {"test_size", o.test_size},
                         {"coordinate_tolerance", o.coordinate_tolerance}};
    const IngestResult r = ingest_rcc(a.rcc_root, a.seed, o);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& img : r.images) manifest.input("image", img);
    std::cerr << "ingested " << r.images.size() << " images:";
    for (std::size_t c = 0; c < r.class_counts.size(); ++c)
      std::cerr << " " << kRccClassNames[c] << "=" << r.class_counts[c];
    std::cerr << "\n";
    split = r.split;
  }
  export_patches(split, a.out);
  std::cout << "train " << split.train.size() << ", test " << split.test.size() << " -> " << a.out << "\n";
  manifest.output("patches", a.out);
  manifest.write(manifest_path(a.manifest, a.out + ".manifest.json"));
  return 0;
}

int run_train(const TrainArgs& a) {
  if (a.data.empty() || a.out.empty()) throw std::invalid_argument("--data and --out are required");
  TrainConfig cfg;
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.strategy = parse_strategy(a.strategy);
  cfg.weights = LossWeights::parse(a.loss_weights);
  cfg.weights.margin = a.margin;
  cfg.embedding_len = a.el;
  cfg.seed = a.seed;
  cfg.channel_scale = parse_scale(a.channel_scale);
  cfg.hinge = parse_hinge_mode(a.hinge);
  cfg.max_iterations = a.max_iterations;
  cfg.validate();

  const DatasetSplit data = import_patches(a.data);
  if (data.train.size() == 0) throw std::invalid_argument(a.data + ": empty train split");
  const fs::path out(a.out);
  fs::create_directories(out);

  RunManifest manifest("train", a.seed);
  manifest.config() = cfg.to_json();
  manifest.input("patches", a.data);

  std::ofstream dump;
  TrainHooks hooks;
  if (!a.triplet_dump.empty()) {
    dump.open(a.triplet_dump, std::ios::binary);
    if (!dump) throw IoError("cannot open " + a.triplet_dump + " for writing");
    dump << "iteration,anchor,positive,negative,d_ap,d_an\n";
    hooks.on_triplets = [&dump](std::size_t it, const Tensor& e, const TripletSet& ts) {
      for (const auto& t : ts.triplets)
        dump << it << "," << t.anchor << "," << t.positive << "," << t.negative << "," << fmt(sq_dist(e, t.anchor, t.positive))
             << "," << fmt(sq_dist(e, t.anchor, t.negative)) << "\n";
    };
  }
  if (!a.quiet)
    hooks.on_iteration = [](const TrainLogRow& r) {
      if (r.iteration % 10 == 1)
        std::cerr << "iter " << r.iteration << " epoch " << r.epoch << " ae " << r.report.ae << " sm " << r.report.sm
                  << " fr " << r.report.fr << " total " << r.report.total << " triplets " << r.report.n_triplets << "\n";
    };

  TrainResult result = train(data.train, cfg, hooks);
  if (dump.is_open()) {
    dump.close();
    manifest.output("triplets", a.triplet_dump);
  }

  Checkpoint ck;
  ck.config = cfg.model_config(data.train.side);
  ck.params = std::move(result.params);
  ck.adam = std::move(result.adam);
  ck.seed = cfg.seed;
  ck.weights = cfg.weights;
  ck.train_config = cfg.to_json();
  const fs::path ckpt = out / "checkpoint.bin";
  save_checkpoint(ckpt, ck);

  const fs::path log_csv = out / "train_log.csv";
  std::ostringstream csv;
  write_train_log_csv(result.log, csv);
  write_text(log_csv, csv.str());
  if (!result.log.rows.empty()) {
    write_loss_plot(result.log, out / "loss.svg", false);
    manifest.output("loss_plot", out / "loss.svg");
  }

  std::cout << "trained " << result.log.rows.size() << " iterations";
  if (!result.log.rows.empty()) std::cout << ", final total loss " << result.log.rows.back().report.total;
  std::cout << " -> " << ckpt.string() << "\n";
  manifest.set_checkpoint(ckpt);
  manifest.output("checkpoint", ckpt);
  manifest.output("train_log", log_csv);
  manifest.write(out / "train_manifest.json");
  return 0;
}

int run_eval(const EvalArgs& a) {
  if (a.data.empty() || a.out.empty()) throw std::invalid_argument("--data and --out are required");
  if (a.delta && a.sweep) throw std::invalid_argument("--delta and --delta-sweep are exclusive");
  const Checkpoint ck = load_for_inference(a.checkpoint);
  const DatasetSplit data = import_patches(a.data);
  if (data.train.size() == 0 || data.test.size() == 0)
    throw std::invalid_argument(a.data + ": eval needs non-empty train and test splits");
  if (data.train.side != ck.config.input_side)
    throw std::invalid_argument("patch side " + std::to_string(data.train.side) + " does not match the checkpoint");
  const fs::path out(a.out);
  fs::create_directories(out);

  RunManifest manifest("eval", ck.seed);
  manifest.input("checkpoint", a.checkpoint);
  manifest.input("patches", a.data);
  manifest.set_checkpoint(a.checkpoint);

  const FeatureDatabase db = build_index(ck.params, ck.config, data.train);
  const fs::path db_path = out / "database.bin";
  save_database(db_path, db);
  const Tensor qf = extract_features(ck.params, ck.config, data.test);

  std::vector<std::size_t> deltas;
  if (a.delta) {
    if (*a.delta == 0 || *a.delta > db.size())
      throw std::invalid_argument("delta must lie in [1, " + std::to_string(db.size()) + "]");
    deltas = {*a.delta};
  } else {
    deltas = default_delta_sweep(db.size());
  }
  manifest.config() = {{"deltas", deltas}, {"database_size", db.size()}, {"queries", data.test.size()},
                       {"embedding_len", ck.config.embedding_len}};

  const std::size_t n_classes = data.class_names.size();
  std::ostringstream csv;
  csv << "delta,precision";
  for (const auto& name : data.class_names) csv << "," << name;
  csv << "\n";
  Series curve{"Pr", {}, {}};
  for (std::size_t d : deltas) {
    const PrecisionReport r = mean_precision(db, qf, data.test.labels, d, n_classes);
    csv << d << "," << fmt(r.mean);
    for (std::size_t c = 0; c < n_classes; ++c) csv << "," << (r.class_queries[c] ? fmt(r.per_class[c]) : "");
    csv << "\n";
    curve.x.push_back(static_cast<double>(d));
    curve.y.push_back(r.mean);
    std::cout << "delta " << d << ": Pr " << std::fixed << std::setprecision(2) << r.mean << std::defaultfloat << "\n";
  }
  const fs::path csv_path = out / "precision.csv";
  write_text(csv_path, csv.str());
  ChartOptions opt;
  opt.title = "Retrieval precision";
  opt.x_label = "delta (retrieved patches)";
  opt.y_label = "Pr (%)";
  const fs::path svg_path = out / "precision.svg";
  write_text(svg_path, line_chart_svg({curve}, opt));

  manifest.output("database", db_path);
  manifest.output("precision_csv", csv_path);
  manifest.output("precision_plot", svg_path);
  manifest.write(out / "eval_manifest.json");
  return 0;
}

int run_query(const QueryArgs& a) {
  if (a.db.empty()) throw std::invalid_argument("--db is required");
  if (a.image.empty() == a.patches.empty()) throw std::invalid_argument("give exactly one of --image or --patches");
  const Checkpoint ck = load_for_inference(a.checkpoint);
  const FeatureDatabase db = load_database(a.db);
  if (db.fingerprint != params_fingerprint(ck.params))
    throw std::invalid_argument("database was built with a different encoder than " + a.checkpoint);
  if (a.delta == 0 || a.delta > db.size())
    throw std::invalid_argument("delta must lie in [1, " + std::to_string(db.size()) + "]");

  RunManifest manifest("query", ck.seed);
  manifest.input("checkpoint", a.checkpoint);
  manifest.input("database", a.db);
  manifest.set_checkpoint(a.checkpoint);

  std::vector<double> patch;
  std::optional<int> label;
  std::int64_t query_id = -1;
  std::vector<std::string> class_names;
  if (!a.image.empty()) {
    manifest.input("image", a.image);
    patch = image_to_patch(read_image(a.image), ck.config.input_side);
  } else {
    manifest.input("patches", a.patches);
    const DatasetSplit data = import_patches(a.patches);
    class_names = data.class_names;
    if (a.split != "train" && a.split != "test") throw std::invalid_argument("--split must be train or test");
    const PatchSet& set = a.split == "train" ? data.train : data.test;
    if (a.index >= set.size())
      throw std::invalid_argument("--index " + std::to_string(a.index) + " out of range for " + a.split + " split of size " +
                                  std::to_string(set.size()));
    if (set.side != ck.config.input_side) throw std::invalid_argument("patch side does not match the checkpoint");
    const auto p = set.patch(a.index);
    patch.assign(p.begin(), p.end());
    label = set.labels[a.index];
    query_id = static_cast<std::int64_t>(a.index);
  }
  const std::size_t side = ck.config.input_side;
  const Tensor qf = extract_features(ck.params, ck.config, Tensor({1, 3, side, side}, std::move(patch)));
  const RetrievalResult r = query(db, qf.storage(), a.delta);

  std::ostringstream csv;
  csv << "rank,index,id,label,distance\n";
  std::size_t hits = 0;
  for (std::size_t k = 0; k < r.ranking.size(); ++k) {
    const Match& m = r.ranking[k];
    const int l = db.labels[m.index];
    if (label && l == *label) ++hits;
    std::string lname = std::to_string(l);
    if (l >= 0 && static_cast<std::size_t>(l) < class_names.size()) lname = class_names[l];
    csv << k + 1 << "," << m.index << "," << db.ids[m.index] << "," << lname << "," << fmt(m.distance) << "\n";
  }
  std::cout << csv.str();
  if (label)
    std::cerr << "precision@" << a.delta << " for label " << *label << ": "
              << 100.0 * static_cast<double>(hits) / static_cast<double>(a.delta) << "\n";

  manifest.config() = {{"delta", a.delta}, {"split", a.split}, {"index", a.index}, {"query_id", query_id}};
  fs::path default_manifest = "query_manifest.json";
  if (!a.out.empty()) {
    write_text(a.out, csv.str());
    manifest.output("ranking", a.out);
    default_manifest = a.out + ".manifest.json";
  }
  manifest.write(manifest_path(a.manifest, default_manifest));
  return 0;
}

namespace {

void write_loss_plot(const TrainLog& log, const fs::path& out, bool log_y) {
  Series ae{"AE_Loss", {}, {}}, se{"SE_LOSS", {}, {}}, re{"RE_LOSS", {}, {}}, total{"TOTAL_LOSS", {}, {}};
  for (const auto& r : log.rows) {
    const double x = static_cast<double>(r.iteration);
    for (Series* s : {&ae, &se, &re, &total}) s->x.push_back(x);
    ae.y.push_back(r.report.ae);
    se.y.push_back(r.report.sm);
    re.y.push_back(r.report.fr);
    total.y.push_back(r.report.total);
  }
  ChartOptions opt;
  opt.title = "Training losses";
  opt.x_label = "iteration";
  opt.y_label = "loss";
  opt.log_y = log_y;
  write_text(out, line_chart_svg({ae, se, re, total}, opt));
}

}  // namespace

int run_plot(const PlotArgs& a) {
  if (a.log.empty() || a.out.empty()) throw std::invalid_argument("--log and --out are required");
  RunManifest manifest("plot", 0);
  manifest.input("train_log", a.log);
  const TrainLog log = read_train_log_csv(a.log);
  if (log.rows.empty()) throw std::invalid_argument(a.log + ": training log has no rows");
  write_loss_plot(log, a.out, a.log_y);
  manifest.config() = {{"iterations", log.rows.size()}, {"log_y", a.log_y}};
  manifest.output("plot", a.out);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

}  // namespace jtanet::cli
