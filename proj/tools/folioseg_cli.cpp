// folioseg command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "folioseg/folioseg.hpp"

namespace fs = std::filesystem;
using namespace folioseg;

namespace {

/// Effective settings, echoed to stdout and the output directory so every
/// run can be replayed from its header.
class ConfigHeader {
 public:
  template <typename T>
  void add(const std::string& key, const T& value) {
    std::ostringstream s;
    s.precision(17);
    s << value;
    entries_.emplace_back(key, s.str());
  }
  void print(std::ostream& out, const char* prefix = "# ") const {
    for (const auto& [k, v] : entries_) out << prefix << k << " = " << v << "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct NetOptions {
  int width = 260;
  int height = 390;
  long ratio_num = 2;
  long ratio_den = 3;
  int divisor = 4;
  std::vector<int> encoder{40, 60, 120, 160, 240};
  std::vector<int> decoder{240, 120, 60};

  NetInputSpec spec() const {
    NetInputSpec s;
    s.width = width;
    s.height = height;
    s.ratio = {ratio_num, ratio_den};
    s.divisor = divisor;
    s.validate();
    return s;
  }

  FcnConfig fcn(int classes) const {
    FcnConfig c;
    c.classes = classes;
    if (encoder.size() != 5) throw UsageError("--encoder takes exactly 5 filter counts");
    if (decoder.size() != 3) throw UsageError("--decoder takes exactly 3 filter counts");
    std::copy(encoder.begin(), encoder.end(), c.encoder.begin());
    std::copy(decoder.begin(), decoder.end(), c.decoder.begin());
    c.validate();
    return c;
  }

  void describe(ConfigHeader& h) const {
    h.add("net_width", width);
    h.add("net_height", height);
    h.add("canvas_ratio", std::to_string(ratio_num) + "/" + std::to_string(ratio_den));
    h.add("pad_divisor", divisor);
  }
};

void add_net_options(CLI::App* app, NetOptions& o) {
  app->add_option("--width", o.width, "Network input width")->capture_default_str();
  app->add_option("--height", o.height, "Network input height")->capture_default_str();
  app->add_option("--ratio-num", o.ratio_num, "Canvas ratio numerator (w/h)")->capture_default_str();
  app->add_option("--ratio-den", o.ratio_den, "Canvas ratio denominator (w/h)")->capture_default_str();
  app->add_option("--pad-divisor", o.divisor, "Pad network input to a multiple of this")
      ->capture_default_str();
  app->add_option("--encoder", o.encoder, "Encoder filter counts (5 values)")
      ->delimiter(',')
      ->expected(5);
  app->add_option("--decoder", o.decoder, "Hidden decoder filter counts (3 values)")
      ->delimiter(',')
      ->expected(3);
}

struct TrainOptions {
  std::optional<int> iterations;
  double lr = 1e-3;
  std::string optimizer = "adam";
  double momentum = 0.9;
  int batch = 1;
  int checkpoint_every = 0;

  TrainConfig config(std::uint64_t seed) const {
    if (!iterations) throw UsageError("--iters is required");
    TrainConfig c;
    c.learning_rate = lr;
    c.optimizer = optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    c.momentum = momentum;
    c.iterations = *iterations;
    c.batch_size = batch;
    c.seed = seed;
    c.checkpoint_interval = checkpoint_every;
    return c;
  }

  void describe(ConfigHeader& h) const {
    h.add("iterations", iterations.value_or(0));
    h.add("optimizer", optimizer);
    h.add("learning_rate", lr);
    if (optimizer == "sgd") h.add("momentum", momentum);
    else h.add("adam", "beta1=0.9 beta2=0.999 eps=1e-08");
    h.add("batch_size", batch);
  }
};

void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--iters", o.iterations, "Training iterations")->required();
  app->add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  app->add_option("--optimizer", o.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  app->add_option("--momentum", o.momentum, "SGD momentum")->capture_default_str();
  app->add_option("--batch", o.batch, "Pages per iteration")->capture_default_str();
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  const fs::path probe = dir / ".folioseg_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw DataError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::vector<PreparedPage> select_split(std::vector<PreparedPage> pages, const std::string& split) {
  if (split == "all") return pages;
  const Split want = split == "train" ? Split::train : Split::test;
  std::vector<PreparedPage> out;
  for (auto& p : pages)
    if (p.split == want) out.push_back(std::move(p));
  if (out.empty()) throw DataError("manifest has no pages tagged " + split);
  return out;
}

Connectivity parse_connectivity(int c) {
  if (c == 4) return Connectivity::four;
  if (c == 8) return Connectivity::eight;
  throw UsageError("--connectivity must be 4 or 8");
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  fs::path manifest, out;
  std::optional<std::uint64_t> seed;
  std::string split = "auto";
  NetOptions net;
  TrainOptions train;
};

int cmd_train(const TrainArgs& a) {
  if (!a.seed) throw UsageError("--seed is required");
  ensure_writable_dir(a.out);
  const auto manifest = load_manifest(a.manifest);
  const NetInputSpec spec = a.net.spec();
  const FcnConfig fcn = a.net.fcn(manifest.class_count());
  TrainConfig tc = a.train.config(*a.seed);
  if (tc.checkpoint_interval > 0) tc.checkpoint_dir = a.out;

  std::string split = a.split;
  if (split == "auto") split = manifest.fully_tagged() ? "train" : "all";
  const auto pages = select_split(load_prepared_pages(manifest, spec), split);
  std::vector<TrainingSample> samples;
  for (const auto& p : pages) samples.push_back(p.sample);

  ConfigHeader h;
  h.add("command", "train");
  h.add("manifest", a.manifest.string());
  h.add("classes", fcn.classes);
  h.add("split", split);
  h.add("pages", samples.size());
  h.add("seed", *a.seed);
  a.net.describe(h);
  a.train.describe(h);
  h.print(std::cout);
  auto cfg_out = open_out(a.out / "config.txt");
  h.print(cfg_out, "");

  const int every = std::max(1, tc.iterations / 20);
  const auto result = train(samples, fcn, tc, spec, [&](const LossReport& r) {
    if (r.iteration % every == 0 || r.iteration == 1)
      std::cout << "iter " << r.iteration << " loss " << r.loss << " counted " << r.counted << "\n";
  });
  save_params(a.out / "model.ckpt", result.params);
  auto loss_out = open_out(a.out / "loss.csv");
  write_loss_csv(loss_out, result.curve);
  std::cout << "wrote " << (a.out / "model.ckpt").string() << " and "
            << (a.out / "loss.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  fs::path model, manifest, out;
  std::vector<fs::path> inputs;
  std::string split;
  bool postproc = false;
  bool unmasked = false;
  int connectivity = 8;
};

int cmd_predict(const PredictArgs& a) {
  const auto manifest = load_manifest(a.manifest);
  const ModelParams params = load_params(a.model);
  if (params.config.classes != manifest.class_count())
    throw DataError("checkpoint predicts " + std::to_string(params.config.classes) +
                    " classes but the manifest palette has " +
                    std::to_string(manifest.class_count()));
  ensure_writable_dir(a.out);
  const Connectivity conn = parse_connectivity(a.connectivity);

  std::vector<fs::path> inputs = a.inputs;
  if (!a.split.empty()) {
    for (const auto& r : manifest.records)
      if (a.split == "all" || to_string(r.split) == a.split) inputs.push_back(r.image);
  }
  if (inputs.empty()) throw UsageError("no input images (give paths or --split)");

  for (const auto& in : inputs) {
    const Pixmap page = read_pixmap(in);
    const LabelMask pred = predict_labels(params, page, params.input_spec);
    const BinaryMask bin = binarize_otsu(to_grayscale(page)).mask;
    const LabelMask masked = apply_bitmask(pred, bin);
    const std::string stem = in.stem().string();
    write_pixmap(a.out / (stem + "_pred.ppm"), encode_label_mask(masked, manifest.classes));
    if (a.unmasked)
      write_pixmap(a.out / (stem + "_raw.ppm"), encode_label_mask(pred, manifest.classes));
    if (a.postproc) {
      const LabelMask post = mode_relabel(masked, connected_components(bin, conn));
      write_pixmap(a.out / (stem + "_post.ppm"), encode_label_mask(post, manifest.classes));
    }
    std::cout << in.string() << " -> " << (a.out / (stem + "_pred.ppm")).string() << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- evaluate

struct EvaluateArgs {
  fs::path manifest, pred_dir, image, gt, pred, out;
  std::string suffix = "_pred.ppm";
  std::string split = "all";
  bool postproc = false;
  bool macro = false;
  int connectivity = 8;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto manifest = load_manifest(a.manifest);
  const Connectivity conn = parse_connectivity(a.connectivity);

  struct Triple {
    std::string id;
    fs::path image, gt, pred;
  };
  std::vector<Triple> triples;
  if (!a.pred.empty()) {
    if (a.image.empty() || a.gt.empty())
      throw UsageError("--pred needs --image and --gt (or use --pred-dir)");
    triples.push_back({a.pred.stem().string(), a.image, a.gt, a.pred});
  } else {
    if (a.pred_dir.empty()) throw UsageError("give --pred-dir or --image/--gt/--pred");
    for (const auto& r : manifest.records)
      if (a.split == "all" || to_string(r.split) == a.split)
        triples.push_back({r.image.stem().string(), r.image, r.ground_truth,
                           a.pred_dir / (r.image.stem().string() + a.suffix)});
    if (triples.empty()) throw DataError("no manifest records in split " + a.split);
  }

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  write_metrics_header(out);
  std::vector<MetricsReport> raw, post;
  for (const auto& t : triples) {
    const Pixmap image = read_pixmap(t.image);
    const LabelMask gt = decode_label_mask(read_pixmap(t.gt), manifest.classes);
    const LabelMask pred = decode_label_mask(read_pixmap(t.pred), manifest.classes);
    const auto binarized = binarize_otsu(to_grayscale(image));
    if (binarized.no_ink) std::cerr << "warning: " << t.id << " has no ink; FgPA undefined\n";
    raw.push_back(evaluate(gt, pred, binarized.mask));
    write_metrics_row(out, t.id, false, raw.back());
    if (a.postproc) {
      const LabelMask pp =
          mode_relabel(apply_bitmask(pred, binarized.mask), connected_components(binarized.mask, conn));
      post.push_back(evaluate(gt, pp, binarized.mask));
      write_metrics_row(out, t.id, true, post.back());
    }
  }
  const auto summary = [&](const std::vector<MetricsReport>& v) {
    return a.macro ? macro_average(v) : pooled(v);
  };
  const std::string label = a.macro ? "macro" : "pooled";
  write_metrics_row(out, label, false, summary(raw));
  if (a.postproc) write_metrics_row(out, label, true, summary(post));
  return 0;
}

// ------------------------------------------------------------- experiment

struct ExperimentArgs {
  fs::path manifest, out;
  std::optional<std::uint64_t> seed;
  std::string mode = "monte-carlo";
  int folds = 10;
  std::optional<double> train_fraction;
  std::optional<int> train_count;
  std::string grid = "absolute";
  std::vector<double> points;
  std::string postproc = "both";
  int jobs = 1;
  int connectivity = 8;
  NetOptions net;
  TrainOptions train;
};

void write_results(const fs::path& path, const ConfigHeader& h,
                   const std::vector<const FoldResult*>& folds, PostprocMode mode) {
  auto out = open_out(path);
  h.print(out);
  write_results_header(out);
  for (const auto* f : folds) write_fold_rows(out, *f, mode);
}

void print_aggregate(const char* label, const AggregateReport& a) {
  auto pm = [](const MetricSummary& s) {
    std::ostringstream o;
    o.precision(6);
    o << s.mean;
    if (s.stddev) o << " +- " << *s.stddev;
    else o << " (std n/a, 1 fold)";
    return o.str();
  };
  std::cout << label << ": TPA " << pm(a.tpa);
  if (a.fgpa) std::cout << ", FgPA " << pm(*a.fgpa) << ", FgPE " << pm(*a.fgpe);
  else std::cout << ", FgPA undefined";
  std::cout << "\n";
}

int cmd_experiment(const ExperimentArgs& a) {
  if (!a.seed) throw UsageError("--seed is required");
  ensure_writable_dir(a.out);
  const auto manifest = load_manifest(a.manifest);

  ExperimentConfig cfg;
  cfg.folds = a.folds;
  cfg.train_fraction = a.train_fraction;
  cfg.train_count = a.train_count;
  cfg.master_seed = *a.seed;
  cfg.spec = a.net.spec();
  cfg.fcn = a.net.fcn(manifest.class_count());
  cfg.train = a.train.config(0);
  cfg.postproc = a.postproc == "off" ? PostprocMode::off
                 : a.postproc == "on" ? PostprocMode::on
                                      : PostprocMode::both;
  cfg.connectivity = parse_connectivity(a.connectivity);
  cfg.jobs = a.jobs;
  if (a.mode == "fixed") cfg.mode = ExperimentMode::fixed_split;
  else if (a.mode == "sweep") cfg.mode = ExperimentMode::size_sweep;
  else cfg.mode = ExperimentMode::monte_carlo;
  cfg.relative = a.grid == "relative";
  if (!a.points.empty()) {
    if (cfg.relative) {
      cfg.relative_points = a.points;
    } else {
      cfg.absolute_points.clear();
      for (double p : a.points) cfg.absolute_points.push_back(int(p));
    }
  }
  cfg.validate();

  const auto pages = load_prepared_pages(manifest, cfg.spec, cfg.connectivity);

  ConfigHeader h;
  h.add("command", "experiment");
  h.add("manifest", a.manifest.string());
  h.add("pages", pages.size());
  h.add("classes", cfg.fcn.classes);
  h.add("mode", a.mode);
  h.add("master_seed", cfg.master_seed);
  h.add("postproc", a.postproc);
  h.add("connectivity", a.connectivity);
  if (cfg.mode != ExperimentMode::fixed_split) h.add("folds", cfg.folds);
  if (cfg.mode == ExperimentMode::monte_carlo) {
    if (cfg.train_count) h.add("train_count", *cfg.train_count);
    else h.add("train_fraction", cfg.effective_fraction());
  }
  if (cfg.mode == ExperimentMode::size_sweep) {
    h.add("grid", a.grid);
    std::ostringstream pts;
    if (cfg.relative)
      for (double r : cfg.relative_points) pts << r << " ";
    else
      for (int n : cfg.absolute_points) pts << n << " ";
    h.add("points", pts.str());
  }
  a.net.describe(h);
  a.train.describe(h);
  h.add("jobs", cfg.jobs);
  h.print(std::cout);
  auto cfg_out = open_out(a.out / "config.txt");
  h.print(cfg_out, "");

  if (cfg.mode == ExperimentMode::size_sweep) {
    const auto sweep = size_sweep(pages, cfg);
    for (const auto& n : sweep.notes) std::cout << "note: " << n << "\n";
    std::vector<const FoldResult*> folds;
    for (const auto& p : sweep.points)
      for (const auto& f : p.folds) folds.push_back(&f);
    write_results(a.out / "results.csv", h, folds, cfg.postproc);
    {
      auto s = open_out(a.out / "summary.csv");
      write_summary_csv(s, sweep, false);
    }
    if (wants_post(cfg.postproc)) {
      auto s = open_out(a.out / "summary_postproc.csv");
      write_summary_csv(s, sweep, true);
    }
    for (const auto& p : sweep.points) {
      std::cout << "point " << p.value << " (N=" << p.train_count << ")";
      if (p.raw) std::cout << " FgPE min/avg/max " << p.raw->min << " " << p.raw->avg << " " << p.raw->max;
      if (p.post) std::cout << " | post " << p.post->min << " " << p.post->avg << " " << p.post->max;
      std::cout << "\n";
    }
  } else {
    const auto cv = cfg.mode == ExperimentMode::fixed_split ? fixed_split_eval(pages, cfg)
                                                            : monte_carlo_cv(pages, cfg);
    std::vector<const FoldResult*> folds;
    for (const auto& f : cv.folds) folds.push_back(&f);
    write_results(a.out / "results.csv", h, folds, cfg.postproc);
    if (wants_raw(cfg.postproc)) print_aggregate("unprocessed", cv.raw);
    if (cv.post) print_aggregate("post-processed", *cv.post);
  }
  std::cout << "wrote " << (a.out / "results.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------- manifest-check

int cmd_manifest_check(const fs::path& path, bool decode) {
  const auto m = load_manifest(path);
  check_manifest_paths(m);
  size_t train = 0, test = 0;
  for (const auto& r : m.records) {
    train += r.split == Split::train;
    test += r.split == Split::test;
    if (decode) {
      const Pixmap img = read_pixmap(r.image);
      const LabelMask gt = decode_label_mask(read_pixmap(r.ground_truth), m.classes);
      require_same_dims(gt, img.width(), img.height(), r.ground_truth.string().c_str());
    }
  }
  std::cout << "manifest " << (m.name.empty() ? path.string() : m.name) << ": "
            << m.records.size() << " records (" << train << " train, " << test << " test), "
            << m.class_count() << " classes\n";
  for (const auto& e : m.classes.entries())
    std::cout << "  class " << e.index << " #" << to_hex(e.color) << " " << e.name << "\n";
  std::cout << "ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"folioseg: full-page segmentation of historical documents"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest");
  train_cmd->add_option("--manifest", train_args.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--seed", train_args.seed, "Random seed (required)");
  train_cmd->add_option("--split", train_args.split, "auto, train, test or all")
      ->check(CLI::IsMember({"auto", "train", "test", "all"}))
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train_args.train.checkpoint_every,
                        "Save a checkpoint every N iterations (0 = off)");
  add_train_options(train_cmd, train_args.train);
  add_net_options(train_cmd, train_args.net);

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Segment page images");
  predict_cmd->add_option("--model", predict_args.model, "Checkpoint")->required();
  predict_cmd->add_option("--manifest", predict_args.manifest, "Manifest with the label palette")
      ->required();
  predict_cmd->add_option("--out", predict_args.out, "Output directory")->required();
  predict_cmd->add_option("--split", predict_args.split,
                          "Predict manifest records of this split (train, test, unsplit, all)");
  predict_cmd->add_option("images", predict_args.inputs, "Page images");
  predict_cmd->add_flag("--postproc", predict_args.postproc,
                        "Also write component-relabeled output");
  predict_cmd->add_flag("--unmasked", predict_args.unmasked,
                        "Also write the prediction before bit-masking");
  predict_cmd->add_option("--connectivity", predict_args.connectivity, "4 or 8")
      ->capture_default_str();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  eval_cmd->add_option("--manifest", eval_args.manifest, "Manifest (palette and records)")
      ->required();
  eval_cmd->add_option("--pred-dir", eval_args.pred_dir, "Directory of predicted masks");
  eval_cmd->add_option("--suffix", eval_args.suffix, "Prediction file suffix")->capture_default_str();
  eval_cmd->add_option("--split", eval_args.split, "train, test, unsplit or all")
      ->capture_default_str();
  eval_cmd->add_option("--image", eval_args.image, "Single page image");
  eval_cmd->add_option("--gt", eval_args.gt, "Single ground-truth image");
  eval_cmd->add_option("--pred", eval_args.pred, "Single prediction image");
  eval_cmd->add_option("--out", eval_args.out, "Write CSV here instead of stdout");
  eval_cmd->add_flag("--postproc", eval_args.postproc, "Also score component-relabeled masks");
  eval_cmd->add_flag("--macro", eval_args.macro, "Summarize by averaging page scores");
  eval_cmd->add_option("--connectivity", eval_args.connectivity, "4 or 8")->capture_default_str();

  ExperimentArgs exp_args;
  auto* exp_cmd = app.add_subcommand("experiment", "Cross-validation and training-size sweeps");
  exp_cmd->add_option("--manifest", exp_args.manifest, "Dataset manifest")->required();
  exp_cmd->add_option("--out", exp_args.out, "Output directory")->required();
  exp_cmd->add_option("--seed", exp_args.seed, "Master seed (required)");
  exp_cmd->add_option("--mode", exp_args.mode, "fixed, monte-carlo or sweep")
      ->check(CLI::IsMember({"fixed", "monte-carlo", "sweep"}))
      ->capture_default_str();
  exp_cmd->add_option("--folds", exp_args.folds, "Folds per point")->capture_default_str();
  exp_cmd->add_option("--train-fraction", exp_args.train_fraction,
                      "Monte Carlo training fraction (default 0.5)");
  exp_cmd->add_option("--train-count", exp_args.train_count, "Monte Carlo training page count");
  exp_cmd->add_option("--grid", exp_args.grid, "Sweep grid: absolute or relative")
      ->check(CLI::IsMember({"absolute", "relative"}))
      ->capture_default_str();
  exp_cmd->add_option("--points", exp_args.points, "Override sweep points")->delimiter(',');
  exp_cmd->add_option("--postproc", exp_args.postproc, "off, on or both")
      ->check(CLI::IsMember({"off", "on", "both"}))
      ->capture_default_str();
  exp_cmd->add_option("--jobs", exp_args.jobs, "Parallel fold jobs")->capture_default_str();
  exp_cmd->add_option("--connectivity", exp_args.connectivity, "4 or 8")->capture_default_str();
  add_train_options(exp_cmd, exp_args.train);
  add_net_options(exp_cmd, exp_args.net);

  fs::path check_path;
  bool check_decode = false;
  auto* check_cmd = app.add_subcommand("manifest-check", "Validate a manifest and its files");
  check_cmd->add_option("--manifest", check_path, "Dataset manifest")->required();
  check_cmd->add_flag("--decode", check_decode, "Also decode every ground-truth image");

  fs::path synth_out;
  int synth_pages = 20, synth_width = 64, synth_height = 96, synth_train = 0;
  std::uint64_t synth_seed = 1;
  auto* synth_cmd = app.add_subcommand("synthesize", "Write a synthetic dataset with a manifest");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--pages", synth_pages, "Page count")->capture_default_str();
  synth_cmd->add_option("--width", synth_width, "Page width")->capture_default_str();
  synth_cmd->add_option("--height", synth_height, "Page height")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--train-count", synth_train, "Tag the first N pages train, rest test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(ErrorKind::usage);
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*predict_cmd) return cmd_predict(predict_args);
    if (*eval_cmd) return cmd_evaluate(eval_args);
    if (*exp_cmd) return cmd_experiment(exp_args);
    if (*check_cmd) return cmd_manifest_check(check_path, check_decode);
    if (*synth_cmd) {
      const auto path =
          write_synthetic_dataset(synth_out, synth_pages, synth_width, synth_height, synth_seed, synth_train);
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(ErrorKind::data);
  }
  return int(ErrorKind::usage);
}
