#pragma once

// Experiment protocols: fixed train/test split, Monte Carlo
// cross-validation, and training-set-size sweeps (absolute page counts or
// fractions of the dataset), each evaluated with and without connected
// component post-processing.
//
// Seeds: every fold job gets derive_seed(master, {kind, point code, fold});
// its train/test partition is drawn from derive_seed(job, {0}) and its
// weight init / page order from derive_seed(job, {1}). Jobs therefore
// reproduce identically whether run serially or on a work pool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/fcn.hpp"
#include "folioseg/manifest.hpp"
#include "folioseg/metrics.hpp"
#include "folioseg/pipeline.hpp"
#include "folioseg/pixmap_io.hpp"
#include "folioseg/postprocess.hpp"
#include "folioseg/random.hpp"
#include "folioseg/training.hpp"

namespace folioseg {

/// A page with everything derived from it that experiments reuse.
struct PreparedPage {
  std::string id;
  Split split = Split::unsplit;
  LabelMask gt;
  BinaryMask bin;  // full-resolution binarization
  ComponentSet components;
  NetworkView view;
  TrainingSample sample;
  Pixmap image;
};

inline PreparedPage prepare_page(std::string id, Pixmap image, LabelMask gt, Split split,
                                 const NetInputSpec& spec, Connectivity conn) {
  require_same_dims(gt, image.width(), image.height(), id + ": ground truth vs image");
  PreparedPage p;
  p.id = std::move(id);
  p.split = split;
  p.bin = binarize_otsu(to_grayscale(image)).mask;
  p.components = connected_components(p.bin, conn);
  p.view = to_network_view(image, spec);
  p.sample = make_training_sample(image, gt, spec);
  p.gt = std::move(gt);
  p.image = std::move(image);
  return p;
}

inline std::vector<PreparedPage> load_prepared_pages(const DatasetManifest& m,
                                                     const NetInputSpec& spec,
                                                     Connectivity conn = Connectivity::eight) {
  std::vector<PreparedPage> pages;
  for (const auto& r : m.records) {
    Pixmap image = read_pixmap(r.image);
    LabelMask gt = decode_label_mask(read_pixmap(r.ground_truth), m.classes);
    pages.push_back(prepare_page(r.image.stem().string(), std::move(image), std::move(gt), r.split,
                                 spec, conn));
  }
  return pages;
}

enum class PostprocMode { off, on, both };

inline bool wants_raw(PostprocMode m) { return m != PostprocMode::on; }
inline bool wants_post(PostprocMode m) { return m != PostprocMode::off; }

struct PageEvaluation {
  MetricsReport raw;   // bit-masked prediction
  MetricsReport post;  // bit-masked + component mode relabeling
};

/// Predicts one page at full resolution and scores it.
inline PageEvaluation evaluate_page(const ModelParams& params, const PreparedPage& page,
                                    const NetInputSpec& spec, PostprocMode mode) {
  const LabelMask pred = predict_labels(params, page.view, spec);
  const LabelMask masked = apply_bitmask(pred, page.bin);
  PageEvaluation e;
  e.raw = evaluate(page.gt, masked, page.bin);
  if (wants_post(mode)) e.post = evaluate(page.gt, mode_relabel(masked, page.components), page.bin);
  return e;
}

// ----------------------------------------------------------------- configs

enum class ExperimentMode { fixed_split, monte_carlo, size_sweep };
enum class PointKind { fixed, monte_carlo, absolute, relative };

inline const char* to_string(PointKind k) {
  switch (k) {
    case PointKind::fixed: return "fixed";
    case PointKind::monte_carlo: return "monte_carlo";
    case PointKind::absolute: return "absolute";
    default: return "relative";
  }
}

inline std::vector<int> default_absolute_grid() { return {1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 50}; }

/// 0.05, 0.10, ..., 0.80 computed from integer steps so the values are exact.
inline std::vector<double> default_relative_grid() {
  std::vector<double> r;
  for (int i = 1; i <= 16; ++i) r.push_back(i * 5 / 100.0);
  return r;
}

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::monte_carlo;
  int folds = 10;
  /// Monte Carlo: either a page count or a fraction (default 0.5).
  std::optional<int> train_count;
  std::optional<double> train_fraction;
  /// Size sweep grid.
  bool relative = false;
  std::vector<int> absolute_points = default_absolute_grid();
  std::vector<double> relative_points = default_relative_grid();

  std::uint64_t master_seed = 0;
  FcnConfig fcn;
  TrainConfig train;
  NetInputSpec spec;
  PostprocMode postproc = PostprocMode::both;
  Connectivity connectivity = Connectivity::eight;
  int jobs = 1;

  double effective_fraction() const { return train_fraction.value_or(0.5); }

  void validate() const {
    if (folds < 1) throw DataError("folds must be >= 1");
    if (jobs < 1) throw DataError("jobs must be >= 1");
    if (train_fraction && !(*train_fraction > 0.0 && *train_fraction < 1.0))
      throw DataError("train fraction must lie in (0, 1)");
    for (double r : relative_points)
      if (!(r > 0.0 && r < 1.0)) throw DataError("relative sweep points must lie in (0, 1)");
    for (int n : absolute_points)
      if (n < 1) throw DataError("absolute sweep points must be >= 1");
    fcn.validate();
    train.validate();
    spec.validate();
  }
};

struct FoldResult {
  PointKind kind = PointKind::fixed;
  double point_value = 0.0;
  int fold = 0;
  std::uint64_t seed = 0;
  std::vector<size_t> train_pages;
  std::vector<size_t> test_pages;
  std::vector<PageEvaluation> pages;  // per test page, same order as test_pages
  MetricsReport raw;                  // pooled over test pages
  MetricsReport post;
  std::vector<LossReport> curve;
};

// ---------------------------------------------------------------- work pool

/// Runs task(i) for i in [0, count) on up to `jobs` threads. Results must
/// be written to per-index slots; the first exception is rethrown.
inline void run_parallel(size_t count, int jobs, const std::function<void(size_t)>& task) {
  const size_t workers = std::min<size_t>(size_t(std::max(1, jobs)), count);
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// ------------------------------------------------------------------- folds

struct FoldJob {
  PointKind kind;
  double point_value;
  std::uint64_t point_code;
  int fold;
  size_t train_count;  // 0 = use tagged split
};

inline std::uint64_t fold_seed(std::uint64_t master, const FoldJob& job) {
  return derive_seed(master, {std::uint64_t(job.kind), job.point_code, std::uint64_t(job.fold)});
}

/// Random partition: `train_count` pages sampled without replacement, rest test.
inline void random_partition(size_t pages, size_t train_count, std::uint64_t seed,
                             std::vector<size_t>& train, std::vector<size_t>& test) {
  std::vector<size_t> idx(pages);
  for (size_t i = 0; i < pages; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  train.assign(idx.begin(), idx.begin() + std::ptrdiff_t(train_count));
  test.assign(idx.begin() + std::ptrdiff_t(train_count), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

inline FoldResult run_fold(const std::vector<PreparedPage>& pages, const FoldJob& job,
                           const ExperimentConfig& cfg) {
  FoldResult r;
  r.kind = job.kind;
  r.point_value = job.point_value;
  r.fold = job.fold;
  r.seed = fold_seed(cfg.master_seed, job);
  if (job.train_count == 0) {
    for (size_t i = 0; i < pages.size(); ++i)
      (pages[i].split == Split::train ? r.train_pages : r.test_pages).push_back(i);
  } else {
    random_partition(pages.size(), job.train_count, derive_seed(r.seed, {0}), r.train_pages,
                     r.test_pages);
  }
  if (r.train_pages.empty() || r.test_pages.empty())
    throw DataError("fold has an empty train or test set");

  std::vector<TrainingSample> samples;
  for (size_t i : r.train_pages) samples.push_back(pages[i].sample);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(r.seed, {1});
  tc.checkpoint_interval = 0;
  TrainResult trained = train(samples, cfg.fcn, tc, cfg.spec);
  r.curve = std::move(trained.curve);

  std::vector<MetricsReport> raw, post;
  for (size_t i : r.test_pages) {
    r.pages.push_back(evaluate_page(trained.params, pages[i], cfg.spec, cfg.postproc));
    raw.push_back(r.pages.back().raw);
    post.push_back(r.pages.back().post);
  }
  r.raw = pooled(raw);
  if (wants_post(cfg.postproc)) r.post = pooled(post);
  return r;
}

inline std::vector<FoldResult> run_jobs(const std::vector<PreparedPage>& pages,
                                        const std::vector<FoldJob>& jobs,
                                        const ExperimentConfig& cfg) {
  std::vector<FoldResult> results(jobs.size());
  run_parallel(jobs.size(), cfg.jobs,
               [&](size_t i) { results[i] = run_fold(pages, jobs[i], cfg); });
  return results;
}

// --------------------------------------------------------------- protocols

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  AggregateReport raw;
  std::optional<AggregateReport> post;
  size_t train_count = 0;
};

inline CrossValidationResult summarize_folds(std::vector<FoldResult> folds, PostprocMode mode) {
  CrossValidationResult out;
  std::vector<MetricsReport> raw, post;
  for (const auto& f : folds) {
    raw.push_back(f.raw);
    post.push_back(f.post);
  }
  out.raw = aggregate(raw);
  if (wants_post(mode)) out.post = aggregate(post);
  out.train_count = folds.empty() ? 0 : folds.front().train_pages.size();
  out.folds = std::move(folds);
  return out;
}

/// Repeated random train/test partitions; folds are independent, so test
/// sets of different folds may overlap.
inline CrossValidationResult monte_carlo_cv(const std::vector<PreparedPage>& pages,
                                            const ExperimentConfig& cfg) {
  cfg.validate();
  const size_t d = pages.size();
  if (d < 2) throw DataError("Monte Carlo cross-validation needs at least 2 pages");
  const long n = cfg.train_count ? long(*cfg.train_count)
                                 : std::lround(cfg.effective_fraction() * double(d));
  if (n < 1 || n > long(d) - 1)
    throw DataError("train size " + std::to_string(n) + " leaves an empty train or test set for " +
                    std::to_string(d) + " pages");
  std::vector<FoldJob> jobs;
  for (int f = 0; f < cfg.folds; ++f)
    jobs.push_back({PointKind::monte_carlo, double(n), std::uint64_t(n), f, size_t(n)});
  return summarize_folds(run_jobs(pages, jobs, cfg), cfg.postproc);
}

/// One training run on the tagged train pages, evaluated on the tagged test pages.
inline CrossValidationResult fixed_split_eval(const std::vector<PreparedPage>& pages,
                                              const ExperimentConfig& cfg) {
  cfg.validate();
  for (const auto& p : pages)
    if (p.split == Split::unsplit)
      throw DataError("page " + p.id +
                      " has no train/test tag; use monte-carlo mode for untagged manifests");
  std::vector<FoldJob> jobs{{PointKind::fixed, 0.0, 0, 0, 0}};
  return summarize_folds(run_jobs(pages, jobs, cfg), cfg.postproc);
}

struct FgpeStats {
  double min = 0.0, avg = 0.0, max = 0.0;
  size_t folds = 0;  // folds with defined FgPE
};

inline std::optional<FgpeStats> fgpe_stats(const std::vector<FoldResult>& folds, bool post) {
  std::vector<double> v;
  for (const auto& f : folds) {
    const auto& r = post ? f.post : f.raw;
    if (r.fgpe) v.push_back(*r.fgpe);
  }
  if (v.empty()) return std::nullopt;
  FgpeStats s;
  s.folds = v.size();
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.avg = sum / double(v.size());
  return s;
}

struct SweepPoint {
  double value = 0.0;  // N, or r for relative sweeps
  size_t train_count = 0;
  std::vector<FoldResult> folds;
  std::optional<FgpeStats> raw;
  std::optional<FgpeStats> post;
};

struct SweepResult {
  PointKind kind = PointKind::absolute;
  std::vector<SweepPoint> points;
  std::vector<double> skipped;
  std::vector<std::string> notes;
};

/// Training-size sweep. Points that would leave no test page (or no
/// training page) are skipped and noted.
inline SweepResult size_sweep(const std::vector<PreparedPage>& pages, const ExperimentConfig& cfg) {
  cfg.validate();
  const size_t d = pages.size();
  SweepResult out;
  out.kind = cfg.relative ? PointKind::relative : PointKind::absolute;

  std::vector<FoldJob> jobs;
  auto add_point = [&](double value, std::uint64_t code, long n) {
    if (n < 1 || n > long(d) - 1) {
      out.skipped.push_back(value);
      out.notes.push_back("skipped " + std::string(to_string(out.kind)) + " point " +
                          format_optional(value) + ": " + std::to_string(n) +
                          " training pages not satisfiable with " + std::to_string(d) + " pages");
      return;
    }
    SweepPoint p;
    p.value = value;
    p.train_count = size_t(n);
    out.points.push_back(std::move(p));
    for (int f = 0; f < cfg.folds; ++f) jobs.push_back({out.kind, value, code, f, size_t(n)});
  };
  if (cfg.relative) {
    for (double r : cfg.relative_points)
      add_point(r, std::uint64_t(std::llround(r * 1e6)), std::lround(r * double(d)));
  } else {
    for (int n : cfg.absolute_points) add_point(double(n), std::uint64_t(n), n);
  }
  if (out.points.empty()) throw DataError("no sweep point is satisfiable with " + std::to_string(d) + " pages");

  auto results = run_jobs(pages, jobs, cfg);
  size_t k = 0;
  for (auto& p : out.points) {
    for (int f = 0; f < cfg.folds; ++f) p.folds.push_back(std::move(results[k++]));
    p.raw = fgpe_stats(p.folds, false);
    if (wants_post(cfg.postproc)) p.post = fgpe_stats(p.folds, true);
  }
  return out;
}

// -------------------------------------------------------------------- CSV

inline void write_results_header(std::ostream& out) {
  out << "point_kind,point_value,fold,seed,postproc,tpa,fgpa,fgpe,pages_train,pages_test\n";
}

inline void write_fold_rows(std::ostream& out, const FoldResult& f, PostprocMode mode) {
  auto row = [&](const char* pp, const MetricsReport& r) {
    out << to_string(f.kind) << "," << format_optional(f.point_value) << "," << f.fold << ","
        << f.seed << "," << pp << "," << format_optional(r.tpa) << "," << format_optional(r.fgpa)
        << "," << format_optional(r.fgpe) << "," << f.train_pages.size() << ","
        << f.test_pages.size() << "\n";
  };
  if (wants_raw(mode)) row("off", f.raw);
  if (wants_post(mode)) row("on", f.post);
}

inline void write_summary_csv(std::ostream& out, const SweepResult& s, bool post) {
  out << "point_value,fgpe_min,fgpe_avg,fgpe_max\n";
  for (const auto& p : s.points) {
    const auto& st = post ? p.post : p.raw;
    out << format_optional(p.value) << ",";
    if (st)
      out << format_optional(st->min) << "," << format_optional(st->avg) << ","
          << format_optional(st->max) << "\n";
    else
      out << ",,\n";
  }
}

}  // namespace folioseg
