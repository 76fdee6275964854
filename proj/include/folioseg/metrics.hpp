#pragma once

// Total Pixel Accuracy, Foreground Pixel Accuracy and Foreground Pixel
// Error. FgPA only looks at pixels the binarization marks as ink, so any
// change confined to background pixels leaves it unchanged.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/image.hpp"

namespace folioseg {

inline constexpr int max_label = 6;

/// Raw tallies; pooling these across pages before dividing gives the
/// dataset-level (micro-averaged) metrics.
struct PixelCounts {
  std::uint64_t total = 0;
  std::uint64_t foreground = 0;
  std::uint64_t correct = 0;
  std::uint64_t foreground_correct = 0;
  /// confusion[gt][pred], foreground pixels only.
  std::array<std::array<std::uint64_t, max_label + 1>, max_label + 1> confusion{};

  PixelCounts& operator+=(const PixelCounts& o) {
    total += o.total;
    foreground += o.foreground;
    correct += o.correct;
    foreground_correct += o.foreground_correct;
    for (size_t i = 0; i < confusion.size(); ++i)
      for (size_t j = 0; j < confusion.size(); ++j) confusion[i][j] += o.confusion[i][j];
    return *this;
  }
  friend bool operator==(const PixelCounts&, const PixelCounts&) = default;
};

struct MetricsReport {
  double tpa = 0.0;
  /// Absent when there are no foreground pixels.
  std::optional<double> fgpa;
  std::optional<double> fgpe;
  PixelCounts counts;
};

inline PixelCounts count_pixels(const LabelMask& gt, const LabelMask& pred, const BinaryMask& bin) {
  require_same_dims(pred, gt.width(), gt.height(), "evaluate: prediction vs ground truth");
  require_same_dims(bin, gt.width(), gt.height(), "evaluate: binarization vs ground truth");
  PixelCounts c;
  c.total = gt.size();
  for (size_t i = 0; i < gt.size(); ++i) {
    const bool hit = gt[i] == pred[i];
    c.correct += hit;
    if (bin[i]) {
      if (gt[i] > max_label || pred[i] > max_label)
        throw DataError("evaluate: label exceeds " + std::to_string(max_label));
      ++c.foreground;
      c.foreground_correct += hit;
      ++c.confusion[gt[i]][pred[i]];
    }
  }
  return c;
}

inline MetricsReport report_from(const PixelCounts& c) {
  MetricsReport r;
  r.counts = c;
  r.tpa = c.total ? double(c.correct) / double(c.total) : 0.0;
  if (c.foreground > 0) {
    r.fgpa = double(c.foreground_correct) / double(c.foreground);
    r.fgpe = 1.0 - *r.fgpa;
  }
  return r;
}

inline MetricsReport evaluate(const LabelMask& gt, const LabelMask& pred, const BinaryMask& bin) {
  return report_from(count_pixels(gt, pred, bin));
}

/// Micro-average: pixel counts are summed over pages before dividing.
inline MetricsReport pooled(std::span<const MetricsReport> pages) {
  PixelCounts sum;
  for (const auto& p : pages) sum += p.counts;
  return report_from(sum);
}

struct MetricSummary {
  double mean = 0.0;
  /// Sample (n-1) standard deviation; absent for a single value.
  std::optional<double> stddev;
  size_t n = 0;
};

inline MetricSummary aggregate(std::span<const double> values) {
  if (values.empty()) throw DataError("aggregate: no values");
  MetricSummary s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / double(s.n);
  if (s.n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / double(s.n - 1));
  }
  return s;
}

struct AggregateReport {
  MetricSummary tpa;
  std::optional<MetricSummary> fgpa;
  std::optional<MetricSummary> fgpe;
  /// Reports with undefined FgPA, left out of the FgPA/FgPE summaries.
  size_t fgpa_absent = 0;
};

/// Unweighted mean and sample std over reports (e.g. one per fold).
inline AggregateReport aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw DataError("aggregate: empty report list");
  std::vector<double> tpa, fgpa, fgpe;
  AggregateReport out;
  for (const auto& r : reports) {
    tpa.push_back(r.tpa);
    if (r.fgpa) {
      fgpa.push_back(*r.fgpa);
      fgpe.push_back(*r.fgpe);
    } else {
      ++out.fgpa_absent;
    }
  }
  out.tpa = aggregate(tpa);
  if (!fgpa.empty()) {
    out.fgpa = aggregate(fgpa);
    out.fgpe = aggregate(fgpe);
  }
  return out;
}

/// Per-page macro-average, for comparison with the pooled figures.
inline MetricsReport macro_average(std::span<const MetricsReport> pages) {
  if (pages.empty()) throw DataError("macro_average: no pages");
  const AggregateReport a = aggregate(pages);
  MetricsReport r = pooled(pages);
  r.tpa = a.tpa.mean;
  r.fgpa.reset();
  r.fgpe.reset();
  if (a.fgpa) {
    r.fgpa = a.fgpa->mean;
    r.fgpe = 1.0 - *r.fgpa;
  }
  return r;
}

// ------------------------------------------------------------- CSV output

inline std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

inline void write_metrics_header(std::ostream& out) {
  out << "page,postproc,total_pixels,foreground_pixels,tpa,fgpa,fgpe\n";
}

inline void write_metrics_row(std::ostream& out, const std::string& page, bool postproc,
                              const MetricsReport& r) {
  out << page << "," << (postproc ? "on" : "off") << "," << r.counts.total << ","
      << r.counts.foreground << "," << format_optional(r.tpa) << "," << format_optional(r.fgpa)
      << "," << format_optional(r.fgpe) << "\n";
}

}  // namespace folioseg
