#include <gtest/gtest.h>

#include <sstream>

#include "folioseg/metrics.hpp"
#include "oracles.hpp"

using namespace folioseg;

namespace {

LabelMask mask2x2(int a, int b, int c, int d) {
  LabelMask m(2, 2);
  m.at(0, 0) = std::uint8_t(a);
  m.at(1, 0) = std::uint8_t(b);
  m.at(0, 1) = std::uint8_t(c);
  m.at(1, 1) = std::uint8_t(d);
  return m;
}

BinaryMask bin2x2(int a, int b, int c, int d) {
  BinaryMask m(2, 2);
  m.at(0, 0) = std::uint8_t(a);
  m.at(1, 0) = std::uint8_t(b);
  m.at(0, 1) = std::uint8_t(c);
  m.at(1, 1) = std::uint8_t(d);
  return m;
}

}  // namespace

TEST(Evaluate, PerfectPrediction) {
  oracle::Gen g(1);
  const LabelMask gt = oracle::random_labels(g, 7, 9, 4);
  const auto r = evaluate(gt, gt, oracle::random_binary(g, 7, 9, 0.5));
  EXPECT_EQ(r.tpa, 1.0);
  EXPECT_EQ(*r.fgpa, 1.0);
  EXPECT_EQ(*r.fgpe, 0.0);
}

TEST(Evaluate, HandEnumeratedTwoByTwo) {
  const auto r = evaluate(mask2x2(2, 1, 1, 3), mask2x2(2, 1, 1, 1), bin2x2(1, 0, 0, 1));
  EXPECT_EQ(r.tpa, 0.75);
  EXPECT_EQ(*r.fgpa, 0.5);
  EXPECT_EQ(*r.fgpe, 0.5);
  EXPECT_EQ(r.counts.confusion[3][1], 1u);
  EXPECT_EQ(r.counts.confusion[2][2], 1u);
}

TEST(Evaluate, NoForegroundLeavesFgpaAbsent) {
  const auto r = evaluate(mask2x2(1, 1, 1, 1), mask2x2(1, 1, 1, 2), BinaryMask(2, 2));
  EXPECT_FALSE(r.fgpa.has_value());
  EXPECT_FALSE(r.fgpe.has_value());
  EXPECT_EQ(r.tpa, 0.75);
}

TEST(Evaluate, MatchesNaiveLoop) {
  oracle::Gen g(2);
  for (int t = 0; t < 300; ++t) {
    const int w = oracle::uniform_int(g, 1, 20), h = oracle::uniform_int(g, 1, 20);
    const LabelMask gt = oracle::random_labels(g, w, h, 6), pred = oracle::random_labels(g, w, h, 6);
    const BinaryMask bin = oracle::random_binary(g, w, h, oracle::uniform(g, 0.0, 1.0));
    const auto r = evaluate(gt, pred, bin);
    const auto n = oracle::naive_metrics(gt, pred, bin);
    EXPECT_EQ(r.counts.total, n.total);
    EXPECT_EQ(r.counts.correct, n.correct);
    EXPECT_EQ(r.counts.foreground, n.fg);
    EXPECT_EQ(r.counts.foreground_correct, n.fg_correct);
  }
}

TEST(Evaluate, BackgroundMutationKeepsFgpa) {
  oracle::Gen g(3);
  const LabelMask gt = oracle::random_labels(g, 16, 16, 3);
  const BinaryMask bin = oracle::random_binary(g, 16, 16, 0.3);
  LabelMask pred = oracle::random_labels(g, 16, 16, 3);
  const auto base = evaluate(gt, pred, bin);
  for (size_t i = 0; i < pred.size(); ++i)
    if (!bin[i]) pred[i] = std::uint8_t(oracle::uniform_int(g, 0, 3));
  const auto mutated = evaluate(gt, pred, bin);
  EXPECT_EQ(*mutated.fgpa, *base.fgpa);
}

TEST(Evaluate, MajorityClassBaseline) {
  oracle::Gen g(4);
  const LabelMask gt = oracle::random_labels(g, 30, 20, 3);
  const BinaryMask bin = oracle::random_binary(g, 30, 20, 0.5);
  std::array<int, 4> freq{};
  int fg = 0;
  for (size_t i = 0; i < gt.size(); ++i)
    if (bin[i]) {
      ++freq[gt[i]];
      ++fg;
    }
  const int majority = int(std::max_element(freq.begin(), freq.end()) - freq.begin());
  const auto r = evaluate(gt, LabelMask(30, 20, std::uint8_t(majority)), bin);
  EXPECT_DOUBLE_EQ(*r.fgpa, double(freq[size_t(majority)]) / fg);
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate(LabelMask(2, 2), LabelMask(3, 2), BinaryMask(2, 2)), DataError);
  EXPECT_THROW(evaluate(LabelMask(2, 2), LabelMask(2, 2), BinaryMask(2, 1)), DataError);
  EXPECT_THROW(evaluate(LabelMask(1, 1, 9), LabelMask(1, 1), BinaryMask(1, 1, 1)), DataError);
}

TEST(Pooling, MicroAverageSumsCounts) {
  const auto a = evaluate(mask2x2(1, 1, 1, 1), mask2x2(1, 1, 1, 1), bin2x2(1, 0, 0, 0));
  const auto b = evaluate(mask2x2(1, 1, 1, 1), mask2x2(2, 2, 2, 1), bin2x2(1, 1, 1, 1));
  const std::vector<MetricsReport> pages{a, b};
  const auto p = pooled(pages);
  EXPECT_EQ(*p.fgpa, 2.0 / 5.0);
  EXPECT_EQ(p.tpa, 5.0 / 8.0);
  const auto m = macro_average(pages);
  EXPECT_EQ(*m.fgpa, (1.0 + 0.25) / 2);
}

TEST(Aggregate, MeanAndSampleStd) {
  const std::vector<double> two{0.9, 1.0};
  const auto s = aggregate(two);
  EXPECT_NEAR(s.mean, 0.95, 1e-15);
  EXPECT_NEAR(*s.stddev, 0.0707106781186548, 1e-12);

  const std::vector<double> same{0.5, 0.5, 0.5};
  EXPECT_EQ(*aggregate(same).stddev, 0.0);

  const std::vector<double> one{0.3};
  EXPECT_FALSE(aggregate(one).stddev.has_value());
  EXPECT_THROW(aggregate(std::span<const double>{}), DataError);
}

TEST(Aggregate, AbsentFgpaExcluded) {
  const auto blank = evaluate(LabelMask(2, 2, 1), LabelMask(2, 2, 1), BinaryMask(2, 2));
  const auto inked = evaluate(mask2x2(1, 1, 1, 1), mask2x2(1, 2, 1, 1), bin2x2(1, 1, 0, 0));
  const std::vector<MetricsReport> folds{blank, inked};
  const auto a = aggregate(folds);
  EXPECT_EQ(a.fgpa_absent, 1u);
  EXPECT_EQ(a.fgpa->n, 1u);
  EXPECT_EQ(a.fgpa->mean, 0.5);
  EXPECT_EQ(a.tpa.n, 2u);
}

TEST(Csv, RowsFormatAbsentAsEmpty) {
  std::ostringstream out;
  write_metrics_header(out);
  write_metrics_row(out, "p1", false, evaluate(LabelMask(1, 1, 1), LabelMask(1, 1, 1), BinaryMask(1, 1)));
  EXPECT_EQ(out.str(), "page,postproc,total_pixels,foreground_pixels,tpa,fgpa,fgpe\np1,off,1,0,1,,\n");
}
