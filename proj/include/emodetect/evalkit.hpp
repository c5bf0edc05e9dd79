#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emodetect/corpora.hpp"

namespace emodetect::evalkit {

// Gold-by-predicted counts. Two labels plus a designated positive class give
// the binary tp/fp/fn/tn view; anything larger stays a k-by-k matrix.
struct ConfusionCounts {
  std::vector<std::string> labels;  // class names, sorted
  std::vector<std::size_t> matrix;  // k*k row-major, row = gold, column = predicted
  std::optional<std::string> positive_class;

  static ConfusionCounts binary(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn,
                                std::string positive = "synthetic",
                                std::string negative = "human");

  std::size_t k() const { return labels.size(); }
  bool is_binary() const { return labels.size() == 2 && positive_class.has_value(); }
  std::size_t at(std::size_t gold, std::size_t pred) const { return matrix[gold * k() + pred]; }
  std::size_t total() const;

  // Binary accessors; throw unless is_binary().
  std::size_t tp() const;
  std::size_t fp() const;
  std::size_t fn() const;
  std::size_t tn() const;
};

ConfusionCounts confusion(const std::vector<std::string>& preds,
                          const std::vector<std::string>& golds,
                          const std::optional<std::string>& positive_class = std::nullopt);

// Percentage values at full precision; rounding to 2 decimals happens only at
// report boundaries (format2 / table rendering). Ratios with a zero
// denominator report 0 with the corresponding undefined flag set.
struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> f1_micro;
  std::string positive_class;
  std::size_t n = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

MetricsReport binary_metrics(const ConfusionCounts& counts);

// Micro-averaged F1 as a percentage; equals accuracy for single-label
// multiclass input (asserted internally to 1e-9).
double micro_f1(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

// Multiclass validation report: all four headline metrics carry the micro
// value, f1_micro is set explicitly.
MetricsReport micro_report(const std::vector<std::string>& preds,
                           const std::vector<std::string>& golds);

struct MetricVector {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> f1_micro;
};

struct AggregateReport {
  std::vector<MetricsReport> per_run;
  MetricsReport mean;
  MetricVector variance;              // population variance (divide by N)
  std::optional<MetricVector> delta;  // mean(candidate) - mean(baseline), when a baseline is given
};

AggregateReport aggregate_runs(const std::vector<MetricsReport>& reports,
                               const std::vector<MetricsReport>* baseline = nullptr);

// --- head-to-head comparison --------------------------------------------------

struct HeadToHeadMetric {
  std::string metric;
  std::vector<double> a_values;
  std::vector<double> b_values;
  std::vector<int> winner;  // per run: -1 a, 0 tie, +1 b
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  std::size_t ties = 0;
};

struct HeadToHead {
  std::string name_a;
  std::string name_b;
  std::vector<HeadToHeadMetric> metrics;  // precision, recall, f1, accuracy
  AggregateReport aggregate_a;
  AggregateReport aggregate_b;  // carries delta vs a
};

HeadToHead compare_models(const std::vector<MetricsReport>& a,
                          const std::vector<MetricsReport>& b, std::string name_a = "baseline",
                          std::string name_b = "candidate");

// --- correlation and length statistics ------------------------------------------------

double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Frozen segmentation rule: sentences end at a [.?!] run followed by
// whitespace and an uppercase start (or end of text), except after a known
// abbreviation. Bump the version whenever the rule changes.
inline constexpr std::string_view kSegmenterVersion = "sentence-segmenter.v1";
std::vector<std::string> split_sentences(std::string_view text);

struct LengthStatsReport {
  double words_per_article_mean = 0.0;
  double words_per_article_std = 0.0;
  double sentences_per_article_mean = 0.0;
  double sentences_per_article_std = 0.0;
  double words_per_sentence_mean = 0.0;  // pooled over sentences
  double words_per_sentence_std = 0.0;
  std::size_t articles = 0;
  std::optional<double> pearson_r;  // over paired human/synthetic word counts
};

struct LengthStatsPair {
  LengthStatsReport human;
  LengthStatsReport synthetic;
  std::size_t paired = 0;  // pairs feeding the correlation
};

LengthStatsPair length_stats(const corpora::Corpus& corpus);

}  // namespace emodetect::evalkit
