#include "emodetect/evalkit.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include "emodetect/errors.hpp"
#include "emodetect/util.hpp"

namespace emodetect::evalkit {
namespace {

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Population variance (divide by N), the convention the headline tables use.
double population_variance(const std::vector<double>& values) {
  const double mu = mean_of(values);
  double sum = 0.0;
  for (double v : values) sum += (v - mu) * (v - mu);
  return sum / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  return values.empty() ? 0.0 : std::sqrt(population_variance(values));
}

const std::set<std::string>& abbreviation_stoplist() {
  static const std::set<std::string> stoplist = {
      "mr", "mrs", "ms", "dr", "st", "vs", "etc", "prof", "inc", "ltd",
      "jr", "sr", "no", "vol", "fig", "e.g", "i.e", "cf", "al",
  };
  return stoplist;
}

// The token immediately before position `end` (exclusive), lowercased and
// without its trailing terminator run.
std::string preceding_token(std::string_view text, std::size_t end) {
  std::size_t stop = end;
  while (stop > 0 && !std::isspace(static_cast<unsigned char>(text[stop - 1]))) --stop;
  std::string token(text.substr(stop, end - stop));
  while (!token.empty() && (token.back() == '.' || token.back() == '?' || token.back() == '!')) {
    token.pop_back();
  }
  return util::to_lower(token);
}

}  // namespace

ConfusionCounts ConfusionCounts::binary(std::size_t tp, std::size_t fp, std::size_t fn,
                                        std::size_t tn, std::string positive,
                                        std::string negative) {
  ConfusionCounts counts;
  counts.labels = {negative, positive};
  if (counts.labels[0] > counts.labels[1]) std::swap(counts.labels[0], counts.labels[1]);
  counts.positive_class = positive;
  counts.matrix.assign(4, 0);
  const std::size_t p = counts.labels[0] == positive ? 0 : 1;
  const std::size_t o = 1 - p;
  counts.matrix[p * 2 + p] = tp;
  counts.matrix[p * 2 + o] = fn;
  counts.matrix[o * 2 + p] = fp;
  counts.matrix[o * 2 + o] = tn;
  return counts;
}

std::size_t ConfusionCounts::total() const {
  std::size_t sum = 0;
  for (std::size_t v : matrix) sum += v;
  return sum;
}

namespace {

std::size_t positive_index(const ConfusionCounts& c) {
  if (!c.is_binary()) throw MixedSchemaError("binary accessors need a two-class matrix");
  return c.labels[0] == *c.positive_class ? 0 : 1;
}

}  // namespace

std::size_t ConfusionCounts::tp() const {
  const std::size_t p = positive_index(*this);
  return at(p, p);
}
std::size_t ConfusionCounts::fp() const {
  const std::size_t p = positive_index(*this);
  return at(1 - p, p);
}
std::size_t ConfusionCounts::fn() const {
  const std::size_t p = positive_index(*this);
  return at(p, 1 - p);
}
std::size_t ConfusionCounts::tn() const {
  const std::size_t p = positive_index(*this);
  return at(1 - p, 1 - p);
}

ConfusionCounts confusion(const std::vector<std::string>& preds,
                          const std::vector<std::string>& golds,
                          const std::optional<std::string>& positive_class) {
  if (preds.size() != golds.size()) {
    throw LengthMismatchError("got " + std::to_string(preds.size()) + " predictions for " +
                              std::to_string(golds.size()) + " gold labels");
  }
  if (preds.empty()) throw LengthMismatchError("need at least one labeled example");

  std::set<std::string> universe(golds.begin(), golds.end());
  universe.insert(preds.begin(), preds.end());
  if (positive_class) {
    universe.insert(*positive_class);
    if (universe.size() > 2) {
      throw MixedSchemaError("positive class given but " + std::to_string(universe.size()) +
                             " distinct labels present");
    }
    // A degenerate stream (every label identical) still forms a 2x2 matrix.
    if (universe.size() == 1) {
      universe.insert(*positive_class == "synthetic" ? "human" : "other");
    }
  }

  ConfusionCounts counts;
  counts.labels.assign(universe.begin(), universe.end());
  counts.positive_class = positive_class;
  counts.matrix.assign(counts.labels.size() * counts.labels.size(), 0);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < counts.labels.size(); ++i) index[counts.labels[i]] = i;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    counts.matrix[index.at(golds[i]) * counts.labels.size() + index.at(preds[i])] += 1;
  }
  return counts;
}

MetricsReport binary_metrics(const ConfusionCounts& counts) {
  if (counts.total() == 0) throw EmptyCountsError();
  if (!counts.is_binary()) {
    throw MixedSchemaError("binary metrics need a two-class matrix with a positive class");
  }
  const double tp = static_cast<double>(counts.tp());
  const double fp = static_cast<double>(counts.fp());
  const double fn = static_cast<double>(counts.fn());
  const double tn = static_cast<double>(counts.tn());

  MetricsReport report;
  report.positive_class = *counts.positive_class;
  report.n = counts.total();

  if (tp + fp > 0) {
    report.precision = 100.0 * tp / (tp + fp);
  } else {
    report.precision_undefined = true;
  }
  if (tp + fn > 0) {
    report.recall = 100.0 * tp / (tp + fn);
  } else {
    report.recall_undefined = true;
  }
  if (report.precision + report.recall > 0 && !report.precision_undefined &&
      !report.recall_undefined) {
    report.f1 = 2.0 * report.precision * report.recall / (report.precision + report.recall);
  } else {
    report.f1_undefined = true;
  }
  report.accuracy = 100.0 * (tp + tn) / (tp + fp + fn + tn);
  return report;
}

double micro_f1(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
  const ConfusionCounts counts = confusion(preds, golds);
  const std::size_t k = counts.k();
  std::size_t diagonal = 0;
  std::size_t gold_total = 0;
  std::size_t pred_total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    diagonal += counts.at(c, c);
    for (std::size_t j = 0; j < k; ++j) {
      gold_total += counts.at(c, j);
      pred_total += counts.at(j, c);
    }
  }
  const double micro_p = 100.0 * static_cast<double>(diagonal) / static_cast<double>(pred_total);
  const double micro_r = 100.0 * static_cast<double>(diagonal) / static_cast<double>(gold_total);
  const double micro =
      (micro_p + micro_r) > 0.0 ? 2.0 * micro_p * micro_r / (micro_p + micro_r) : 0.0;

  // For single-label input micro F1 collapses to plain accuracy.
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) ++correct;
  }
  const double accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
  assert(std::abs(micro - accuracy) < 1e-9);
  (void)accuracy;
  return micro;
}

MetricsReport micro_report(const std::vector<std::string>& preds,
                           const std::vector<std::string>& golds) {
  const double micro = micro_f1(preds, golds);
  MetricsReport report;
  report.precision = micro;
  report.recall = micro;
  report.f1 = micro;
  report.accuracy = micro;
  report.f1_micro = micro;
  report.positive_class = "micro";
  report.n = preds.size();
  return report;
}

AggregateReport aggregate_runs(const std::vector<MetricsReport>& reports,
                               const std::vector<MetricsReport>* baseline) {
  if (reports.empty()) throw LengthMismatchError("need at least one run report");
  if (baseline != nullptr && baseline->size() != reports.size()) {
    throw LengthMismatchError("baseline has " + std::to_string(baseline->size()) +
                              " runs, candidate has " + std::to_string(reports.size()));
  }

  auto collect = [](const std::vector<MetricsReport>& rs, auto field) {
    std::vector<double> values;
    values.reserve(rs.size());
    for (const auto& r : rs) values.push_back(field(r));
    return values;
  };
  const auto precision = collect(reports, [](const MetricsReport& r) { return r.precision; });
  const auto recall = collect(reports, [](const MetricsReport& r) { return r.recall; });
  const auto f1 = collect(reports, [](const MetricsReport& r) { return r.f1; });
  const auto accuracy = collect(reports, [](const MetricsReport& r) { return r.accuracy; });

  AggregateReport agg;
  agg.per_run = reports;
  agg.mean.precision = mean_of(precision);
  agg.mean.recall = mean_of(recall);
  agg.mean.f1 = mean_of(f1);
  agg.mean.accuracy = mean_of(accuracy);
  agg.mean.positive_class = reports.front().positive_class;
  for (const auto& r : reports) agg.mean.n += r.n;
  agg.variance.precision = population_variance(precision);
  agg.variance.recall = population_variance(recall);
  agg.variance.f1 = population_variance(f1);
  agg.variance.accuracy = population_variance(accuracy);

  const bool all_micro = std::all_of(reports.begin(), reports.end(),
                                     [](const MetricsReport& r) { return r.f1_micro.has_value(); });
  if (all_micro) {
    const auto micro = collect(reports, [](const MetricsReport& r) { return *r.f1_micro; });
    agg.mean.f1_micro = mean_of(micro);
    agg.variance.f1_micro = population_variance(micro);
  }

  if (baseline != nullptr) {
    AggregateReport base = aggregate_runs(*baseline);
    MetricVector delta;
    delta.precision = agg.mean.precision - base.mean.precision;
    delta.recall = agg.mean.recall - base.mean.recall;
    delta.f1 = agg.mean.f1 - base.mean.f1;
    delta.accuracy = agg.mean.accuracy - base.mean.accuracy;
    if (agg.mean.f1_micro && base.mean.f1_micro) {
      delta.f1_micro = *agg.mean.f1_micro - *base.mean.f1_micro;
    }
    agg.delta = delta;
  }
  return agg;
}

HeadToHead compare_models(const std::vector<MetricsReport>& a,
                          const std::vector<MetricsReport>& b, std::string name_a,
                          std::string name_b) {
  if (a.size() != b.size()) throw RunCountMismatchError(a.size(), b.size());
  if (a.empty()) throw LengthMismatchError("need at least one run per side");

  HeadToHead head;
  head.name_a = std::move(name_a);
  head.name_b = std::move(name_b);

  struct Spec {
    const char* name;
    double (*get)(const MetricsReport&);
  };
  const Spec specs[4] = {
      {"precision", [](const MetricsReport& r) { return r.precision; }},
      {"recall", [](const MetricsReport& r) { return r.recall; }},
      {"f1", [](const MetricsReport& r) { return r.f1; }},
      {"accuracy", [](const MetricsReport& r) { return r.accuracy; }},
  };
  for (const auto& spec : specs) {
    HeadToHeadMetric metric;
    metric.metric = spec.name;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double va = spec.get(a[i]);
      const double vb = spec.get(b[i]);
      metric.a_values.push_back(va);
      metric.b_values.push_back(vb);
      if (va > vb) {
        metric.winner.push_back(-1);
        ++metric.a_wins;
      } else if (vb > va) {
        metric.winner.push_back(1);
        ++metric.b_wins;
      } else {
        metric.winner.push_back(0);
        ++metric.ties;
      }
    }
    head.metrics.push_back(std::move(metric));
  }
  head.aggregate_a = aggregate_runs(a);
  head.aggregate_b = aggregate_runs(b, &a);
  return head;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw LengthMismatchError("correlation needs equal-length sequences");
  }
  if (xs.size() < 2) throw DegenerateInputError("correlation needs at least two pairs");
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateInputError("correlation undefined: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') {
      ++i;
      continue;
    }
    const bool is_period_run = text[i] == '.';
    std::size_t run_end = i;
    while (run_end < n &&
           (text[run_end] == '.' || text[run_end] == '?' || text[run_end] == '!')) {
      ++run_end;
    }
    // Abbreviations only suppress plain '.' terminators.
    if (is_period_run && run_end - i == 1 &&
        abbreviation_stoplist().count(preceding_token(text, run_end))) {
      i = run_end;
      continue;
    }
    std::size_t next = run_end;
    while (next < n && std::isspace(static_cast<unsigned char>(text[next]))) ++next;
    bool boundary = false;
    if (next >= n) {
      boundary = true;
    } else if (next > run_end) {
      char head = text[next];
      if (head == '"' || head == '\'' || head == '(') {
        if (next + 1 < n) head = text[next + 1];
      }
      boundary = std::isupper(static_cast<unsigned char>(head)) ||
                 std::isdigit(static_cast<unsigned char>(head));
    }
    if (boundary) {
      const std::string sentence = util::trim(text.substr(start, run_end - start));
      if (!sentence.empty()) sentences.push_back(sentence);
      start = next;
      i = next;
    } else {
      i = run_end;
    }
  }
  const std::string tail = util::trim(text.substr(start));
  if (!tail.empty()) sentences.push_back(tail);
  return sentences;
}

namespace {

LengthStatsReport stats_for(const std::vector<const corpora::Doc*>& docs) {
  LengthStatsReport report;
  report.articles = docs.size();
  if (docs.empty()) return report;
  std::vector<double> words_per_article;
  std::vector<double> sentences_per_article;
  std::vector<double> words_per_sentence;
  for (const auto* doc : docs) {
    words_per_article.push_back(static_cast<double>(util::word_count(doc->text)));
    const auto sentences = split_sentences(doc->text);
    sentences_per_article.push_back(static_cast<double>(sentences.size()));
    for (const auto& sentence : sentences) {
      words_per_sentence.push_back(static_cast<double>(util::word_count(sentence)));
    }
  }
  report.words_per_article_mean = mean_of(words_per_article);
  report.words_per_article_std = population_std(words_per_article);
  report.sentences_per_article_mean = mean_of(sentences_per_article);
  report.sentences_per_article_std = population_std(sentences_per_article);
  if (!words_per_sentence.empty()) {
    report.words_per_sentence_mean = mean_of(words_per_sentence);
    report.words_per_sentence_std = population_std(words_per_sentence);
  }
  return report;
}

}  // namespace

LengthStatsPair length_stats(const corpora::Corpus& corpus) {
  if (corpus.schema != corpora::Schema::kBinaryAuthorship) {
    throw SchemaMismatchError("length statistics need a binary-authorship corpus");
  }
  std::vector<const corpora::Doc*> humans;
  std::vector<const corpora::Doc*> synths;
  std::unordered_map<std::string, const corpora::Doc*> by_id;
  for (const auto& doc : corpus.docs) {
    by_id.emplace(doc.id, &doc);
    if (std::get<corpora::Authorship>(doc.label) == corpora::Authorship::kHuman) {
      humans.push_back(&doc);
    } else {
      synths.push_back(&doc);
    }
  }
  if (humans.empty() || synths.empty()) {
    throw SchemaMismatchError("length statistics need both classes present");
  }

  LengthStatsPair pair;
  pair.human = stats_for(humans);
  pair.synthetic = stats_for(synths);

  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto* human : humans) {
    if (!human->pair_id) continue;
    auto it = by_id.find(*human->pair_id);
    if (it == by_id.end()) continue;
    if (std::get<corpora::Authorship>(it->second->label) != corpora::Authorship::kSynthetic) {
      continue;
    }
    xs.push_back(static_cast<double>(util::word_count(human->text)));
    ys.push_back(static_cast<double>(util::word_count(it->second->text)));
  }
  pair.paired = xs.size();
  if (xs.size() >= 2) {
    try {
      const double r = pearson(xs, ys);
      pair.human.pearson_r = r;
      pair.synthetic.pearson_r = r;
    } catch (const DegenerateInputError&) {
      // Correlation stays unset; the per-class stats are still valid.
    }
  }
  return pair;
}

}  // namespace emodetect::evalkit
