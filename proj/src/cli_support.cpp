#include "emodetect/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "emodetect/errors.hpp"
#include "emodetect/util.hpp"

namespace emodetect::cli {

using json = nlohmann::json;

namespace {

json stage_to_json(const StageSpec& stage) {
  json out;
  out["task_schema"] = corpora::to_string(stage.task_schema);
  out["dataset"] = stage.dataset.string();
  out["format"] = corpora::to_string(stage.format);
  if (stage.stage_name) out["stage_name"] = *stage.stage_name;
  if (stage.epochs) out["epochs"] = *stage.epochs;
  if (stage.batch_size) out["batch_size"] = *stage.batch_size;
  if (stage.grad_accum) out["grad_accum"] = *stage.grad_accum;
  if (stage.warmup_steps) out["warmup_steps"] = *stage.warmup_steps;
  if (stage.weight_decay) out["weight_decay"] = *stage.weight_decay;
  if (stage.learning_rate) out["learning_rate"] = *stage.learning_rate;
  if (stage.max_seq_len) out["max_seq_len"] = *stage.max_seq_len;
  if (stage.selection_metric) out["selection_metric"] = *stage.selection_metric;
  if (stage.ratios) out["ratios"] = *stage.ratios;
  return out;
}

StageSpec stage_from_json(const json& in, const std::filesystem::path& base_dir) {
  StageSpec stage;
  stage.task_schema = corpora::parse_schema(in.value("task_schema", "binary-authorship"));
  std::filesystem::path dataset = in.value("dataset", "");
  if (dataset.is_relative() && !base_dir.empty()) dataset = base_dir / dataset;
  stage.dataset = dataset;
  stage.format = corpora::parse_format(in.value("format", "corpus-jsonl"));
  if (in.contains("stage_name")) stage.stage_name = in.at("stage_name").get<std::string>();
  if (in.contains("epochs")) stage.epochs = in.at("epochs").get<int>();
  if (in.contains("batch_size")) stage.batch_size = in.at("batch_size").get<int>();
  if (in.contains("grad_accum")) stage.grad_accum = in.at("grad_accum").get<int>();
  if (in.contains("warmup_steps")) stage.warmup_steps = in.at("warmup_steps").get<int>();
  if (in.contains("weight_decay")) stage.weight_decay = in.at("weight_decay").get<double>();
  if (in.contains("learning_rate")) stage.learning_rate = in.at("learning_rate").get<double>();
  if (in.contains("max_seq_len")) stage.max_seq_len = in.at("max_seq_len").get<int>();
  if (in.contains("selection_metric")) {
    stage.selection_metric = in.at("selection_metric").get<std::string>();
  }
  if (in.contains("ratios")) stage.ratios = in.at("ratios").get<std::string>();
  return stage;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  return from_json_text(util::read_file(path), path.parent_path());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::filesystem::path& base_dir) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigInvalidError(std::string("invalid experiment config JSON: ") + e.what());
  }
  ExperimentConfig config;
  config.experiment_name = in.value("experiment_name", config.experiment_name);
  config.backbone_id = in.value("backbone_id", config.backbone_id);
  if (in.contains("profile")) {
    config.profile = trainer::parse_profile(in.at("profile").get<std::string>());
  }
  config.runs = in.value("runs", config.runs);
  if (in.contains("model_seeds")) {
    config.model_seeds = in.at("model_seeds").get<std::vector<std::int64_t>>();
  }
  if (in.contains("data_seed_bases")) {
    config.data_seed_bases = in.at("data_seed_bases").get<std::vector<std::int64_t>>();
  }
  if (in.contains("output_dir")) {
    std::filesystem::path dir = in.at("output_dir").get<std::string>();
    if (dir.is_relative() && !base_dir.empty()) dir = base_dir / dir;
    config.output_dir = dir;
  }
  if (in.contains("backbone_registry")) {
    std::filesystem::path reg = in.at("backbone_registry").get<std::string>();
    if (reg.is_relative() && !base_dir.empty()) reg = base_dir / reg;
    config.backbone_registry = reg;
  }
  config.jobs = in.value("jobs", config.jobs);
  if (!in.contains("stages") || !in.at("stages").is_array() || in.at("stages").empty()) {
    throw ConfigInvalidError("experiment config needs a non-empty 'stages' array");
  }
  for (const auto& stage : in.at("stages")) {
    config.stages.push_back(stage_from_json(stage, base_dir));
  }
  return config;
}

std::string ExperimentConfig::canonical_json() const {
  json out;
  out["experiment_name"] = experiment_name;
  out["backbone_id"] = backbone_id;
  out["profile"] = trainer::to_string(profile);
  out["runs"] = runs;
  out["model_seeds"] = model_seeds;
  out["data_seed_bases"] = data_seed_bases;
  out["output_dir"] = output_dir.string();
  out["jobs"] = jobs;
  json stages = json::array();
  for (const auto& stage : this->stages) stages.push_back(stage_to_json(stage));
  out["stages"] = std::move(stages);
  return out.dump();
}

std::string ExperimentConfig::digest() const { return util::hex64(util::fnv1a64(canonical_json())); }

trainer::ProtocolConfig ExperimentConfig::to_protocol() const {
  trainer::ProtocolConfig protocol;
  protocol.experiment_name = experiment_name;
  protocol.backbone_id = backbone_id;
  protocol.runs = runs;
  protocol.model_seeds = model_seeds;
  protocol.data_seed_bases = data_seed_bases;
  protocol.output_dir = output_dir;
  protocol.config_digest = digest();
  protocol.jobs = jobs;
  if (!backbone_registry.empty()) {
    protocol.registry = backend::load_backbone_registry(backbone_registry);
  }
  for (const auto& spec : stages) {
    trainer::StagePlan plan;
    plan.config = trainer::default_stage_config(profile, spec.task_schema);
    if (spec.stage_name) plan.config.stage_name = *spec.stage_name;
    if (spec.epochs) plan.config.epochs = *spec.epochs;
    if (spec.batch_size) plan.config.batch_size = *spec.batch_size;
    if (spec.grad_accum) plan.config.grad_accum = *spec.grad_accum;
    if (spec.warmup_steps) plan.config.warmup_steps = *spec.warmup_steps;
    if (spec.weight_decay) plan.config.weight_decay = *spec.weight_decay;
    if (spec.learning_rate) plan.config.learning_rate = *spec.learning_rate;
    if (spec.max_seq_len) plan.config.max_seq_len = *spec.max_seq_len;
    if (spec.selection_metric) {
      plan.config.selection_metric = trainer::parse_selection_metric(*spec.selection_metric);
    }
    if (spec.ratios) plan.config.ratios = corpora::SplitRatios::parse(*spec.ratios);
    plan.dataset = corpora::load_corpus(spec.dataset, spec.format);
    protocol.stages.push_back(std::move(plan));
  }
  return protocol;
}

// --- rendering -------------------------------------------------------------------------

namespace {

constexpr const char* kMetricHeads[4] = {"Precision", "Recall", "F1", "Accuracy"};

double metric_of(const evalkit::MetricsReport& report, int metric) {
  switch (metric) {
    case 0: return report.precision;
    case 1: return report.recall;
    case 2: return report.f1;
    default: return report.accuracy;
  }
}

double metric_of(const evalkit::MetricVector& vec, int metric) {
  switch (metric) {
    case 0: return vec.precision;
    case 1: return vec.recall;
    case 2: return vec.f1;
    default: return vec.accuracy;
  }
}

std::string padded(const std::string& text, std::size_t width) {
  std::string out = text;
  while (out.size() < width) out += ' ';
  return out;
}

std::string signed2(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.2f", util::round2_half_up(value));
  return std::string(buf);
}

}  // namespace

std::string render_comparison_text(const trainer::RunSetResult& candidate,
                                   const trainer::RunSetResult* baseline) {
  const auto cand = candidate.completed_test_metrics();
  if (cand.empty()) throw ConfigInvalidError("no completed runs to report");
  std::vector<evalkit::MetricsReport> base;
  if (baseline != nullptr) {
    base = baseline->completed_test_metrics();
    if (base.size() != cand.size()) {
      throw RunCountMismatchError(base.size(), cand.size());
    }
  }
  const bool paired = baseline != nullptr;
  const evalkit::AggregateReport agg_c =
      paired ? evalkit::aggregate_runs(cand, &base) : evalkit::aggregate_runs(cand);
  const std::optional<evalkit::AggregateReport> agg_b =
      paired ? std::optional<evalkit::AggregateReport>(evalkit::aggregate_runs(base))
             : std::nullopt;

  const std::string name_b = paired ? baseline->experiment_name : "";
  const std::string name_c = candidate.experiment_name;
  const std::size_t col = std::max<std::size_t>(
      8, std::max(name_b.size(), name_c.size()) + 1);

  std::ostringstream out;
  out << "# config " << candidate.config_digest;
  if (paired && !baseline->config_digest.empty()) out << " baseline=" << baseline->config_digest;
  out << "\n";

  out << padded("Run", 6);
  for (const auto* head : kMetricHeads) {
    out << padded(head, paired ? 2 * col : col);
  }
  out << "\n";
  if (paired) {
    out << padded("", 6);
    for (int m = 0; m < 4; ++m) {
      out << padded(name_b, col) << padded(name_c, col);
    }
    out << "\n";
  }

  for (std::size_t r = 0; r < cand.size(); ++r) {
    out << padded(std::to_string(r + 1), 6);
    for (int m = 0; m < 4; ++m) {
      if (paired) out << padded(util::format2(metric_of(base[r], m)), col);
      out << padded(util::format2(metric_of(cand[r], m)), col);
    }
    out << "\n";
  }

  out << padded("Mean", 6);
  for (int m = 0; m < 4; ++m) {
    if (paired) out << padded(util::format2(metric_of(agg_b->mean, m)), col);
    out << padded(util::format2(metric_of(agg_c.mean, m)), col);
  }
  out << "\n";
  out << padded("Var.", 6);
  for (int m = 0; m < 4; ++m) {
    if (paired) out << padded("(" + util::format2(metric_of(agg_b->variance, m)) + ")", col);
    out << padded("(" + util::format2(metric_of(agg_c.variance, m)) + ")", col);
  }
  out << "\n";
  if (paired && agg_c.delta) {
    out << padded("D", 6);
    for (int m = 0; m < 4; ++m) {
      out << padded(signed2(metric_of(*agg_c.delta, m)), 2 * col);
    }
    out << "\n";
  }
  return out.str();
}

std::string render_comparison_tsv(const trainer::RunSetResult& candidate,
                                  const trainer::RunSetResult* baseline) {
  const auto cand = candidate.completed_test_metrics();
  if (cand.empty()) throw ConfigInvalidError("no completed runs to report");
  std::vector<evalkit::MetricsReport> base;
  const bool paired = baseline != nullptr;
  if (paired) {
    base = baseline->completed_test_metrics();
    if (base.size() != cand.size()) throw RunCountMismatchError(base.size(), cand.size());
  }
  const evalkit::AggregateReport agg_c =
      paired ? evalkit::aggregate_runs(cand, &base) : evalkit::aggregate_runs(cand);
  const std::optional<evalkit::AggregateReport> agg_b =
      paired ? std::optional<evalkit::AggregateReport>(evalkit::aggregate_runs(base))
             : std::nullopt;

  std::ostringstream out;
  out << "# config\t" << candidate.config_digest;
  if (paired && !baseline->config_digest.empty()) out << "\t" << baseline->config_digest;
  out << "\n";
  out << "row";
  for (const auto* head : kMetricHeads) {
    const std::string metric = util::to_lower(head);
    if (paired) out << '\t' << metric << "_baseline";
    out << '\t' << metric;
  }
  out << "\n";
  for (std::size_t r = 0; r < cand.size(); ++r) {
    out << (r + 1);
    for (int m = 0; m < 4; ++m) {
      if (paired) out << '\t' << util::format2(metric_of(base[r], m));
      out << '\t' << util::format2(metric_of(cand[r], m));
    }
    out << "\n";
  }
  out << "mean";
  for (int m = 0; m < 4; ++m) {
    if (paired) out << '\t' << util::format2(metric_of(agg_b->mean, m));
    out << '\t' << util::format2(metric_of(agg_c.mean, m));
  }
  out << "\n";
  out << "variance";
  for (int m = 0; m < 4; ++m) {
    if (paired) out << '\t' << util::format2(metric_of(agg_b->variance, m));
    out << '\t' << util::format2(metric_of(agg_c.variance, m));
  }
  out << "\n";
  if (paired && agg_c.delta) {
    out << "delta";
    for (int m = 0; m < 4; ++m) {
      out << '\t' << '\t' << signed2(metric_of(*agg_c.delta, m));
    }
    out << "\n";
  }
  return out.str();
}

ReportBundle emit_report(const trainer::RunSetResult& candidate,
                         const trainer::RunSetResult* baseline,
                         const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  ReportBundle bundle;
  auto write = [&](const std::filesystem::path& name, const std::string& content) {
    const auto path = outdir / name;
    util::atomic_write_file(path, content);
    bundle.files.push_back(path);
  };
  write("comparison.txt", render_comparison_text(candidate, baseline));
  write("comparison.tsv", render_comparison_tsv(candidate, baseline));
  write("runset-" + candidate.experiment_name + ".json", trainer::runset_to_json(candidate));
  if (baseline != nullptr) {
    write("runset-" + baseline->experiment_name + ".json", trainer::runset_to_json(*baseline));
  }
  return bundle;
}

std::string render_length_stats(const evalkit::LengthStatsPair& stats) {
  std::ostringstream out;
  out << "# segmenter " << evalkit::kSegmenterVersion << "\n";
  out << "source\twords_per_article_mean\twords_per_article_std\t"
         "sentences_per_article_mean\tsentences_per_article_std\t"
         "words_per_sentence_mean\twords_per_sentence_std\tarticles\n";
  auto row = [&](const char* name, const evalkit::LengthStatsReport& r) {
    out << name << '\t' << util::format2(r.words_per_article_mean) << '\t'
        << util::format2(r.words_per_article_std) << '\t'
        << util::format2(r.sentences_per_article_mean) << '\t'
        << util::format2(r.sentences_per_article_std) << '\t'
        << util::format2(r.words_per_sentence_mean) << '\t'
        << util::format2(r.words_per_sentence_std) << '\t' << r.articles << "\n";
  };
  row("human", stats.human);
  row("synthetic", stats.synthetic);
  if (stats.human.pearson_r) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", *stats.human.pearson_r);
    out << "pearson_r\t" << buf << "\tpairs\t" << stats.paired << "\n";
  }
  return out.str();
}

ReportBundle write_length_plotdata(const corpora::Corpus& corpus,
                                   const evalkit::LengthStatsPair& stats,
                                   const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  ReportBundle bundle;

  std::ostringstream counts;
  counts << "doc_id\tclass\twords\tsentences\n";
  std::ostringstream scatter;
  scatter << "human_id\tsynthetic_id\thuman_words\tsynthetic_words\n";

  std::map<std::string, const corpora::Doc*> by_id;
  for (const auto& doc : corpus.docs) by_id.emplace(doc.id, &doc);
  for (const auto& doc : corpus.docs) {
    const auto cls = std::get<corpora::Authorship>(doc.label);
    counts << doc.id << '\t' << corpora::to_string(cls) << '\t' << util::word_count(doc.text)
           << '\t' << evalkit::split_sentences(doc.text).size() << "\n";
    if (cls == corpora::Authorship::kHuman && doc.pair_id && by_id.count(*doc.pair_id)) {
      scatter << doc.id << '\t' << *doc.pair_id << '\t' << util::word_count(doc.text) << '\t'
              << util::word_count(by_id.at(*doc.pair_id)->text) << "\n";
    }
  }

  auto write = [&](const std::filesystem::path& name, const std::string& content) {
    const auto path = outdir / name;
    util::atomic_write_file(path, content);
    bundle.files.push_back(path);
  };
  write("length-stats.tsv", render_length_stats(stats));
  write("length-counts.tsv", counts.str());
  write("length-scatter-pairs.tsv", scatter.str());
  return bundle;
}

}  // namespace emodetect::cli
