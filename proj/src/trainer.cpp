#include "emodetect/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "emodetect/errors.hpp"
#include "emodetect/json_io.hpp"
#include "emodetect/util.hpp"

namespace emodetect::trainer {

using json = nlohmann::json;

std::string to_string(SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::kAccuracy: return "accuracy";
    case SelectionMetric::kF1Micro: return "f1_micro";
    case SelectionMetric::kF1: return "f1";
  }
  return "unknown";
}

SelectionMetric parse_selection_metric(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "accuracy") return SelectionMetric::kAccuracy;
  if (norm == "f1_micro" || norm == "f1u" || norm == "f1-micro") return SelectionMetric::kF1Micro;
  if (norm == "f1") return SelectionMetric::kF1;
  throw ConfigInvalidError("unknown selection metric: " + std::string(text));
}

std::string to_string(Profile profile) {
  return profile == Profile::kPaper ? "paper" : "desk";
}

Profile parse_profile(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "paper") return Profile::kPaper;
  if (norm == "desk") return Profile::kDesk;
  throw ConfigInvalidError("unknown profile: " + std::string(text));
}

void StageConfig::validate() const {
  const int expected = task_schema == corpora::Schema::kEmotion6 ? 6 : 2;
  if (num_classes != expected) {
    throw ConfigInvalidError("stage '" + stage_name + "': schema " +
                             corpora::to_string(task_schema) + " implies " +
                             std::to_string(expected) + " classes, got " +
                             std::to_string(num_classes));
  }
  if (epochs < 1) throw ConfigInvalidError("stage '" + stage_name + "': epochs must be >= 1");
  if (batch_size < 1 || grad_accum < 1) {
    throw ConfigInvalidError("stage '" + stage_name + "': batch and accumulation must be >= 1");
  }
  if (warmup_steps < 0 || weight_decay < 0.0) {
    throw ConfigInvalidError("stage '" + stage_name + "': negative warmup or weight decay");
  }
  if (max_seq_len < 1) throw ConfigInvalidError("stage '" + stage_name + "': max_seq_len >= 1");
  if (learning_rate <= 0.0) {
    throw ConfigInvalidError("stage '" + stage_name + "': learning rate must be positive");
  }
}

StageConfig default_stage_config(Profile profile, corpora::Schema task_schema) {
  StageConfig cfg;
  cfg.task_schema = task_schema;
  cfg.num_classes = task_schema == corpora::Schema::kEmotion6 ? 6 : 2;
  switch (task_schema) {
    case corpora::Schema::kBinaryAuthorship:
      cfg.stage_name = "detection";
      cfg.selection_metric = SelectionMetric::kAccuracy;
      break;
    case corpora::Schema::kEmotion6:
      cfg.stage_name = "emotion";
      cfg.selection_metric = SelectionMetric::kF1Micro;
      break;
    case corpora::Schema::kSentiment2:
      cfg.stage_name = "sentiment";
      cfg.selection_metric = SelectionMetric::kAccuracy;
      break;
  }
  if (profile == Profile::kPaper) {
    cfg.epochs = task_schema == corpora::Schema::kEmotion6 ? 10 : 4;
    cfg.batch_size = 7;
    cfg.grad_accum = 8;
    cfg.warmup_steps = 500;
    cfg.weight_decay = 0.01;
    cfg.max_seq_len = 512;
    cfg.learning_rate = 5e-5;
  } else {
    cfg.epochs = task_schema == corpora::Schema::kEmotion6 ? 3 : 4;
    cfg.batch_size = 8;
    cfg.grad_accum = 1;
    cfg.warmup_steps = 0;
    cfg.weight_decay = 0.01;
    cfg.max_seq_len = 64;
    cfg.learning_rate = 5e-3;
  }
  return cfg;
}

void ProtocolConfig::validate() const {
  if (runs < 1) throw ConfigInvalidError("protocol needs at least one run");
  if (model_seeds.size() != static_cast<std::size_t>(runs) ||
      data_seed_bases.size() != static_cast<std::size_t>(runs)) {
    throw ConfigInvalidError("seed lists must have exactly one entry per run");
  }
  if (stages.empty()) throw ConfigInvalidError("protocol needs at least one stage");
  for (const auto& stage : stages) {
    stage.config.validate();
    if (stage.dataset.schema != stage.config.task_schema) {
      throw SchemaMismatchError("stage '" + stage.config.stage_name + "' dataset schema " +
                                corpora::to_string(stage.dataset.schema) +
                                " does not match task schema " +
                                corpora::to_string(stage.config.task_schema));
    }
  }
}

namespace {

int label_index(const corpora::DocLabel& label) {
  if (std::holds_alternative<corpora::Authorship>(label)) {
    return static_cast<int>(std::get<corpora::Authorship>(label));
  }
  if (std::holds_alternative<emotaxon::EkmanLabel>(label)) {
    return static_cast<int>(std::get<emotaxon::EkmanLabel>(label));
  }
  return static_cast<int>(std::get<emotaxon::SentimentLabel>(label));
}

std::string class_name(corpora::Schema schema, int index) {
  switch (schema) {
    case corpora::Schema::kBinaryAuthorship:
      return to_string(static_cast<corpora::Authorship>(index));
    case corpora::Schema::kEmotion6:
      return to_string(static_cast<emotaxon::EkmanLabel>(index));
    case corpora::Schema::kSentiment2:
      return to_string(static_cast<emotaxon::SentimentLabel>(index));
  }
  return "?";
}

double metric_value(const evalkit::MetricsReport& report, SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::kAccuracy: return report.accuracy;
    case SelectionMetric::kF1Micro: return report.f1_micro.value_or(report.accuracy);
    case SelectionMetric::kF1: return report.f1;
  }
  return report.accuracy;
}

class ManifestLog {
 public:
  explicit ManifestLog(const std::filesystem::path& path) {
    if (path.empty()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    stream_.open(path, std::ios::app);
  }

  void append(json record) {
    if (!stream_.is_open()) return;
    stream_ << record.dump() << '\n';
    stream_.flush();  // crash-safe: every event lands on disk immediately
  }

 private:
  std::ofstream stream_;
};

}  // namespace

evalkit::MetricsReport evaluate_model(const backend::ClassifierModel& model,
                                      const corpora::Corpus& eval_corpus,
                                      const StageConfig& cfg) {
  if (eval_corpus.schema != cfg.task_schema) {
    throw SchemaMismatchError("evaluation corpus schema does not match stage schema");
  }
  std::vector<std::string> texts;
  std::vector<std::string> golds;
  texts.reserve(eval_corpus.docs.size());
  for (const auto& doc : eval_corpus.docs) {
    texts.push_back(doc.text);
    golds.push_back(corpora::label_to_string(doc.label));
  }
  const auto predictions = backend::predict(model, texts, cfg.max_seq_len);
  std::vector<std::string> preds;
  preds.reserve(predictions.size());
  for (const auto& p : predictions) preds.push_back(class_name(cfg.task_schema, p.label));

  evalkit::MetricsReport report;
  if (cfg.task_schema == corpora::Schema::kEmotion6) {
    report = evalkit::micro_report(preds, golds);
  } else {
    const std::string positive =
        cfg.task_schema == corpora::Schema::kBinaryAuthorship ? "synthetic" : "positive";
    report = evalkit::binary_metrics(evalkit::confusion(preds, golds, positive));
    // Single-label micro F1 equals accuracy; recorded so any stage can select
    // on it.
    report.f1_micro = evalkit::micro_f1(preds, golds);
  }
  return report;
}

StageResult run_stage(backend::ClassifierModel& model, const corpora::SplitSet& splits,
                      const StageConfig& cfg, const StageContext& ctx) {
  cfg.validate();
  if (model.num_classes() != cfg.num_classes) {
    throw SchemaMismatchError("model has " + std::to_string(model.num_classes()) +
                              " classes, stage needs " + std::to_string(cfg.num_classes));
  }
  if (splits.train.schema != cfg.task_schema) {
    throw SchemaMismatchError("split schema does not match stage schema");
  }

  ManifestLog manifest(ctx.manifest_path);
  const std::size_t n_train = splits.train.docs.size();
  const long steps_per_epoch = static_cast<long>(
      (n_train + static_cast<std::size_t>(cfg.batch_size) * cfg.grad_accum - 1) /
      (static_cast<std::size_t>(cfg.batch_size) * cfg.grad_accum));
  backend::TrainOptions options;
  options.learning_rate = cfg.learning_rate;
  options.weight_decay = cfg.weight_decay;
  options.warmup_steps = cfg.warmup_steps;
  options.total_steps = steps_per_epoch * cfg.epochs;
  options.max_len = cfg.max_seq_len;
  backend::AdamW optimizer(options, model.parameters());
  backend::GradAccumulator acc = backend::make_accumulator(model);

  StageResult result;
  result.stage_name = cfg.stage_name;
  double best_value = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fresh epoch order, reseeded deterministically from the train seed.
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
    util::Rng epoch_rng(util::mix_seeds(static_cast<std::uint64_t>(ctx.data_seeds.train),
                                        static_cast<std::uint64_t>(epoch)));
    util::seeded_shuffle(order, epoch_rng);

    double loss_sum = 0.0;
    long loss_count = 0;
    long step_in_epoch = 0;
    std::size_t cursor = 0;
    int micro_batches = 0;
    try {
      while (cursor < n_train) {
        std::vector<std::string> texts;
        std::vector<int> labels;
        for (std::size_t b = 0; b < static_cast<std::size_t>(cfg.batch_size) && cursor < n_train;
             ++b, ++cursor) {
          const auto& doc = splits.train.docs[order[cursor]];
          texts.push_back(doc.text);
          labels.push_back(label_index(doc.label));
        }
        backend::accumulate_gradients(model, texts, labels, cfg.max_seq_len, acc);
        ++micro_batches;
        if (micro_batches == cfg.grad_accum || cursor >= n_train) {
          loss_sum += acc.loss_sum;
          loss_count += acc.examples;
          backend::apply_step(model, acc, optimizer);
          micro_batches = 0;
          ++step_in_epoch;
        }
      }
    } catch (const NonFiniteLossError&) {
      throw NonFiniteLossError(epoch, step_in_epoch);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    record.val_metrics = evaluate_model(model, splits.val, cfg);
    record.checkpoint_dir = ctx.stage_dir / ("epoch-" + std::to_string(epoch));

    backend::CheckpointMeta meta;
    meta.stage_name = cfg.stage_name;
    meta.epoch = epoch;
    meta.val_metrics = record.val_metrics;
    meta.model_seed = ctx.model_seed;
    meta.data_seeds = ctx.data_seeds;
    meta.config_digest = ctx.config_digest;
    backend::save_checkpoint(model, meta, record.checkpoint_dir);

    manifest.append({{"event", "epoch"},
                     {"stage", cfg.stage_name},
                     {"epoch", epoch},
                     {"train_loss", record.train_loss},
                     {"val", json_io::metrics_to_json(record.val_metrics)},
                     {"checkpoint", record.checkpoint_dir.filename().string()}});

    const double value = metric_value(record.val_metrics, cfg.selection_metric);
    if (value > best_value) {  // strict: ties keep the earliest epoch
      best_value = value;
      result.best_epoch = epoch;
      result.best_checkpoint = record.checkpoint_dir;
    }
    result.epochs.push_back(std::move(record));
  }

  manifest.append({{"event", "stage-end"},
                   {"stage", cfg.stage_name},
                   {"best_epoch", result.best_epoch},
                   {"selection_metric", to_string(cfg.selection_metric)},
                   {"best_value", best_value}});
  return result;
}

PipelineResult run_pipeline(const std::string& encoder_id, const std::vector<StagePlan>& stages,
                            std::int64_t model_seed, std::int64_t data_seed_base,
                            const std::filesystem::path& run_dir,
                            const backend::BackboneRegistry& registry,
                            const std::string& config_digest) {
  if (stages.empty()) throw ConfigInvalidError("pipeline needs at least one stage");
  const corpora::SeedTriple seeds = corpora::derive_data_seeds(data_seed_base);
  const std::filesystem::path manifest_path = run_dir / "manifest.jsonl";
  ManifestLog manifest(manifest_path);
  manifest.append({{"event", "run-start"},
                   {"backbone", encoder_id},
                   {"model_seed", model_seed},
                   {"data_seed_base", data_seed_base},
                   {"data_seeds", {seeds.train, seeds.val, seeds.test}},
                   {"config_digest", config_digest}});

  backend::Encoder encoder = backend::load_encoder(encoder_id, registry);
  backend::ClassifierModel model =
      backend::attach_head(encoder, stages.front().config.num_classes, model_seed);

  PipelineResult result;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const StagePlan& plan = stages[k];
    if (k > 0) {
      const int needed = plan.config.num_classes;
      if (model.num_classes() != needed) {
        manifest.append({{"event", "head-swap"},
                         {"from", model.num_classes()},
                         {"to", needed},
                         {"encoder_fingerprint", model.encoder_fingerprint()}});
        model = backend::swap_head(model, needed, model_seed);
      }
    }

    const std::filesystem::path stage_dir =
        run_dir / ("stage-" + std::to_string(k) + "-" + plan.config.stage_name);
    corpora::SplitSet splits = corpora::make_seeded_split(plan.dataset, plan.config.ratios, seeds);
    corpora::write_split_manifest(splits, plan.dataset.digest(),
                                  stage_dir / "split-manifest.json");
    manifest.append({{"event", "stage-start"},
                     {"stage", plan.config.stage_name},
                     {"index", k},
                     {"dataset_digest", util::hex64(plan.dataset.digest())},
                     {"train", splits.train.docs.size()},
                     {"val", splits.val.docs.size()},
                     {"test", splits.test.docs.size()},
                     {"epochs", plan.config.epochs},
                     {"batch_size", plan.config.batch_size},
                     {"grad_accum", plan.config.grad_accum},
                     {"warmup_steps", plan.config.warmup_steps},
                     {"weight_decay", plan.config.weight_decay},
                     {"learning_rate", plan.config.learning_rate},
                     {"optimizer", plan.config.optimizer},
                     {"max_seq_len", plan.config.max_seq_len}});

    StageContext ctx;
    ctx.stage_dir = stage_dir;
    ctx.model_seed = model_seed;
    ctx.data_seeds = seeds;
    ctx.config_digest = config_digest;
    ctx.manifest_path = manifest_path;

    StageResult stage_result;
    try {
      stage_result = run_stage(model, splits, plan.config, ctx);
    } catch (const Error& e) {
      throw Error("stage " + std::to_string(k) + " (" + plan.config.stage_name +
                  "): " + e.what());
    }
    // Carry the best checkpoint forward, not the last epoch's weights.
    model = backend::load_checkpoint(stage_result.best_checkpoint).model;
    result.stage_results.push_back(std::move(stage_result));
    if (k + 1 == stages.size()) result.final_splits = std::move(splits);
  }
  result.final_model = std::move(model);
  return result;
}

std::vector<evalkit::MetricsReport> RunSetResult::completed_test_metrics() const {
  std::vector<evalkit::MetricsReport> reports;
  for (const auto& run : per_run) {
    if (run.completed) reports.push_back(run.test_metrics);
  }
  return reports;
}

RunSetResult run_protocol(const ProtocolConfig& config) {
  config.validate();
  RunSetResult result;
  result.experiment_name = config.experiment_name;
  result.config_digest = config.config_digest;
  result.per_run.resize(static_cast<std::size_t>(config.runs));

  auto execute_run = [&](int index) {
    RunResult& run = result.per_run[static_cast<std::size_t>(index)];
    run.run_index = index + 1;
    run.model_seed = config.model_seeds[static_cast<std::size_t>(index)];
    run.data_seed_base = config.data_seed_bases[static_cast<std::size_t>(index)];
    const std::filesystem::path run_dir =
        config.output_dir / config.experiment_name / ("run-" + std::to_string(run.run_index));
    try {
      PipelineResult pipeline =
          run_pipeline(config.backbone_id, config.stages, run.model_seed, run.data_seed_base,
                       run_dir, config.registry, config.config_digest);
      run.test_metrics = evaluate_model(pipeline.final_model, pipeline.final_splits.test,
                                        config.stages.back().config);
      run.final_checkpoint = pipeline.stage_results.back().best_checkpoint;
      run.stage_results = std::move(pipeline.stage_results);
      run.completed = true;
      ManifestLog manifest(run_dir / "manifest.jsonl");
      manifest.append({{"event", "run-end"},
                       {"test", json_io::metrics_to_json(run.test_metrics)},
                       {"final_checkpoint", run.final_checkpoint.string()}});
    } catch (const std::exception& e) {
      run.completed = false;
      run.error = e.what();
      ManifestLog manifest(run_dir / "manifest.jsonl");
      manifest.append({{"event", "run-failed"}, {"error", run.error}});
    }
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (int r = 0; r < config.runs; ++r) execute_run(r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      while (true) {
        const int r = next.fetch_add(1);
        if (r >= config.runs) break;
        execute_run(r);
      }
    };
    std::vector<std::thread> pool;
    const int width = std::min(jobs, config.runs);
    pool.reserve(static_cast<std::size_t>(width));
    for (int t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const auto completed = result.completed_test_metrics();
  result.completed = completed.size();
  if (!completed.empty()) {
    result.aggregate = evalkit::aggregate_runs(completed);
  }
  return result;
}

std::string runset_to_json(const RunSetResult& result) {
  json out;
  out["format"] = "emodetect-runset";
  out["version"] = 1;
  out["experiment_name"] = result.experiment_name;
  out["config_digest"] = result.config_digest;
  out["completed"] = result.completed;
  json runs = json::array();
  for (const auto& run : result.per_run) {
    json record;
    record["run_index"] = run.run_index;
    record["completed"] = run.completed;
    if (!run.completed) record["error"] = run.error;
    record["model_seed"] = run.model_seed;
    record["data_seed_base"] = run.data_seed_base;
    record["final_checkpoint"] = run.final_checkpoint.string();
    if (run.completed) record["test"] = json_io::metrics_to_json(run.test_metrics);
    json stages = json::array();
    for (const auto& stage : run.stage_results) {
      json stage_json;
      stage_json["stage_name"] = stage.stage_name;
      stage_json["best_epoch"] = stage.best_epoch;
      stage_json["best_checkpoint"] = stage.best_checkpoint.string();
      json epochs = json::array();
      for (const auto& epoch : stage.epochs) {
        epochs.push_back({{"epoch", epoch.epoch},
                          {"train_loss", epoch.train_loss},
                          {"val", json_io::metrics_to_json(epoch.val_metrics)}});
      }
      stage_json["epochs"] = std::move(epochs);
      stages.push_back(std::move(stage_json));
    }
    record["stages"] = std::move(stages);
    runs.push_back(std::move(record));
  }
  out["runs"] = std::move(runs);
  return out.dump(2) + "\n";
}

RunSetResult runset_from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigInvalidError(std::string("invalid runset JSON: ") + e.what());
  }
  if (in.value("format", "") != "emodetect-runset") {
    throw ConfigInvalidError("not an emodetect-runset file");
  }
  RunSetResult result;
  result.experiment_name = in.value("experiment_name", "");
  result.config_digest = in.value("config_digest", "");
  for (const auto& record : in.at("runs")) {
    RunResult run;
    run.run_index = record.value("run_index", 0);
    run.completed = record.value("completed", false);
    run.error = record.value("error", "");
    run.model_seed = record.value("model_seed", 0ll);
    run.data_seed_base = record.value("data_seed_base", 0ll);
    run.final_checkpoint = record.value("final_checkpoint", "");
    if (record.contains("test")) {
      run.test_metrics = json_io::metrics_from_json(record.at("test"));
    }
    if (record.contains("stages")) {
      for (const auto& stage_json : record.at("stages")) {
        StageResult stage;
        stage.stage_name = stage_json.value("stage_name", "");
        stage.best_epoch = stage_json.value("best_epoch", 0);
        stage.best_checkpoint = stage_json.value("best_checkpoint", "");
        if (stage_json.contains("epochs")) {
          for (const auto& epoch_json : stage_json.at("epochs")) {
            EpochRecord epoch;
            epoch.epoch = epoch_json.value("epoch", 0);
            epoch.train_loss = epoch_json.value("train_loss", 0.0);
            if (epoch_json.contains("val")) {
              epoch.val_metrics = json_io::metrics_from_json(epoch_json.at("val"));
            }
            stage.epochs.push_back(std::move(epoch));
          }
        }
        run.stage_results.push_back(std::move(stage));
      }
    }
    result.per_run.push_back(std::move(run));
  }
  result.completed = result.completed_test_metrics().size();
  const auto completed = result.completed_test_metrics();
  if (!completed.empty()) result.aggregate = evalkit::aggregate_runs(completed);
  return result;
}

}  // namespace emodetect::trainer
