#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emodetect/backend.hpp"
#include "emodetect/corpora.hpp"
#include "emodetect/evalkit.hpp"

namespace emodetect::trainer {

enum class SelectionMetric : std::uint8_t {
  kAccuracy,
  kF1Micro,
  kF1,
};

std::string to_string(SelectionMetric metric);
SelectionMetric parse_selection_metric(std::string_view text);

enum class Profile : std::uint8_t {
  kPaper,  // headline hyperparameters: batch 7, accumulation 8, warmup 500
  kDesk,   // tiny-backbone settings sized for a laptop CPU
};

std::string to_string(Profile profile);
Profile parse_profile(std::string_view text);

struct StageConfig {
  std::string stage_name;
  corpora::Schema task_schema = corpora::Schema::kBinaryAuthorship;
  int num_classes = 2;
  int epochs = 4;
  int batch_size = 8;
  int grad_accum = 1;
  int warmup_steps = 0;
  double weight_decay = 0.01;
  SelectionMetric selection_metric = SelectionMetric::kAccuracy;
  int max_seq_len = 64;
  double learning_rate = 5e-3;
  std::string optimizer = "adamw";
  corpora::SplitRatios ratios;

  void validate() const;
};

// Stage defaults per profile and task schema. The paper profile carries the
// published hyperparameters verbatim (batch 7, accumulation 8, warmup 500,
// weight decay 0.01, 4 detection epochs / 10 emotion epochs, 512 tokens);
// the desk profile is sized so the full two-protocol comparison finishes in
// minutes on CPU.
StageConfig default_stage_config(Profile profile, corpora::Schema task_schema);

struct StagePlan {
  StageConfig config;
  corpora::Corpus dataset;
};

struct ProtocolConfig {
  std::string experiment_name = "experiment";
  std::string backbone_id = "tiny-bi";
  int runs = 5;
  std::vector<std::int64_t> model_seeds;
  std::vector<std::int64_t> data_seed_bases;
  std::vector<StagePlan> stages;
  std::filesystem::path output_dir = "runs";
  std::string config_digest;
  backend::BackboneRegistry registry;
  int jobs = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  evalkit::MetricsReport val_metrics;
  std::filesystem::path checkpoint_dir;
};

struct StageResult {
  std::string stage_name;
  std::filesystem::path best_checkpoint;
  int best_epoch = 0;
  std::vector<EpochRecord> epochs;
};

// Per-stage context owned by the caller: where checkpoints land, which seeds
// identify the run, and the manifest the stage appends progress to.
struct StageContext {
  std::filesystem::path stage_dir;
  std::int64_t model_seed = 0;
  corpora::SeedTriple data_seeds;
  std::string config_digest;
  std::filesystem::path manifest_path;  // empty disables manifest logging
};

// Trains cfg.epochs epochs with per-epoch reshuffling derived from the train
// seed, checkpoints after every epoch, and returns the checkpoint maximizing
// the selection metric (ties break to the earliest epoch).
StageResult run_stage(backend::ClassifierModel& model, const corpora::SplitSet& splits,
                      const StageConfig& cfg, const StageContext& ctx);

evalkit::MetricsReport evaluate_model(const backend::ClassifierModel& model,
                                      const corpora::Corpus& eval_corpus,
                                      const StageConfig& cfg);

struct PipelineResult {
  backend::ClassifierModel final_model;
  std::vector<StageResult> stage_results;
  corpora::SplitSet final_splits;  // splits of the last stage's dataset
};

PipelineResult run_pipeline(const std::string& encoder_id, const std::vector<StagePlan>& stages,
                            std::int64_t model_seed, std::int64_t data_seed_base,
                            const std::filesystem::path& run_dir,
                            const backend::BackboneRegistry& registry = {},
                            const std::string& config_digest = {});

struct RunResult {
  int run_index = 0;
  bool completed = false;
  std::string error;
  std::int64_t model_seed = 0;
  std::int64_t data_seed_base = 0;
  std::filesystem::path final_checkpoint;
  evalkit::MetricsReport test_metrics;
  std::vector<StageResult> stage_results;
};

struct RunSetResult {
  std::string experiment_name;
  std::string config_digest;
  std::vector<RunResult> per_run;
  std::size_t completed = 0;
  std::optional<evalkit::AggregateReport> aggregate;  // over completed runs

  std::vector<evalkit::MetricsReport> completed_test_metrics() const;
};

// Executes the paired-seed multi-run protocol. Runs are independent; jobs > 1
// executes that many runs concurrently. Per-run failures are recorded and the
// aggregate covers completed runs only.
RunSetResult run_protocol(const ProtocolConfig& config);

std::string runset_to_json(const RunSetResult& result);
RunSetResult runset_from_json(const std::string& text);

}  // namespace emodetect::trainer
