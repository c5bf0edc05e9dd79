#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emodetect/corpora.hpp"
#include "emodetect/evalkit.hpp"
#include "emodetect/trainer.hpp"

namespace emodetect::cli {

// One stage as declared in an experiment config file: which dataset to load
// and any overrides on top of the profile defaults.
struct StageSpec {
  corpora::Schema task_schema = corpora::Schema::kBinaryAuthorship;
  std::filesystem::path dataset;
  corpora::Format format = corpora::Format::kCorpusJsonl;
  std::optional<std::string> stage_name;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> grad_accum;
  std::optional<int> warmup_steps;
  std::optional<double> weight_decay;
  std::optional<double> learning_rate;
  std::optional<int> max_seq_len;
  std::optional<std::string> selection_metric;
  std::optional<std::string> ratios;
};

// Declarative experiment description. Flags override fields; the canonical
// JSON digest is embedded in every output artifact.
struct ExperimentConfig {
  std::string experiment_name = "experiment";
  std::string backbone_id = "tiny-bi";
  trainer::Profile profile = trainer::Profile::kDesk;
  int runs = 5;
  std::vector<std::int64_t> model_seeds = {179, 50, 124, 253, 86};
  std::vector<std::int64_t> data_seed_bases = {17, 38, 5, 91, 59};
  std::vector<StageSpec> stages;
  std::filesystem::path output_dir = "runs";
  std::filesystem::path backbone_registry;  // optional registry file
  int jobs = 1;

  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::filesystem::path& base_dir = {});

  std::string canonical_json() const;
  std::string digest() const;  // over the canonical JSON

  // Loads stage datasets and resolves profile defaults plus overrides.
  trainer::ProtocolConfig to_protocol() const;
};

struct ReportBundle {
  std::vector<std::filesystem::path> files;
};

// Paper-style comparison rendering: per-run rows, a Mean row with the
// variance bracketed beneath it, and a delta row when a baseline is present.
std::string render_comparison_text(const trainer::RunSetResult& candidate,
                                   const trainer::RunSetResult* baseline);
std::string render_comparison_tsv(const trainer::RunSetResult& candidate,
                                  const trainer::RunSetResult* baseline);

// Writes the comparison tables plus the raw runset files. Idempotent:
// identical inputs produce byte-identical bundles.
ReportBundle emit_report(const trainer::RunSetResult& candidate,
                         const trainer::RunSetResult* baseline,
                         const std::filesystem::path& outdir);

// Length-statistics table plus plot-data files (per-class word/sentence
// counts and paired scatter points).
std::string render_length_stats(const evalkit::LengthStatsPair& stats);
ReportBundle write_length_plotdata(const corpora::Corpus& corpus,
                                   const evalkit::LengthStatsPair& stats,
                                   const std::filesystem::path& outdir);

}  // namespace emodetect::cli
