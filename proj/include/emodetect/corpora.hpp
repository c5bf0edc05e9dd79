#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emodetect/emotaxon.hpp"

namespace emodetect::corpora {

enum class Schema : std::uint8_t {
  kBinaryAuthorship,
  kEmotion6,
  kSentiment2,
};

std::string to_string(Schema schema);
Schema parse_schema(std::string_view text);

enum class Authorship : std::uint8_t {
  kHuman = 0,
  kSynthetic,
};

std::string to_string(Authorship a);
Authorship parse_authorship(std::string_view text);

using DocLabel = std::variant<Authorship, emotaxon::EkmanLabel, emotaxon::SentimentLabel>;

std::string label_to_string(const DocLabel& label);
DocLabel parse_label(Schema schema, std::string_view text);
bool label_matches_schema(const DocLabel& label, Schema schema);

// One text item with its label, optional pairing to a counterpart of the
// opposite authorship, and free-form provenance metadata.
struct Doc {
  std::string id;
  std::string text;
  DocLabel label;
  std::optional<std::string> pair_id;
  std::map<std::string, std::string> meta;
};

struct Corpus {
  Schema schema = Schema::kBinaryAuthorship;
  std::vector<Doc> docs;
  std::vector<std::string> provenance;

  // Checks the structural invariants: non-empty texts, labels matching the
  // schema, unique ids, resolvable opposite-authorship pair ids, and
  // non-empty provenance. Throws on violation.
  void validate() const;

  // Content digest over schema plus (id, text, label) per doc, in order.
  std::uint64_t digest() const;

  std::size_t count_label(const DocLabel& label) const;
};

// --- loading and saving ------------------------------------------------------------

enum class Format : std::uint8_t {
  kCorpusJsonl,          // native line-delimited format with schema header
  kNewssynthJsonl,       // paired human/synthetic article records
  kChatgpt100Jsonl,      // same record shape as newssynth-jsonl
  kGneCsv,               // news-headline emotion CSV/TSV, 15-label vocabulary
  kAffectiveTextXmlish,  // <instance id="..">text</instance> + sidecar gold scores
  kSst2Tsv,              // GLUE-style "sentence<TAB>label" with 0/1 labels
};

std::string to_string(Format format);
Format parse_format(std::string_view text);

// Malformed records are rejected with their line number, never dropped.
Corpus load_corpus(const std::filesystem::path& path, Format format);

// Writes the native corpus-jsonl representation (schema header + one record
// per line, UTF-8).
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_to_jsonl(const Corpus& corpus);
Corpus corpus_from_jsonl(std::string_view content);

// --- seeded splits --------------------------------------------------------------------

struct SplitRatios {
  int train = 5;
  int val = 1;
  int test = 4;

  int parts() const { return train + val + test; }
  std::string to_string() const;
  static SplitRatios parse(std::string_view text);  // "5:1:4"
};

struct SeedTriple {
  std::int64_t train = 0;
  std::int64_t val = 0;
  std::int64_t test = 0;
};

// Base seed n yields (n, n-6, n+6) for train, val, test. Negative results are
// legal seeds.
SeedTriple derive_data_seeds(std::int64_t n);

struct SplitSet {
  Corpus train;
  Corpus val;
  Corpus test;
  SeedTriple seeds;
  SplitRatios ratios;
};

// Deterministic split: one full shuffle with the train seed, proportional cut
// with remainders assigned to train, per-class interleaved allocation for
// binary corpora (each split balanced to within one doc), then val and test
// re-shuffled internally with their own seeds.
SplitSet make_seeded_split(const Corpus& corpus, SplitRatios ratios, SeedTriple seeds);

// Sidecar manifest sufficient to re-materialize a split bit-exactly.
std::string split_manifest_json(const SplitSet& set, std::uint64_t corpus_digest);
void write_split_manifest(const SplitSet& set, std::uint64_t corpus_digest,
                          const std::filesystem::path& path);
SplitSet materialize_from_manifest(const Corpus& corpus, const std::filesystem::path& path);

// --- ablation recipes ---------------------------------------------------------------------

enum class Recipe : std::uint8_t {
  kGne,    // news-headline emotion corpus as-is
  kGneR,   // same texts with a seeded permutation of the label column
  kAt,     // the 6-emotion headline corpus as-is
  kGa,     // union of GNE and AT
  kSst2,   // sentiment corpus as-is
  kGas,    // GNE + AT + SST-2 mapped onto the six emotions
  kSGa,    // ordered stage list: SST-2 first, then GA
  kGasPm,  // GAS collapsed onto positive/negative sentiment
};

std::string to_string(Recipe recipe);
Recipe parse_recipe(std::string_view text);

// Stage corpora in training order. Single-stage recipes produce one corpus;
// the sentiment-then-emotion recipe produces two.
struct AblationResult {
  std::vector<Corpus> stages;
  const Corpus& single() const;
};

AblationResult compose_ablation(Recipe recipe, const std::map<std::string, Corpus>& sources,
                                std::int64_t seed,
                                const emotaxon::SurpriseResolver* resolver = nullptr);

// Argmax over per-emotion intensities with canonical-order tie-break.
// Throws AllZeroError when every intensity is zero.
emotaxon::EkmanLabel at_to_single_label(
    const std::map<emotaxon::EkmanLabel, double>& intensities);

// --- synthetic counterpart generation ----------------------------------------------------

struct GenerationConfig {
  double top_p = 0.95;
  int max_new_tokens = 128;
  bool use_metadata_prompt = false;
  std::string generator_id;
};

// Contract for any causal text generator used to counterfeit human docs.
// Implementations must be deterministic for a fixed (generator state, prompt)
// and safe for concurrent generate() calls.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string generate(const std::string& prompt, const GenerationConfig& cfg) const = 0;
};

struct SynthesisResult {
  Corpus corpus;                           // humans plus their synthetic counterparts
  std::vector<std::string> failed_doc_ids; // generation failures, in input order
};

// One synthetic doc per human doc, linked both ways via pair_id. Failures are
// reported and skipped; generation continues. width > 1 fans generator calls
// out over that many threads, with results re-assembled in input order.
SynthesisResult synthesize_counterparts(const Corpus& humans, const TextGenerator& generator,
                                        const GenerationConfig& cfg, int width = 1);

// --- 100-doc comparison-set validation -----------------------------------------------------

struct PairLengthIssue {
  std::string human_id;
  std::string synthetic_id;
  std::size_t human_words = 0;
  std::size_t synthetic_words = 0;
};

struct Chatgpt100Report {
  bool pass = false;
  std::size_t human_count = 0;
  std::size_t synthetic_count = 0;
  std::vector<std::string> over_limit_ids;    // docs longer than the word cap
  std::vector<std::string> unpaired_ids;      // docs without a resolvable pair
  std::vector<PairLengthIssue> length_mismatched_pairs;
  bool class_imbalance = false;

  std::string summary() const;
};

Chatgpt100Report validate_chatgpt100(const Corpus& corpus, double length_ratio_limit = 1.5,
                                     std::size_t expected_per_class = 50,
                                     std::size_t word_limit = 384);

}  // namespace emodetect::corpora
