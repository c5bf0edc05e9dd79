#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emodetect::corpora {
struct Corpus;
}

namespace emodetect::emotaxon {

// The six basic emotions used as the emotion label space. kCanonicalOrder is
// also the tie-break order wherever a deterministic pick among labels is needed.
enum class EkmanLabel : std::uint8_t {
  kAnger = 0,
  kDisgust,
  kFear,
  kHappiness,
  kSadness,
  kSurprise,
};

inline constexpr std::array<EkmanLabel, 6> kCanonicalOrder = {
    EkmanLabel::kAnger,     EkmanLabel::kDisgust, EkmanLabel::kFear,
    EkmanLabel::kHappiness, EkmanLabel::kSadness, EkmanLabel::kSurprise,
};

std::string to_string(EkmanLabel label);
EkmanLabel parse_ekman(std::string_view text);  // throws UnknownLabelError

enum class SentimentLabel : std::uint8_t {
  kPositive = 0,
  kNegative,
};

std::string to_string(SentimentLabel label);
SentimentLabel parse_sentiment(std::string_view text);  // throws UnknownLabelError

// Identifiers for the closed source vocabularies a raw label may come from.
enum class SourceScheme : std::uint8_t {
  kGne15,          // the 15-label news-headline emotion vocabulary
  kAffectiveText,  // six basic emotions, with "joy" naming happiness
  kSst2,           // positive / negative
};

std::string to_string(SourceScheme scheme);
SourceScheme parse_scheme(std::string_view text);

// A label as found in a source dataset. Construction validates the text
// against the closed vocabulary of its scheme after case-folding and trimming.
struct RawEmotionLabel {
  SourceScheme source_scheme;
  std::string label_text;  // normalized form

  static RawEmotionLabel parse(SourceScheme scheme, std::string_view text);
};

const std::vector<std::string>& scheme_vocabulary(SourceScheme scheme);

// Pluggable decision for mapping a surprise-labeled text to a sentiment.
// resolver_id is recorded in provenance wherever the resolver is applied.
struct SurpriseResolver {
  std::string resolver_id;
  std::function<SentimentLabel(std::string_view text)> resolve;
};

// Default resolver: sums signed polarity-lexicon weights over the text's
// lowercased words; ties (including no hits) resolve to negative.
const SurpriseResolver& default_surprise_resolver();

// --- mappings -------------------------------------------------------------------

// The 15-to-6 news emotion mapping. Total over the 15-label vocabulary and
// many-to-one onto all six target values.
EkmanLabel map_gne_label(const RawEmotionLabel& raw);

// positive -> happiness, negative -> sadness.
EkmanLabel sentiment_to_emotion(SentimentLabel s);

// happiness -> positive; sadness, fear, anger, disgust -> negative; surprise
// is decided by the resolver on the document text.
SentimentLabel emotion_to_sentiment(EkmanLabel e, std::string_view text,
                                    const SurpriseResolver* resolver);

// Seeded permutation of the label column; texts and the label multiset are
// unchanged. Throws EmptyCorpusError.
corpora::Corpus randomize_labels(const corpora::Corpus& corpus, std::int64_t seed);

// --- mapping schema file ----------------------------------------------------------

// Version tag of the shipped plain-text mapping schema.
inline constexpr std::string_view kGneMappingSchemaVersion = "gne15-to-ekman6.v1";

// The mapping table as rows of (source label, target label), in vocabulary order.
std::vector<std::pair<std::string, std::string>> gne_mapping_rows();

// Renders the versioned one-pair-per-line schema file so audits never require
// reading code. Format: "source_label<TAB>target_label", preceded by a single
// "# <version>" header line.
std::string gne_mapping_schema_text();

}  // namespace emodetect::emotaxon
