#include "emodetect/emotaxon.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "emodetect/corpora.hpp"
#include "emodetect/errors.hpp"
#include "emodetect/util.hpp"

namespace emodetect::emotaxon {
namespace {

constexpr const char* kEkmanNames[6] = {"anger",     "disgust", "fear",
                                        "happiness", "sadness", "surprise"};

// The 15-label source vocabulary and its 6-way targets. "love/like" and
// "positive anticipation/optimism" are single vocabulary entries, stored
// verbatim.
struct GneRow {
  const char* source;
  EkmanLabel target;
};

constexpr GneRow kGneMapping[15] = {
    {"disgust", EkmanLabel::kDisgust},
    {"fear", EkmanLabel::kFear},
    {"sadness", EkmanLabel::kSadness},
    {"guilt", EkmanLabel::kSadness},
    {"shame", EkmanLabel::kSadness},
    {"joy", EkmanLabel::kHappiness},
    {"trust", EkmanLabel::kHappiness},
    {"pride", EkmanLabel::kHappiness},
    {"love/like", EkmanLabel::kHappiness},
    {"positive anticipation/optimism", EkmanLabel::kHappiness},
    {"anger", EkmanLabel::kAnger},
    {"annoyance", EkmanLabel::kAnger},
    {"negative anticipation/pessimism", EkmanLabel::kAnger},
    {"negative surprise", EkmanLabel::kSurprise},
    {"positive surprise", EkmanLabel::kSurprise},
};

// Signed polarity lexicon for the default surprise resolver. Weights are
// +1/-1; the sum decides, ties go negative.
struct LexEntry {
  const char* word;
  int weight;
};

constexpr LexEntry kPolarityLexicon[] = {
    // positive
    {"good", 1},       {"great", 1},     {"excellent", 1}, {"amazing", 1},
    {"wonderful", 1},  {"delight", 1},   {"delights", 1},  {"delighted", 1},
    {"delightful", 1}, {"win", 1},       {"wins", 1},      {"winning", 1},
    {"winner", 1},     {"won", 1},       {"joy", 1},       {"joyful", 1},
    {"happy", 1},      {"happiness", 1}, {"celebrate", 1}, {"celebrates", 1},
    {"celebration", 1},{"success", 1},   {"successful", 1},{"triumph", 1},
    {"record", 1},     {"boost", 1},     {"boosts", 1},    {"surge", 1},
    {"soar", 1},       {"soars", 1},     {"love", 1},      {"loves", 1},
    {"loved", 1},      {"praise", 1},    {"praises", 1},   {"praised", 1},
    {"hope", 1},       {"hopeful", 1},   {"cheer", 1},     {"cheers", 1},
    {"thrill", 1},     {"thrills", 1},   {"thrilled", 1},  {"hero", 1},
    {"best", 1},       {"beautiful", 1}, {"rescue", 1},    {"rescued", 1},
    {"save", 1},       {"saves", 1},     {"saved", 1},     {"gift", 1},
    {"award", 1},      {"awarded", 1},   {"miracle", 1},   {"smile", 1},
    {"smiles", 1},     {"smiling", 1},   {"fans", 1},      {"favorite", 1},
    {"breakthrough", 1},
    // negative
    {"bad", -1},       {"terrible", -1}, {"horrible", -1}, {"awful", -1},
    {"shock", -1},     {"shocks", -1},   {"shocked", -1},  {"shocking", -1},
    {"lose", -1},      {"loses", -1},    {"losing", -1},   {"loss", -1},
    {"lost", -1},      {"fear", -1},     {"fears", -1},    {"afraid", -1},
    {"death", -1},     {"dead", -1},     {"dies", -1},     {"die", -1},
    {"died", -1},      {"kill", -1},     {"kills", -1},    {"killed", -1},
    {"crash", -1},     {"crashes", -1},  {"crisis", -1},   {"fail", -1},
    {"fails", -1},     {"failed", -1},   {"failure", -1},  {"attack", -1},
    {"attacks", -1},   {"war", -1},      {"angry", -1},    {"anger", -1},
    {"sad", -1},       {"sadness", -1},  {"disaster", -1}, {"collapse", -1},
    {"collapses", -1}, {"fraud", -1},    {"scandal", -1},  {"threat", -1},
    {"threatens", -1}, {"worst", -1},    {"hurt", -1},     {"hurts", -1},
    {"injured", -1},   {"injury", -1},   {"storm", -1},    {"flood", -1},
    {"fire", -1},      {"disease", -1},  {"outbreak", -1}, {"panic", -1},
    {"drop", -1},      {"drops", -1},    {"plunge", -1},   {"plunges", -1},
    {"cuts", -1},      {"layoffs", -1},  {"strike", -1},   {"protest", -1},
};

const std::unordered_map<std::string, EkmanLabel>& gne_lookup() {
  static const std::unordered_map<std::string, EkmanLabel> table = [] {
    std::unordered_map<std::string, EkmanLabel> t;
    for (const auto& row : kGneMapping) t.emplace(row.source, row.target);
    return t;
  }();
  return table;
}

}  // namespace

std::string to_string(EkmanLabel label) { return kEkmanNames[static_cast<int>(label)]; }

EkmanLabel parse_ekman(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  for (int i = 0; i < 6; ++i) {
    if (norm == kEkmanNames[i]) return static_cast<EkmanLabel>(i);
  }
  throw UnknownLabelError("ekman-6", std::string(text));
}

std::string to_string(SentimentLabel label) {
  return label == SentimentLabel::kPositive ? "positive" : "negative";
}

SentimentLabel parse_sentiment(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "positive") return SentimentLabel::kPositive;
  if (norm == "negative") return SentimentLabel::kNegative;
  throw UnknownLabelError("sentiment-2", std::string(text));
}

std::string to_string(SourceScheme scheme) {
  switch (scheme) {
    case SourceScheme::kGne15: return "gne-15";
    case SourceScheme::kAffectiveText: return "affective-text";
    case SourceScheme::kSst2: return "sst-2";
  }
  return "unknown";
}

SourceScheme parse_scheme(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "gne-15") return SourceScheme::kGne15;
  if (norm == "affective-text") return SourceScheme::kAffectiveText;
  if (norm == "sst-2") return SourceScheme::kSst2;
  throw UnknownLabelError("source-scheme", std::string(text));
}

const std::vector<std::string>& scheme_vocabulary(SourceScheme scheme) {
  static const std::vector<std::string> gne = [] {
    std::vector<std::string> v;
    for (const auto& row : kGneMapping) v.emplace_back(row.source);
    return v;
  }();
  static const std::vector<std::string> affective = {"anger", "disgust",  "fear",
                                                     "joy",   "sadness", "surprise"};
  static const std::vector<std::string> sst2 = {"positive", "negative"};
  switch (scheme) {
    case SourceScheme::kGne15: return gne;
    case SourceScheme::kAffectiveText: return affective;
    case SourceScheme::kSst2: return sst2;
  }
  return sst2;
}

RawEmotionLabel RawEmotionLabel::parse(SourceScheme scheme, std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  const auto& vocab = scheme_vocabulary(scheme);
  if (std::find(vocab.begin(), vocab.end(), norm) == vocab.end()) {
    throw UnknownLabelError(to_string(scheme), std::string(text));
  }
  return RawEmotionLabel{scheme, norm};
}

const SurpriseResolver& default_surprise_resolver() {
  static const SurpriseResolver resolver{
      "polarity-lexicon.v1",
      [](std::string_view text) {
        static const std::unordered_map<std::string, int> lex = [] {
          std::unordered_map<std::string, int> t;
          for (const auto& e : kPolarityLexicon) t.emplace(e.word, e.weight);
          return t;
        }();
        int score = 0;
        for (const auto& w : util::words(text)) {
          auto it = lex.find(util::to_lower(w));
          if (it != lex.end()) score += it->second;
        }
        return score > 0 ? SentimentLabel::kPositive : SentimentLabel::kNegative;
      }};
  return resolver;
}

EkmanLabel map_gne_label(const RawEmotionLabel& raw) {
  if (raw.source_scheme != SourceScheme::kGne15) {
    throw UnknownLabelError("gne-15", raw.label_text + " (scheme " +
                                          to_string(raw.source_scheme) + ")");
  }
  const auto& table = gne_lookup();
  auto it = table.find(raw.label_text);
  if (it == table.end()) throw UnknownLabelError("gne-15", raw.label_text);
  return it->second;
}

EkmanLabel sentiment_to_emotion(SentimentLabel s) {
  return s == SentimentLabel::kPositive ? EkmanLabel::kHappiness : EkmanLabel::kSadness;
}

SentimentLabel emotion_to_sentiment(EkmanLabel e, std::string_view text,
                                    const SurpriseResolver* resolver) {
  switch (e) {
    case EkmanLabel::kHappiness:
      return SentimentLabel::kPositive;
    case EkmanLabel::kSadness:
    case EkmanLabel::kFear:
    case EkmanLabel::kAnger:
    case EkmanLabel::kDisgust:
      return SentimentLabel::kNegative;
    case EkmanLabel::kSurprise:
      if (resolver == nullptr || !resolver->resolve) throw ResolverUnavailableError();
      return resolver->resolve(text);
  }
  throw UnknownLabelError("ekman-6", "invalid enum value");
}

corpora::Corpus randomize_labels(const corpora::Corpus& corpus, std::int64_t seed) {
  if (corpus.docs.empty()) throw EmptyCorpusError();
  corpora::Corpus out = corpus;
  std::vector<corpora::DocLabel> labels;
  labels.reserve(out.docs.size());
  for (const auto& doc : out.docs) labels.push_back(doc.label);
  util::Rng rng(seed);
  util::seeded_shuffle(labels, rng);
  for (std::size_t i = 0; i < out.docs.size(); ++i) out.docs[i].label = labels[i];
  out.provenance.push_back("randomize-labels seed=" + std::to_string(seed));
  return out;
}

std::vector<std::pair<std::string, std::string>> gne_mapping_rows() {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.reserve(15);
  for (const auto& row : kGneMapping) rows.emplace_back(row.source, to_string(row.target));
  return rows;
}

std::string gne_mapping_schema_text() {
  std::ostringstream out;
  out << "# " << kGneMappingSchemaVersion << "\n";
  for (const auto& [source, target] : gne_mapping_rows()) {
    out << source << '\t' << target << '\n';
  }
  return out.str();
}

}  // namespace emodetect::emotaxon
