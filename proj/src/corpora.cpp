#include "emodetect/corpora.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "emodetect/errors.hpp"
#include "emodetect/util.hpp"

namespace emodetect::corpora {

using json = nlohmann::json;
using emotaxon::EkmanLabel;
using emotaxon::SentimentLabel;

namespace {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", value);
  return std::string(buf);
}

std::string xml_unescape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '&') {
      auto rest = text.substr(i);
      if (rest.rfind("&amp;", 0) == 0) { out += '&'; i += 5; continue; }
      if (rest.rfind("&lt;", 0) == 0) { out += '<'; i += 4; continue; }
      if (rest.rfind("&gt;", 0) == 0) { out += '>'; i += 4; continue; }
      if (rest.rfind("&quot;", 0) == 0) { out += '"'; i += 6; continue; }
      if (rest.rfind("&apos;", 0) == 0) { out += '\''; i += 6; continue; }
    }
    out += text[i];
    ++i;
  }
  return out;
}

// RFC4180-ish single-line field split with doubled-quote escapes.
std::vector<std::string> parse_delimited(const std::string& line, char delim, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw FormatViolationError(lineno, "unterminated quoted field");
  fields.push_back(field);
  return fields;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                       std::initializer_list<const char*> names) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string norm = util::to_lower(util::trim(header[i]));
    for (const char* name : names) {
      if (norm == name) return i;
    }
  }
  return std::nullopt;
}

json doc_to_json(const Doc& doc) {
  json record;
  record["id"] = doc.id;
  record["text"] = doc.text;
  record["label"] = label_to_string(doc.label);
  if (doc.pair_id) record["pair_id"] = *doc.pair_id;
  if (!doc.meta.empty()) record["meta"] = doc.meta;
  return record;
}

std::string meta_value_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

Doc doc_from_json(const json& record, Schema schema, std::size_t lineno,
                  const std::string& default_id) {
  if (!record.is_object()) throw FormatViolationError(lineno, "record is not a JSON object");
  if (!record.contains("text") || !record.at("text").is_string()) {
    throw FormatViolationError(lineno, "missing string field 'text'");
  }
  if (!record.contains("label") || !record.at("label").is_string()) {
    throw FormatViolationError(lineno, "missing string field 'label'");
  }
  Doc doc;
  doc.text = record.at("text").get<std::string>();
  if (doc.text.empty()) throw FormatViolationError(lineno, "empty text");
  try {
    doc.label = parse_label(schema, record.at("label").get<std::string>());
  } catch (const UnknownLabelError& e) {
    throw FormatViolationError(lineno, e.what());
  }
  doc.id = record.value("id", default_id);
  if (doc.id.empty()) throw FormatViolationError(lineno, "empty id");
  if (record.contains("pair_id") && record.at("pair_id").is_string()) {
    doc.pair_id = record.at("pair_id").get<std::string>();
  }
  if (record.contains("meta") && record.at("meta").is_object()) {
    for (const auto& [key, value] : record.at("meta").items()) {
      doc.meta[key] = meta_value_to_string(value);
    }
  }
  return doc;
}

void check_unique_ids(const std::vector<Doc>& docs) {
  std::unordered_set<std::string> seen;
  for (const auto& doc : docs) {
    if (!seen.insert(doc.id).second) {
      throw SchemaMismatchError("duplicate doc id: " + doc.id);
    }
  }
}

Corpus load_records_jsonl(const std::filesystem::path& path, Schema schema,
                          const std::string& format_name) {
  const auto lines = util::read_lines(path);
  Corpus corpus;
  corpus.schema = schema;
  corpus.provenance.push_back("loaded:" + format_name + ":" + path.filename().string());
  const std::string stem = path.stem().string();
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (util::trim(lines[i]).empty()) continue;
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw FormatViolationError(lineno, std::string("invalid JSON: ") + e.what());
    }
    Doc doc = doc_from_json(record, schema, lineno, stem + "-" + std::to_string(lineno));
    if (!ids.insert(doc.id).second) {
      throw FormatViolationError(lineno, "duplicate doc id: " + doc.id);
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

Corpus load_gne_csv(const std::filesystem::path& path) {
  const auto lines = util::read_lines(path);
  if (lines.empty()) throw FormatViolationError(1, "empty file");
  const char delim = lines[0].find('\t') != std::string::npos ? '\t' : ',';
  const auto header = parse_delimited(lines[0], delim, 1);
  const auto text_col = find_column(header, {"headline", "text"});
  const auto label_col =
      find_column(header, {"dominant_emotion", "most_frequent_emotion", "emotion", "label"});
  if (!text_col || !label_col) {
    throw FormatViolationError(1, "header must name a headline/text and an emotion column");
  }
  const auto intensity_col = find_column(header, {"intensity", "dominant_emotion_intensity"});

  Corpus corpus;
  corpus.schema = Schema::kEmotion6;
  corpus.provenance.push_back("loaded:gne-csv:" + path.filename().string());
  corpus.provenance.push_back("mapping:" + std::string(emotaxon::kGneMappingSchemaVersion));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (util::trim(lines[i]).empty()) continue;
    const auto fields = parse_delimited(lines[i], delim, lineno);
    if (fields.size() <= std::max(*text_col, *label_col)) {
      throw FormatViolationError(lineno, "too few columns");
    }
    Doc doc;
    doc.text = util::trim(fields[*text_col]);
    if (doc.text.empty()) throw FormatViolationError(lineno, "empty headline");
    emotaxon::RawEmotionLabel raw{emotaxon::SourceScheme::kGne15, ""};
    try {
      raw = emotaxon::RawEmotionLabel::parse(emotaxon::SourceScheme::kGne15, fields[*label_col]);
    } catch (const UnknownLabelError& e) {
      throw FormatViolationError(lineno, e.what());
    }
    doc.label = emotaxon::map_gne_label(raw);
    doc.id = "gne-" + std::to_string(lineno);
    doc.meta["source_label"] = raw.label_text;
    if (intensity_col && fields.size() > *intensity_col) {
      const std::string intensity = util::trim(fields[*intensity_col]);
      if (!intensity.empty()) doc.meta["intensity"] = intensity;
    }
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

Corpus load_sst2_tsv(const std::filesystem::path& path) {
  const auto lines = util::read_lines(path);
  if (lines.empty()) throw FormatViolationError(1, "empty file");
  const auto header = parse_delimited(lines[0], '\t', 1);
  const auto text_col = find_column(header, {"sentence", "text"});
  const auto label_col = find_column(header, {"label"});
  if (!text_col || !label_col) {
    throw FormatViolationError(1, "header must name sentence and label columns");
  }
  Corpus corpus;
  corpus.schema = Schema::kSentiment2;
  corpus.provenance.push_back("loaded:sst2-tsv:" + path.filename().string());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (util::trim(lines[i]).empty()) continue;
    const auto fields = parse_delimited(lines[i], '\t', lineno);
    if (fields.size() <= std::max(*text_col, *label_col)) {
      throw FormatViolationError(lineno, "too few columns");
    }
    Doc doc;
    doc.text = util::trim(fields[*text_col]);
    if (doc.text.empty()) throw FormatViolationError(lineno, "empty sentence");
    const std::string raw = util::trim(fields[*label_col]);
    if (raw == "1" || util::iequals(raw, "positive")) {
      doc.label = SentimentLabel::kPositive;
    } else if (raw == "0" || util::iequals(raw, "negative")) {
      doc.label = SentimentLabel::kNegative;
    } else {
      throw FormatViolationError(lineno, "label must be 0 or 1, got '" + raw + "'");
    }
    doc.id = "sst2-" + std::to_string(lineno);
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

// Instances file with one <instance id="..">text</instance> per line plus a
// sidecar "<stem>.emotions.gold" of per-id scores in the order
// anger disgust fear joy sadness surprise.
Corpus load_affectivetext(const std::filesystem::path& path) {
  const auto lines = util::read_lines(path);
  std::vector<std::pair<std::string, std::string>> instances;  // (id, text)
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const std::string line = util::trim(lines[i]);
    if (line.empty() || line.rfind("<?", 0) == 0 || line.rfind("<corpus", 0) == 0 ||
        line.rfind("</corpus", 0) == 0) {
      continue;
    }
    const std::string open_tag = "<instance id=\"";
    auto open = line.find(open_tag);
    if (open == std::string::npos) {
      throw FormatViolationError(lineno, "expected an <instance id=\"..\"> element");
    }
    auto id_end = line.find('"', open + open_tag.size());
    auto text_start = line.find('>', open);
    auto close = line.rfind("</instance>");
    if (id_end == std::string::npos || text_start == std::string::npos ||
        close == std::string::npos || close <= text_start) {
      throw FormatViolationError(lineno, "malformed <instance> element");
    }
    const std::string id = line.substr(open + open_tag.size(), id_end - open - open_tag.size());
    const std::string text =
        xml_unescape(util::trim(line.substr(text_start + 1, close - text_start - 1)));
    if (text.empty()) throw FormatViolationError(lineno, "empty instance text");
    instances.emplace_back(id, text);
  }

  std::filesystem::path gold = path;
  gold.replace_extension(".emotions.gold");
  if (!std::filesystem::exists(gold)) throw FileNotFoundError(gold.string());
  std::unordered_map<std::string, std::array<double, 6>> scores;
  const auto gold_lines = util::read_lines(gold);
  for (std::size_t i = 0; i < gold_lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (util::trim(gold_lines[i]).empty()) continue;
    std::istringstream row(gold_lines[i]);
    std::string id;
    std::array<double, 6> values{};
    row >> id;
    for (auto& v : values) {
      if (!(row >> v)) throw FormatViolationError(lineno, "expected six emotion scores");
    }
    scores[id] = values;
  }

  Corpus corpus;
  corpus.schema = Schema::kEmotion6;
  corpus.provenance.push_back("loaded:affectivetext-xmlish:" + path.filename().string());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& [id, text] = instances[i];
    auto it = scores.find(id);
    if (it == scores.end()) {
      throw FormatViolationError(i + 1, "no gold scores for instance id " + id);
    }
    // Gold column order matches canonical label order with joy in the
    // happiness slot.
    std::map<EkmanLabel, double> intensities;
    for (int k = 0; k < 6; ++k) intensities[emotaxon::kCanonicalOrder[k]] = it->second[k];
    Doc doc;
    doc.id = "at-" + id;
    doc.text = text;
    try {
      doc.label = at_to_single_label(intensities);
    } catch (const AllZeroError&) {
      throw FormatViolationError(i + 1, "all-zero intensities for instance id " + id);
    }
    std::string raw_scores;
    for (int k = 0; k < 6; ++k) {
      if (k) raw_scores += ' ';
      raw_scores += format_double(it->second[k]);
    }
    doc.meta["source_scores"] = raw_scores;
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

const Corpus& require_source(const std::map<std::string, Corpus>& sources,
                             const std::string& name, Schema schema) {
  auto it = sources.find(name);
  if (it == sources.end()) throw MissingSourceError(name);
  if (it->second.schema != schema) {
    throw SchemaMismatchError("source '" + name + "' must have schema " + to_string(schema) +
                              ", got " + to_string(it->second.schema));
  }
  return it->second;
}

void append_source_provenance(Corpus& out, const std::string& name, const Corpus& source) {
  out.provenance.push_back("source:" + name + " docs=" + std::to_string(source.docs.size()) +
                           " digest=" + util::hex64(source.digest()));
}

}  // namespace

std::string to_string(Schema schema) {
  switch (schema) {
    case Schema::kBinaryAuthorship: return "binary-authorship";
    case Schema::kEmotion6: return "emotion-6";
    case Schema::kSentiment2: return "sentiment-2";
  }
  return "unknown";
}

Schema parse_schema(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "binary-authorship") return Schema::kBinaryAuthorship;
  if (norm == "emotion-6") return Schema::kEmotion6;
  if (norm == "sentiment-2") return Schema::kSentiment2;
  throw SchemaMismatchError("unknown schema: " + std::string(text));
}

std::string to_string(Authorship a) { return a == Authorship::kHuman ? "human" : "synthetic"; }

Authorship parse_authorship(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "human") return Authorship::kHuman;
  if (norm == "synthetic") return Authorship::kSynthetic;
  throw UnknownLabelError("binary-authorship", std::string(text));
}

std::string label_to_string(const DocLabel& label) {
  return std::visit([](const auto& value) { return to_string(value); }, label);
}

DocLabel parse_label(Schema schema, std::string_view text) {
  switch (schema) {
    case Schema::kBinaryAuthorship: return parse_authorship(text);
    case Schema::kEmotion6: return emotaxon::parse_ekman(text);
    case Schema::kSentiment2: return emotaxon::parse_sentiment(text);
  }
  throw SchemaMismatchError("invalid schema enum value");
}

bool label_matches_schema(const DocLabel& label, Schema schema) {
  switch (schema) {
    case Schema::kBinaryAuthorship: return std::holds_alternative<Authorship>(label);
    case Schema::kEmotion6: return std::holds_alternative<EkmanLabel>(label);
    case Schema::kSentiment2: return std::holds_alternative<SentimentLabel>(label);
  }
  return false;
}

void Corpus::validate() const {
  if (provenance.empty()) throw SchemaMismatchError("corpus provenance is empty");
  std::unordered_map<std::string, const Doc*> by_id;
  for (const auto& doc : docs) {
    if (doc.text.empty()) throw SchemaMismatchError("doc " + doc.id + " has empty text");
    if (!label_matches_schema(doc.label, schema)) {
      throw SchemaMismatchError("doc " + doc.id + " label does not match schema " +
                                to_string(schema));
    }
    if (!by_id.emplace(doc.id, &doc).second) {
      throw SchemaMismatchError("duplicate doc id: " + doc.id);
    }
  }
  for (const auto& doc : docs) {
    if (!doc.pair_id) continue;
    auto it = by_id.find(*doc.pair_id);
    if (it == by_id.end()) {
      throw SchemaMismatchError("doc " + doc.id + " pair_id does not resolve: " + *doc.pair_id);
    }
    if (schema == Schema::kBinaryAuthorship &&
        std::get<Authorship>(it->second->label) == std::get<Authorship>(doc.label)) {
      throw SchemaMismatchError("doc " + doc.id + " pairs with same-authorship doc " +
                                *doc.pair_id);
    }
  }
}

std::uint64_t Corpus::digest() const {
  std::string buffer = to_string(schema);
  buffer += '\n';
  for (const auto& doc : docs) {
    buffer += doc.id;
    buffer += '\x1f';
    buffer += doc.text;
    buffer += '\x1f';
    buffer += label_to_string(doc.label);
    buffer += '\x1e';
  }
  return util::fnv1a64(buffer);
}

std::size_t Corpus::count_label(const DocLabel& label) const {
  return static_cast<std::size_t>(
      std::count_if(docs.begin(), docs.end(),
                    [&](const Doc& doc) { return doc.label == label; }));
}

std::string to_string(Format format) {
  switch (format) {
    case Format::kCorpusJsonl: return "corpus-jsonl";
    case Format::kNewssynthJsonl: return "newssynth-jsonl";
    case Format::kChatgpt100Jsonl: return "chatgpt100-jsonl";
    case Format::kGneCsv: return "gne-csv";
    case Format::kAffectiveTextXmlish: return "affectivetext-xmlish";
    case Format::kSst2Tsv: return "sst2-tsv";
  }
  return "unknown";
}

Format parse_format(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "corpus-jsonl") return Format::kCorpusJsonl;
  if (norm == "newssynth-jsonl") return Format::kNewssynthJsonl;
  if (norm == "chatgpt100-jsonl") return Format::kChatgpt100Jsonl;
  if (norm == "gne-csv") return Format::kGneCsv;
  if (norm == "affectivetext-xmlish") return Format::kAffectiveTextXmlish;
  if (norm == "sst2-tsv") return Format::kSst2Tsv;
  throw SchemaMismatchError("unknown corpus format: " + std::string(text));
}

Corpus load_corpus(const std::filesystem::path& path, Format format) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path.string());
  Corpus corpus;
  switch (format) {
    case Format::kCorpusJsonl:
      corpus = corpus_from_jsonl(util::read_file(path));
      break;
    case Format::kNewssynthJsonl:
      corpus = load_records_jsonl(path, Schema::kBinaryAuthorship, "newssynth-jsonl");
      break;
    case Format::kChatgpt100Jsonl:
      corpus = load_records_jsonl(path, Schema::kBinaryAuthorship, "chatgpt100-jsonl");
      break;
    case Format::kGneCsv:
      corpus = load_gne_csv(path);
      break;
    case Format::kAffectiveTextXmlish:
      corpus = load_affectivetext(path);
      break;
    case Format::kSst2Tsv:
      corpus = load_sst2_tsv(path);
      break;
  }
  corpus.validate();
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  json header;
  header["format"] = "emodetect-corpus";
  header["version"] = 1;
  header["schema"] = to_string(corpus.schema);
  header["provenance"] = corpus.provenance;
  std::string out = header.dump();
  out += '\n';
  for (const auto& doc : corpus.docs) {
    out += doc_to_json(doc).dump();
    out += '\n';
  }
  return out;
}

Corpus corpus_from_jsonl(std::string_view content) {
  std::vector<std::string> lines = util::split(content, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatViolationError(1, "missing corpus header line");
  json header;
  try {
    header = json::parse(lines[0]);
  } catch (const json::exception& e) {
    throw FormatViolationError(1, std::string("invalid header JSON: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != "emodetect-corpus") {
    throw FormatViolationError(1, "header is not an emodetect-corpus header");
  }
  Corpus corpus;
  corpus.schema = parse_schema(header.value("schema", ""));
  if (header.contains("provenance") && header.at("provenance").is_array()) {
    for (const auto& entry : header.at("provenance")) {
      corpus.provenance.push_back(entry.get<std::string>());
    }
  }
  if (corpus.provenance.empty()) corpus.provenance.push_back("loaded:corpus-jsonl");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (util::trim(lines[i]).empty()) continue;
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw FormatViolationError(lineno, std::string("invalid JSON: ") + e.what());
    }
    corpus.docs.push_back(
        doc_from_json(record, corpus.schema, lineno, "doc-" + std::to_string(lineno)));
  }
  check_unique_ids(corpus.docs);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  util::atomic_write_file(path, corpus_to_jsonl(corpus));
}

std::string SplitRatios::to_string() const {
  return std::to_string(train) + ":" + std::to_string(val) + ":" + std::to_string(test);
}

SplitRatios SplitRatios::parse(std::string_view text) {
  const auto parts = util::split(text, ':');
  if (parts.size() != 3) throw ConfigInvalidError("ratios must look like 5:1:4");
  SplitRatios ratios;
  try {
    ratios.train = std::stoi(parts[0]);
    ratios.val = std::stoi(parts[1]);
    ratios.test = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw ConfigInvalidError("ratios must be integers, got '" + std::string(text) + "'");
  }
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0) {
    throw ConfigInvalidError("all ratio parts must be positive");
  }
  return ratios;
}

SeedTriple derive_data_seeds(std::int64_t n) { return SeedTriple{n, n - 6, n + 6}; }

SplitSet make_seeded_split(const Corpus& corpus, SplitRatios ratios, SeedTriple seeds) {
  const std::size_t n = corpus.docs.size();
  const int parts = ratios.parts();
  if (parts <= 0) throw ConfigInvalidError("ratio parts must be positive");
  if (n < static_cast<std::size_t>(parts)) {
    throw TooSmallError("corpus of " + std::to_string(n) + " docs cannot honor ratio " +
                        ratios.to_string());
  }

  const bool binary = corpus.schema == Schema::kBinaryAuthorship;
  if (binary) {
    const std::size_t humans = corpus.count_label(Authorship::kHuman);
    if (humans * 2 != n) {
      throw UnbalancedInputError("binary split needs equal classes, got " +
                                 std::to_string(humans) + " human / " +
                                 std::to_string(n - humans) + " synthetic");
    }
  }

  const std::size_t unit = n / static_cast<std::size_t>(parts);
  std::array<std::size_t, 3> sizes = {
      unit * static_cast<std::size_t>(ratios.train) + (n - unit * static_cast<std::size_t>(parts)),
      unit * static_cast<std::size_t>(ratios.val),
      unit * static_cast<std::size_t>(ratios.test),
  };

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  util::Rng shuffle_rng(seeds.train);
  util::seeded_shuffle(order, shuffle_rng);

  std::array<std::vector<std::size_t>, 3> members;
  if (binary) {
    // Per-split per-class quotas; odd split sizes alternate which class
    // receives the extra doc so class totals stay exact.
    std::array<std::array<std::size_t, 2>, 3> quota{};
    int parity = 0;
    for (int k = 0; k < 3; ++k) {
      quota[k][0] = sizes[k] / 2;
      quota[k][1] = sizes[k] / 2;
      if (sizes[k] % 2 != 0) {
        quota[k][parity] += 1;
        parity ^= 1;
      }
    }
    for (std::size_t idx : order) {
      const int cls = std::get<Authorship>(corpus.docs[idx].label) == Authorship::kHuman ? 0 : 1;
      for (int k = 0; k < 3; ++k) {
        if (quota[k][cls] > 0) {
          quota[k][cls] -= 1;
          members[k].push_back(idx);
          break;
        }
      }
    }
  } else {
    std::size_t cursor = 0;
    for (int k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < sizes[k]; ++i) members[k].push_back(order[cursor++]);
    }
  }

  util::Rng val_rng(seeds.val);
  util::seeded_shuffle(members[1], val_rng);
  util::Rng test_rng(seeds.test);
  util::seeded_shuffle(members[2], test_rng);

  SplitSet set;
  set.seeds = seeds;
  set.ratios = ratios;
  const char* names[3] = {"train", "val", "test"};
  Corpus* outputs[3] = {&set.train, &set.val, &set.test};
  for (int k = 0; k < 3; ++k) {
    outputs[k]->schema = corpus.schema;
    outputs[k]->provenance = corpus.provenance;
    outputs[k]->provenance.push_back(
        std::string("split:") + names[k] + " ratios=" + ratios.to_string() + " seeds=(" +
        std::to_string(seeds.train) + "," + std::to_string(seeds.val) + "," +
        std::to_string(seeds.test) + ")");
    outputs[k]->docs.reserve(members[k].size());
    for (std::size_t idx : members[k]) outputs[k]->docs.push_back(corpus.docs[idx]);
  }
  return set;
}

std::string split_manifest_json(const SplitSet& set, std::uint64_t corpus_digest) {
  json manifest;
  manifest["format"] = "emodetect-split-manifest";
  manifest["version"] = 1;
  manifest["corpus_digest"] = util::hex64(corpus_digest);
  manifest["schema"] = to_string(set.train.schema);
  manifest["ratios"] = set.ratios.to_string();
  manifest["seeds"] = {{"train", set.seeds.train}, {"val", set.seeds.val}, {"test", set.seeds.test}};
  json splits;
  const Corpus* parts[3] = {&set.train, &set.val, &set.test};
  const char* names[3] = {"train", "val", "test"};
  for (int k = 0; k < 3; ++k) {
    json ids = json::array();
    for (const auto& doc : parts[k]->docs) ids.push_back(doc.id);
    splits[names[k]] = std::move(ids);
  }
  manifest["splits"] = std::move(splits);
  return manifest.dump(2) + "\n";
}

void write_split_manifest(const SplitSet& set, std::uint64_t corpus_digest,
                          const std::filesystem::path& path) {
  util::atomic_write_file(path, split_manifest_json(set, corpus_digest));
}

SplitSet materialize_from_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  json manifest;
  try {
    manifest = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw FormatViolationError(1, std::string("invalid manifest JSON: ") + e.what());
  }
  if (manifest.value("format", "") != "emodetect-split-manifest") {
    throw FormatViolationError(1, "not a split manifest");
  }
  const std::string digest = manifest.value("corpus_digest", "");
  if (digest != util::hex64(corpus.digest())) {
    throw SchemaMismatchError("manifest corpus_digest " + digest +
                              " does not match corpus digest " + util::hex64(corpus.digest()));
  }
  std::unordered_map<std::string, const Doc*> by_id;
  for (const auto& doc : corpus.docs) by_id.emplace(doc.id, &doc);

  SplitSet set;
  set.ratios = SplitRatios::parse(manifest.value("ratios", "5:1:4"));
  set.seeds.train = manifest.at("seeds").value("train", 0);
  set.seeds.val = manifest.at("seeds").value("val", 0);
  set.seeds.test = manifest.at("seeds").value("test", 0);
  Corpus* parts[3] = {&set.train, &set.val, &set.test};
  const char* names[3] = {"train", "val", "test"};
  for (int k = 0; k < 3; ++k) {
    parts[k]->schema = corpus.schema;
    parts[k]->provenance = corpus.provenance;
    parts[k]->provenance.push_back(std::string("split:") + names[k] + " manifest=" +
                                   path.filename().string());
    for (const auto& id : manifest.at("splits").at(names[k])) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) {
        throw SchemaMismatchError("manifest id not present in corpus: " + id.get<std::string>());
      }
      parts[k]->docs.push_back(*it->second);
    }
  }
  return set;
}

std::string to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::kGne: return "GNE";
    case Recipe::kGneR: return "GNEr";
    case Recipe::kAt: return "AT";
    case Recipe::kGa: return "GA";
    case Recipe::kSst2: return "SST-2";
    case Recipe::kGas: return "GAS";
    case Recipe::kSGa: return "S-GA";
    case Recipe::kGasPm: return "GAS+-";
  }
  return "unknown";
}

Recipe parse_recipe(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "gne") return Recipe::kGne;
  if (norm == "gner") return Recipe::kGneR;
  if (norm == "at") return Recipe::kAt;
  if (norm == "ga") return Recipe::kGa;
  if (norm == "sst-2" || norm == "sst2") return Recipe::kSst2;
  if (norm == "gas") return Recipe::kGas;
  if (norm == "s-ga" || norm == "sga") return Recipe::kSGa;
  if (norm == "gas+-" || norm == "gaspm") return Recipe::kGasPm;
  throw ConfigInvalidError("unknown ablation recipe: " + std::string(text));
}

const Corpus& AblationResult::single() const {
  if (stages.size() != 1) {
    throw SchemaMismatchError("recipe produced " + std::to_string(stages.size()) +
                              " stages, expected 1");
  }
  return stages.front();
}

namespace {

Corpus union_emotion_corpora(const std::vector<std::pair<std::string, const Corpus*>>& parts,
                             bool map_sentiment) {
  Corpus out;
  out.schema = Schema::kEmotion6;
  for (const auto& [name, source] : parts) {
    for (const auto& doc : source->docs) {
      Doc copy = doc;
      copy.id = name + "/" + doc.id;
      copy.pair_id.reset();
      if (map_sentiment && std::holds_alternative<SentimentLabel>(doc.label)) {
        copy.label = emotaxon::sentiment_to_emotion(std::get<SentimentLabel>(doc.label));
      }
      out.docs.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace

AblationResult compose_ablation(Recipe recipe, const std::map<std::string, Corpus>& sources,
                                std::int64_t seed, const emotaxon::SurpriseResolver* resolver) {
  AblationResult result;
  switch (recipe) {
    case Recipe::kGne: {
      const Corpus& gne = require_source(sources, "GNE", Schema::kEmotion6);
      Corpus out = gne;
      out.provenance.push_back("recipe:GNE");
      append_source_provenance(out, "GNE", gne);
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kGneR: {
      const Corpus& gne = require_source(sources, "GNE", Schema::kEmotion6);
      Corpus out = emotaxon::randomize_labels(gne, seed);
      out.provenance.push_back("recipe:GNEr seed=" + std::to_string(seed));
      append_source_provenance(out, "GNE", gne);
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kAt: {
      const Corpus& at = require_source(sources, "AT", Schema::kEmotion6);
      Corpus out = at;
      out.provenance.push_back("recipe:AT");
      append_source_provenance(out, "AT", at);
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kGa: {
      const Corpus& gne = require_source(sources, "GNE", Schema::kEmotion6);
      const Corpus& at = require_source(sources, "AT", Schema::kEmotion6);
      Corpus out = union_emotion_corpora({{"GNE", &gne}, {"AT", &at}}, false);
      out.provenance.push_back("recipe:GA");
      append_source_provenance(out, "GNE", gne);
      append_source_provenance(out, "AT", at);
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kSst2: {
      const Corpus& sst = require_source(sources, "SST-2", Schema::kSentiment2);
      Corpus out = sst;
      out.provenance.push_back("recipe:SST-2");
      append_source_provenance(out, "SST-2", sst);
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kGas: {
      const Corpus& gne = require_source(sources, "GNE", Schema::kEmotion6);
      const Corpus& at = require_source(sources, "AT", Schema::kEmotion6);
      const Corpus& sst = require_source(sources, "SST-2", Schema::kSentiment2);
      Corpus out = union_emotion_corpora({{"GNE", &gne}, {"AT", &at}, {"SST-2", &sst}}, true);
      out.provenance.push_back("recipe:GAS");
      append_source_provenance(out, "GNE", gne);
      append_source_provenance(out, "AT", at);
      append_source_provenance(out, "SST-2", sst);
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kGasPm: {
      AblationResult gas = compose_ablation(Recipe::kGas, sources, seed, resolver);
      const emotaxon::SurpriseResolver& chosen =
          resolver ? *resolver : emotaxon::default_surprise_resolver();
      Corpus out;
      out.schema = Schema::kSentiment2;
      out.provenance = gas.single().provenance;
      out.provenance.push_back("recipe:GAS+- resolver=" + chosen.resolver_id);
      for (const auto& doc : gas.single().docs) {
        Doc copy = doc;
        copy.label = emotaxon::emotion_to_sentiment(std::get<EkmanLabel>(doc.label), doc.text,
                                                    &chosen);
        out.docs.push_back(std::move(copy));
      }
      result.stages.push_back(std::move(out));
      break;
    }
    case Recipe::kSGa: {
      AblationResult sst = compose_ablation(Recipe::kSst2, sources, seed, resolver);
      AblationResult ga = compose_ablation(Recipe::kGa, sources, seed, resolver);
      Corpus first = sst.single();
      first.provenance.push_back("recipe:S-GA stage=1/2");
      Corpus second = ga.single();
      second.provenance.push_back("recipe:S-GA stage=2/2");
      result.stages.push_back(std::move(first));
      result.stages.push_back(std::move(second));
      break;
    }
  }
  for (auto& stage : result.stages) stage.validate();
  return result;
}

emotaxon::EkmanLabel at_to_single_label(
    const std::map<emotaxon::EkmanLabel, double>& intensities) {
  double best = 0.0;
  std::optional<EkmanLabel> winner;
  for (EkmanLabel label : emotaxon::kCanonicalOrder) {
    auto it = intensities.find(label);
    const double score = it == intensities.end() ? 0.0 : it->second;
    if (score > best) {
      best = score;
      winner = label;
    }
  }
  if (!winner) throw AllZeroError();
  return *winner;
}

SynthesisResult synthesize_counterparts(const Corpus& humans, const TextGenerator& generator,
                                        const GenerationConfig& cfg, int width) {
  if (humans.schema != Schema::kBinaryAuthorship) {
    throw SchemaMismatchError("counterpart synthesis needs a binary-authorship corpus");
  }
  for (const auto& doc : humans.docs) {
    if (std::get<Authorship>(doc.label) != Authorship::kHuman) {
      throw SchemaMismatchError("input must contain only human docs, found synthetic doc " +
                                doc.id);
    }
  }

  const std::size_t n = humans.docs.size();
  std::vector<std::optional<std::string>> generated(n);
  std::vector<std::optional<std::string>> failures(n);

  auto build_prompt = [&](const Doc& doc) {
    if (!cfg.use_metadata_prompt) return doc.text;
    std::string prompt;
    for (const char* key : {"headline", "date", "author", "domain"}) {
      auto it = doc.meta.find(key);
      if (it != doc.meta.end()) prompt += std::string(key) + ": " + it->second + "\n";
    }
    prompt += doc.text;
    return prompt;
  };

  auto generate_one = [&](std::size_t i) {
    try {
      std::string text = generator.generate(build_prompt(humans.docs[i]), cfg);
      if (text.empty()) {
        failures[i] = humans.docs[i].id;
      } else {
        generated[i] = std::move(text);
      }
    } catch (const std::exception&) {
      failures[i] = humans.docs[i].id;
    }
  };

  if (width <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) generate_one(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= n) break;
        generate_one(i);
      }
    };
    std::vector<std::thread> threads;
    const std::size_t thread_count = std::min<std::size_t>(static_cast<std::size_t>(width), n);
    threads.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  SynthesisResult result;
  result.corpus.schema = Schema::kBinaryAuthorship;
  result.corpus.provenance = humans.provenance;
  result.corpus.provenance.push_back("synthesized:generator=" + cfg.generator_id +
                                     " top_p=" + format_double(cfg.top_p));
  std::vector<Doc> synths;
  for (std::size_t i = 0; i < n; ++i) {
    Doc human = humans.docs[i];
    if (generated[i]) {
      Doc synth;
      synth.id = human.id + "#synth";
      synth.text = *generated[i];
      synth.label = Authorship::kSynthetic;
      synth.pair_id = human.id;
      synth.meta["generator_id"] = cfg.generator_id;
      synth.meta["top_p"] = format_double(cfg.top_p);
      synth.meta["max_new_tokens"] = std::to_string(cfg.max_new_tokens);
      synth.meta["use_metadata_prompt"] = cfg.use_metadata_prompt ? "true" : "false";
      human.pair_id = synth.id;
      synths.push_back(std::move(synth));
    } else {
      result.failed_doc_ids.push_back(*failures[i]);
    }
    result.corpus.docs.push_back(std::move(human));
  }
  for (auto& synth : synths) result.corpus.docs.push_back(std::move(synth));
  result.corpus.validate();
  return result;
}

std::string Chatgpt100Report::summary() const {
  std::ostringstream out;
  out << (pass ? "PASS" : "FAIL") << ": " << human_count << " human / " << synthetic_count
      << " synthetic";
  if (class_imbalance) out << "; class imbalance";
  if (!over_limit_ids.empty()) out << "; " << over_limit_ids.size() << " doc(s) over word limit";
  if (!unpaired_ids.empty()) out << "; " << unpaired_ids.size() << " unpaired doc(s)";
  if (!length_mismatched_pairs.empty()) {
    out << "; " << length_mismatched_pairs.size() << " length-mismatched pair(s)";
  }
  return out.str();
}

Chatgpt100Report validate_chatgpt100(const Corpus& corpus, double length_ratio_limit,
                                     std::size_t expected_per_class, std::size_t word_limit) {
  if (corpus.schema != Schema::kBinaryAuthorship) {
    throw SchemaMismatchError("validation needs a binary-authorship corpus");
  }
  Chatgpt100Report report;
  std::unordered_map<std::string, const Doc*> by_id;
  for (const auto& doc : corpus.docs) by_id.emplace(doc.id, &doc);

  std::unordered_map<std::string, std::size_t> wc;
  for (const auto& doc : corpus.docs) {
    wc[doc.id] = util::word_count(doc.text);
    if (std::get<Authorship>(doc.label) == Authorship::kHuman) {
      ++report.human_count;
    } else {
      ++report.synthetic_count;
    }
    if (wc[doc.id] > word_limit) report.over_limit_ids.push_back(doc.id);
  }
  report.class_imbalance = report.human_count != report.synthetic_count;

  for (const auto& doc : corpus.docs) {
    const bool paired = doc.pair_id && by_id.count(*doc.pair_id) &&
                        std::get<Authorship>(by_id.at(*doc.pair_id)->label) !=
                            std::get<Authorship>(doc.label);
    if (!paired) {
      report.unpaired_ids.push_back(doc.id);
      continue;
    }
    if (std::get<Authorship>(doc.label) != Authorship::kHuman) continue;
    const std::size_t human_words = wc[doc.id];
    const std::size_t synth_words = wc[*doc.pair_id];
    const double longer = static_cast<double>(std::max(human_words, synth_words));
    const double shorter = static_cast<double>(std::min(human_words, synth_words));
    if (shorter == 0.0 || longer / shorter > length_ratio_limit) {
      report.length_mismatched_pairs.push_back(
          PairLengthIssue{doc.id, *doc.pair_id, human_words, synth_words});
    }
  }

  report.pass = report.human_count == expected_per_class &&
                report.synthetic_count == expected_per_class && !report.class_imbalance &&
                report.over_limit_ids.empty() && report.unpaired_ids.empty() &&
                report.length_mismatched_pairs.empty();
  return report;
}

}  // namespace emodetect::corpora
