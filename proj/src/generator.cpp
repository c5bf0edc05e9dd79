#include "emodetect/generator.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "emodetect/errors.hpp"

namespace emodetect::corpora {

std::string EchoGenerator::generate(const std::string& prompt, const GenerationConfig&) const {
  return prompt;
}

namespace {

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream stream{std::string(text)};
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

}  // namespace

void MarkovGenerator::fit(const std::vector<std::string>& texts) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> start_counts;
  for (const auto& text : texts) {
    const auto tokens = whitespace_tokens(text);
    if (tokens.empty()) continue;
    start_counts[tokens.front()] += 1;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      counts[tokens[i]][tokens[i + 1]] += 1;
    }
  }
  if (start_counts.empty()) throw EmptyCorpusError("generator fitted on empty sample");

  auto build = [](const std::map<std::string, std::size_t>& table) {
    Successors successors;
    std::vector<std::pair<std::string, std::size_t>> rows(table.begin(), table.end());
    // Count-descending, token-ascending: the nucleus cut is deterministic.
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::size_t total = 0;
    for (const auto& [token, count] : rows) total += count;
    for (const auto& [token, count] : rows) {
      successors.tokens.push_back(token);
      successors.probs.push_back(static_cast<double>(count) / static_cast<double>(total));
    }
    return successors;
  };

  transitions_.clear();
  for (const auto& [token, table] : counts) transitions_[token] = build(table);
  starts_ = build(start_counts);
}

const std::string* MarkovGenerator::sample_next(const std::string& current, double top_p,
                                                util::Rng& rng) const {
  const Successors* successors = &starts_;
  auto it = transitions_.find(current);
  if (it != transitions_.end() && !it->second.tokens.empty()) successors = &it->second;
  if (successors->tokens.empty()) return nullptr;

  // Smallest prefix of the count-sorted successors whose cumulative
  // probability reaches top_p; sample within it, renormalized.
  std::size_t cut = successors->tokens.size();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < successors->probs.size(); ++i) {
    cumulative += successors->probs[i];
    if (cumulative >= top_p) {
      cut = i + 1;
      break;
    }
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < cut; ++i) mass += successors->probs[i];
  double draw = rng.next_double() * mass;
  for (std::size_t i = 0; i < cut; ++i) {
    draw -= successors->probs[i];
    if (draw <= 0.0) return &successors->tokens[i];
  }
  return &successors->tokens[cut - 1];
}

std::string MarkovGenerator::generate(const std::string& prompt,
                                      const GenerationConfig& cfg) const {
  if (!fitted()) throw EmptyCorpusError("generator not fitted");
  util::Rng rng(util::mix_seeds(seed_, util::fnv1a64(prompt)));

  const auto prompt_tokens = whitespace_tokens(prompt);
  std::string current;
  if (!prompt_tokens.empty() && transitions_.count(prompt_tokens.back())) {
    current = prompt_tokens.back();
  } else {
    const std::string* start = sample_next("", cfg.top_p, rng);
    if (start == nullptr) return {};
    current = *start;
  }

  std::vector<std::string> out;
  out.push_back(current);
  for (int i = 1; i < cfg.max_new_tokens; ++i) {
    const std::string* next = sample_next(current, cfg.top_p, rng);
    if (next == nullptr) break;
    current = *next;
    out.push_back(current);
  }

  std::string text;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) text += ' ';
    text += out[i];
  }
  return text;
}

}  // namespace emodetect::corpora
