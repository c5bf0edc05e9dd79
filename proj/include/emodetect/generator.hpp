#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emodetect/corpora.hpp"
#include "emodetect/util.hpp"

namespace emodetect::corpora {

// Test stub: returns the prompt verbatim.
class EchoGenerator : public TextGenerator {
 public:
  std::string generate(const std::string& prompt, const GenerationConfig& cfg) const override;
};

// Tiny causal generator: a word-level bigram chain fitted on a sample of
// text, sampled with nucleus (top-p) truncation. Continuations are seeded
// from (model seed, prompt) so regeneration is deterministic.
class MarkovGenerator : public TextGenerator {
 public:
  explicit MarkovGenerator(std::uint64_t seed) : seed_(seed) {}

  void fit(const std::vector<std::string>& texts);
  bool fitted() const { return !transitions_.empty(); }

  std::string generate(const std::string& prompt, const GenerationConfig& cfg) const override;

  static constexpr const char* kGeneratorId = "markov-bigram.v1";

 private:
  struct Successors {
    std::vector<std::string> tokens;  // sorted by count desc, then token asc
    std::vector<double> probs;        // normalized, same order
  };

  const std::string* sample_next(const std::string& current, double top_p,
                                 util::Rng& rng) const;

  std::uint64_t seed_;
  std::map<std::string, Successors> transitions_;
  Successors starts_;
};

}  // namespace emodetect::corpora
