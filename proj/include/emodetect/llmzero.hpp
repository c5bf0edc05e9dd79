#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "emodetect/corpora.hpp"
#include "emodetect/evalkit.hpp"

namespace emodetect::llmzero {

// Fixed zero-shot detection question; the article is appended after a single
// newline. Byte-stable across platforms.
inline constexpr std::string_view kDetectionPreamble =
    "Was the following written by a human or a computer, choose human or computer only?";

struct DetectionPrompt {
  std::string preamble{kDetectionPreamble};
  std::string article;

  std::string text() const { return preamble + "\n" + article; }
};

DetectionPrompt build_prompt(const std::string& article);  // throws EmptyArticleError

enum class VerdictValue : std::uint8_t {
  kHuman,
  kSynthetic,
  kUnparseable,
};

std::string to_string(VerdictValue value);

struct Verdict {
  VerdictValue value = VerdictValue::kUnparseable;
  std::string raw_response;
  std::string model_id;
  std::string timestamp;  // ISO-8601 UTC; from the cache entry when replayed
};

// Total and deterministic: case-insensitive standalone-word search for
// "human" / "computer" after stripping punctuation. Exactly one of the two
// found gives that verdict (computer means synthetic); both or neither is
// unparseable.
Verdict parse_verdict(const std::string& response);

struct ClientConfig {
  std::string endpoint;  // base URL, e.g. https://api.example.com
  std::string model_id = "gpt-3.5-turbo";
  std::string credential_env = "EMODETECT_API_KEY";  // env var name, never the key itself
  int max_retries = 3;
  std::chrono::milliseconds min_interval{1000};
  std::filesystem::path cache_dir;
  std::uint64_t backoff_seed = 1;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string model_id() const = 0;
};

// Replays scripted responses in order; for offline tests and --mock runs.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::vector<std::string> responses, std::string model_id = "mock");
  static MockChatClient from_script_file(const std::filesystem::path& path,
                                         std::string model_id = "mock");

  std::string complete(const std::string& prompt) override;
  std::string model_id() const override { return model_id_; }
  std::size_t calls() const { return next_; }

 private:
  std::vector<std::string> responses_;
  std::string model_id_;
  std::size_t next_ = 0;
};

// Plain chat-completion client. One request in flight, a minimum interval
// between requests, and seeded-backoff retries on transport errors and
// retryable statuses. The credential is read from the named environment
// variable and never logged or cached.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ClientConfig config);
  ~HttpChatClient() override;

  std::string complete(const std::string& prompt) override;
  std::string model_id() const override { return config_.model_id; }

 private:
  ClientConfig config_;
  std::chrono::steady_clock::time_point last_request_;
  std::uint64_t rng_state_;
};

struct ZeroShotResult {
  std::vector<Verdict> verdicts;       // one per doc, in corpus order
  evalkit::MetricsReport metrics;      // positive class: synthetic
  std::size_t unparseable_count = 0;   // scored as incorrect, reported separately
  std::size_t cache_hits = 0;
  std::size_t client_calls = 0;
};

// Sequential evaluation over the corpus. Responses are cached by
// (model id, prompt digest) under cache_dir so reruns are free; an empty
// cache_dir disables caching. Unparseable verdicts score as incorrect.
ZeroShotResult run_zeroshot(const corpora::Corpus& corpus, ChatClient& client,
                            const std::filesystem::path& cache_dir = {});

}  // namespace emodetect::llmzero
