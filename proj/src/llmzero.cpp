#include "emodetect/llmzero.hpp"

#include <cstdlib>
#include <ctime>
#include <thread>

#include <json.hpp>

#ifdef EMODETECT_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "emodetect/errors.hpp"
#include "emodetect/util.hpp"

namespace emodetect::llmzero {

using json = nlohmann::json;

std::string to_string(VerdictValue value) {
  switch (value) {
    case VerdictValue::kHuman: return "human";
    case VerdictValue::kSynthetic: return "synthetic";
    case VerdictValue::kUnparseable: return "unparseable";
  }
  return "unparseable";
}

DetectionPrompt build_prompt(const std::string& article) {
  if (article.empty()) throw EmptyArticleError();
  DetectionPrompt prompt;
  prompt.article = article;
  return prompt;
}

Verdict parse_verdict(const std::string& response) {
  Verdict verdict;
  verdict.raw_response = response;
  bool saw_human = false;
  bool saw_computer = false;
  for (const auto& word : util::words(response)) {
    const std::string lowered = util::to_lower(word);
    if (lowered == "human") saw_human = true;
    if (lowered == "computer") saw_computer = true;
  }
  if (saw_human && !saw_computer) {
    verdict.value = VerdictValue::kHuman;
  } else if (saw_computer && !saw_human) {
    verdict.value = VerdictValue::kSynthetic;
  } else {
    verdict.value = VerdictValue::kUnparseable;
  }
  return verdict;
}

// --- mock client -----------------------------------------------------------------

MockChatClient::MockChatClient(std::vector<std::string> responses, std::string model_id)
    : responses_(std::move(responses)), model_id_(std::move(model_id)) {}

MockChatClient MockChatClient::from_script_file(const std::filesystem::path& path,
                                                std::string model_id) {
  std::vector<std::string> responses;
  for (const auto& line : util::read_lines(path)) {
    if (util::trim(line).empty()) continue;
    // Either {"response": "..."} records or plain text lines.
    if (!line.empty() && line.front() == '{') {
      try {
        json record = json::parse(line);
        responses.push_back(record.value("response", ""));
        continue;
      } catch (const json::exception&) {
        // fall through: treat as plain text
      }
    }
    responses.push_back(line);
  }
  return MockChatClient(std::move(responses), std::move(model_id));
}

std::string MockChatClient::complete(const std::string&) {
  if (next_ >= responses_.size()) {
    throw TransportFailureError("mock script exhausted after " + std::to_string(next_) +
                                " responses");
  }
  return responses_[next_++];
}

// --- http client ------------------------------------------------------------------

HttpChatClient::HttpChatClient(ClientConfig config)
    : config_(std::move(config)),
      last_request_(std::chrono::steady_clock::time_point::min()),
      rng_state_(config_.backoff_seed) {}

HttpChatClient::~HttpChatClient() = default;

std::string HttpChatClient::complete(const std::string& prompt) {
  const char* key = nullptr;
  if (!config_.credential_env.empty()) key = std::getenv(config_.credential_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthFailureError("credential environment variable " + config_.credential_env +
                           " is unset");
  }

  json body;
  body["model"] = config_.model_id;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0.0;
  const std::string payload = body.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    // Single in-flight request with a minimum interval between sends.
    const auto now = std::chrono::steady_clock::now();
    if (last_request_ != std::chrono::steady_clock::time_point::min()) {
      const auto elapsed = now - last_request_;
      if (elapsed < config_.min_interval) {
        std::this_thread::sleep_for(config_.min_interval - elapsed);
      }
    }
    last_request_ = std::chrono::steady_clock::now();

    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
    auto response = client.Post("/v1/chat/completions", headers, payload, "application/json");

    if (response) {
      if (response->status == 401 || response->status == 403) {
        throw AuthFailureError("authentication rejected with HTTP " +
                               std::to_string(response->status));
      }
      if (response->status == 200) {
        try {
          json parsed = json::parse(response->body);
          return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
          last_error = std::string("malformed completion payload: ") + e.what();
        }
      } else if (response->status == 429 || response->status >= 500) {
        last_error = "HTTP " + std::to_string(response->status);
      } else {
        throw TransportFailureError("HTTP " + std::to_string(response->status) + ": " +
                                    response->body);
      }
    } else {
      last_error = "transport error: " + httplib::to_string(response.error());
    }

    if (attempt < config_.max_retries) {
      // Seeded exponential backoff with jitter: deterministic per client.
      const double jitter = static_cast<double>(util::splitmix64(rng_state_) % 1000) / 1000.0;
      const double seconds = (1 << attempt) * (0.5 + 0.5 * jitter);
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(seconds * 1000)));
    }
  }
  throw TransportFailureError("request failed after " + std::to_string(config_.max_retries + 1) +
                              " attempts: " + last_error);
}

// --- zero-shot harness -----------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

std::string sanitize_for_filename(std::string_view text) {
  std::string out;
  for (char c : text) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  return out;
}

std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& model_id,
                                 std::uint64_t prompt_digest) {
  return dir / (sanitize_for_filename(model_id) + "-" + util::hex64(prompt_digest) + ".json");
}

}  // namespace

ZeroShotResult run_zeroshot(const corpora::Corpus& corpus, ChatClient& client,
                            const std::filesystem::path& cache_dir) {
  if (corpus.schema != corpora::Schema::kBinaryAuthorship) {
    throw SchemaMismatchError("zero-shot detection needs a binary-authorship corpus");
  }
  const bool caching = !cache_dir.empty();
  if (caching) std::filesystem::create_directories(cache_dir);

  ZeroShotResult result;
  std::vector<std::string> preds;
  std::vector<std::string> golds;

  for (const auto& doc : corpus.docs) {
    const std::string prompt = build_prompt(doc.text).text();
    const std::uint64_t digest = util::fnv1a64(prompt);

    std::string response;
    std::string timestamp;
    bool from_cache = false;
    if (caching) {
      const auto path = cache_path(cache_dir, client.model_id(), digest);
      if (std::filesystem::exists(path)) {
        try {
          json entry = json::parse(util::read_file(path));
          if (entry.value("prompt_digest", "") == util::hex64(digest)) {
            response = entry.value("response", "");
            timestamp = entry.value("timestamp", "");
            from_cache = true;
          }
        } catch (const json::exception&) {
          // Unreadable cache entry: fall through and re-query.
        }
      }
    }

    if (!from_cache) {
      response = client.complete(prompt);
      ++result.client_calls;
      timestamp = utc_timestamp();
      if (caching) {
        json entry;
        entry["model_id"] = client.model_id();
        entry["prompt_digest"] = util::hex64(digest);
        entry["response"] = response;
        entry["timestamp"] = timestamp;
        util::atomic_write_file(cache_path(cache_dir, client.model_id(), digest),
                                entry.dump(2) + "\n");
      }
    } else {
      ++result.cache_hits;
    }

    Verdict verdict = parse_verdict(response);
    verdict.model_id = client.model_id();
    verdict.timestamp = timestamp;

    const std::string gold = corpora::label_to_string(doc.label);
    golds.push_back(gold);
    if (verdict.value == VerdictValue::kUnparseable) {
      ++result.unparseable_count;
      // Scored as incorrect: credit the opposite of the gold label.
      preds.push_back(gold == "human" ? "synthetic" : "human");
    } else {
      preds.push_back(to_string(verdict.value));
    }
    result.verdicts.push_back(std::move(verdict));
  }

  result.metrics = evalkit::binary_metrics(evalkit::confusion(preds, golds, "synthetic"));
  return result;
}

}  // namespace emodetect::llmzero
