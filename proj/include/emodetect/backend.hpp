#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emodetect/corpora.hpp"
#include "emodetect/evalkit.hpp"
#include "emodetect/util.hpp"

namespace emodetect::backend {

enum class BackboneKind : std::uint8_t {
  kBidirectionalEncoder,
  kCausalDecoder,
};

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view text);

struct EncoderConfig {
  std::string backbone_id;
  BackboneKind kind = BackboneKind::kBidirectionalEncoder;
  int hidden_size = 64;
  int layers = 2;
  int vocab_size = 4096;
  int max_seq_len = 512;
};

// Metadata view of a loaded encoder.
struct EncoderHandle {
  std::string backbone_id;
  BackboneKind backbone_kind = BackboneKind::kBidirectionalEncoder;
  int hidden_size = 0;
  int max_seq_len = 0;
  std::string parameter_fingerprint;  // hex digest over all encoder weights
};

// Deterministic hashed-subword tokenizer owned by the backbone. id 0 pads,
// id 1 is the sequence-start token, word pieces of up to four characters hash
// into the remaining vocabulary.
class SubwordTokenizer {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kBosId = 1;

  explicit SubwordTokenizer(int vocab_size) : vocab_size_(vocab_size) {}

  std::vector<int> encode(std::string_view text, int max_len, bool* truncated = nullptr) const;
  int vocab_size() const { return vocab_size_; }

 private:
  int vocab_size_;
};

struct TokenBatch {
  std::vector<std::vector<int>> ids;  // padded to the batch max with kPadId
  std::vector<int> lengths;           // real lengths before padding
  std::size_t truncated_count = 0;
  int padded_len = 0;
};

// A small trainable text encoder. Token and position embeddings feed a stack
// of context-mixing layers:
//
//   y_i = tanh(Ws x_i + Wp x_{i-1} + Wc c_i + b)
//
// where c_i is the mean of all positions (bidirectional kind) or of the
// prefix up to i (causal kind). The pooled representation is position 0 for
// bidirectional backbones and the last non-padding position for causal ones.
class Encoder {
 public:
  struct Layer {
    Eigen::MatrixXf w_self;  // hidden x hidden
    Eigen::MatrixXf w_prev;  // hidden x hidden
    Eigen::MatrixXf w_ctx;   // hidden x hidden
    Eigen::MatrixXf bias;    // hidden x 1
  };

  struct Cache {
    std::vector<int> ids;
    std::vector<Eigen::MatrixXf> layer_inputs;  // hidden x n per layer
    std::vector<Eigen::MatrixXf> layer_outputs;
    int pooled_position = 0;
  };

  Encoder() = default;
  static Encoder seeded(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const SubwordTokenizer& tokenizer() const { return tokenizer_; }
  bool empty() const { return config_.hidden_size == 0; }

  EncoderHandle handle() const;
  std::uint64_t fingerprint() const;

  Eigen::VectorXf forward(const std::vector<int>& ids, int length, Cache* cache = nullptr) const;

  // Parameter registry in serialization order: embeddings, positions, then
  // per-layer w_self, w_prev, w_ctx, bias.
  std::vector<const Eigen::MatrixXf*> parameters() const;
  std::vector<Eigen::MatrixXf*> parameters();
  std::vector<std::string> parameter_names() const;

  // Accumulates parameter gradients for one document; returns the gradient
  // w.r.t. the input embeddings implicitly by writing into grads.
  void backward(const Cache& cache, const Eigen::VectorXf& d_pooled,
                std::vector<Eigen::MatrixXf>& grads) const;

 private:
  EncoderConfig config_;
  SubwordTokenizer tokenizer_{0};
  Eigen::MatrixXf embeddings_;  // vocab x hidden (row per token)
  Eigen::MatrixXf positions_;   // max_seq x hidden
  std::vector<Layer> layers_;

  friend class ClassifierModel;
  friend struct CheckpointCodec;
};

// Encoder plus a single affine classification head.
class ClassifierModel {
 public:
  ClassifierModel() = default;

  const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }
  int num_classes() const { return num_classes_; }
  std::int64_t head_init_seed() const { return head_init_seed_; }

  std::string encoder_fingerprint() const { return emodetect::util::hex64(encoder_.fingerprint()); }
  std::string head_fingerprint() const;

  // All trainable tensors: encoder parameters followed by head weight/bias.
  std::vector<Eigen::MatrixXf*> parameters();
  std::vector<const Eigen::MatrixXf*> parameters() const;

 private:
  Encoder encoder_;
  Eigen::MatrixXf head_weight_;  // num_classes x hidden
  Eigen::MatrixXf head_bias_;    // num_classes x 1
  int num_classes_ = 0;
  std::int64_t head_init_seed_ = 0;

  friend ClassifierModel attach_head(const Encoder&, int, std::int64_t);
  friend ClassifierModel swap_head(const ClassifierModel&, int, std::int64_t);
  friend struct CheckpointCodec;
  friend struct ModelOps;
};

// --- backbone loading -----------------------------------------------------------

using BackboneRegistry = std::map<std::string, std::filesystem::path>;

BackboneRegistry load_backbone_registry(const std::filesystem::path& path);

// Resolves built-in tiny backbones ("tiny-bi", "tiny-causal", optionally
// parameterized as tiny-bi-h64-l2-v4096-m512) deterministically from the id,
// or loads the encoder of a registered checkpoint.
Encoder load_encoder(const std::string& backbone_id, const BackboneRegistry& registry = {});

ClassifierModel attach_head(const Encoder& encoder, int num_classes, std::int64_t seed);
ClassifierModel swap_head(const ClassifierModel& model, int new_num_classes, std::int64_t seed);

TokenBatch encode_batch(const Encoder& encoder, const std::vector<std::string>& texts,
                        int max_len);

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // normalized, sums to 1
};

std::vector<Prediction> predict(const ClassifierModel& model, const std::vector<std::string>& texts,
                                int max_len = 0);

// --- training ---------------------------------------------------------------------

struct TrainOptions {
  double learning_rate = 5e-3;
  double weight_decay = 0.01;
  int warmup_steps = 0;
  long total_steps = 0;  // 0 disables the linear decay
  double clip_norm = 1.0;
  int max_len = 64;
};

// Decoupled-weight-decay adaptive optimizer with linear warmup then linear
// decay to zero over total_steps.
class AdamW {
 public:
  AdamW(const TrainOptions& options, const std::vector<Eigen::MatrixXf*>& params);

  void apply(const std::vector<Eigen::MatrixXf*>& params,
             const std::vector<Eigen::MatrixXf>& grads);
  double current_lr() const;
  double clip_norm() const;
  long step() const { return step_; }

 private:
  TrainOptions options_;
  std::vector<Eigen::MatrixXf> m_;
  std::vector<Eigen::MatrixXf> v_;
  long step_ = 0;
};

struct GradAccumulator {
  std::vector<Eigen::MatrixXf> grads;
  double loss_sum = 0.0;
  long examples = 0;

  void reset();
};

GradAccumulator make_accumulator(const ClassifierModel& model);

// Forward/backward over one micro-batch; adds into the accumulator. Throws
// NonFiniteLossError (without epoch/step context; the trainer re-tags it).
void accumulate_gradients(const ClassifierModel& model, const std::vector<std::string>& texts,
                          const std::vector<int>& labels, int max_len, GradAccumulator& acc);

// Mean-scales, clips, and applies the accumulated gradients as one step.
void apply_step(ClassifierModel& model, GradAccumulator& acc, AdamW& optimizer);

// --- checkpoints -----------------------------------------------------------------------

struct CheckpointMeta {
  std::string stage_name;
  int epoch = 0;
  evalkit::MetricsReport val_metrics;
  std::int64_t model_seed = 0;
  corpora::SeedTriple data_seeds;
  std::string config_digest;
};

struct LoadedCheckpoint {
  ClassifierModel model;
  CheckpointMeta meta;
};

// Directory layout: <dir>/weights.bin (binary tensors with checksum) and
// <dir>/meta.json. Writes are atomic (write-then-rename).
void save_checkpoint(const ClassifierModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& dir);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace emodetect::backend
