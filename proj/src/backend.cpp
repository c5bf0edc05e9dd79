#include "emodetect/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emodetect/errors.hpp"
#include "emodetect/json_io.hpp"
#include "emodetect/util.hpp"

namespace emodetect::backend {

using json = nlohmann::json;

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::kBidirectionalEncoder ? "bidirectional-encoder" : "causal-decoder";
}

BackboneKind parse_backbone_kind(std::string_view text) {
  const std::string norm = util::to_lower(util::trim(text));
  if (norm == "bidirectional-encoder") return BackboneKind::kBidirectionalEncoder;
  if (norm == "causal-decoder") return BackboneKind::kCausalDecoder;
  throw IncompatibleBackboneError("unknown backbone kind: " + std::string(text));
}

// --- tokenizer ------------------------------------------------------------------

std::vector<int> SubwordTokenizer::encode(std::string_view text, int max_len,
                                          bool* truncated) const {
  std::vector<int> ids;
  ids.push_back(kBosId);
  const int piece_space = vocab_size_ - 2;
  bool cut = false;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) break;
    std::string_view word = text.substr(start, i - start);
    for (std::size_t off = 0; off < word.size(); off += 4) {
      const std::string_view piece = word.substr(off, 4);
      if (static_cast<int>(ids.size()) >= max_len) {
        cut = true;
        break;
      }
      ids.push_back(2 + static_cast<int>(util::fnv1a64(piece) %
                                         static_cast<std::uint64_t>(piece_space)));
    }
    if (cut) break;
  }
  if (truncated != nullptr) *truncated = cut;
  return ids;
}

// --- encoder -------------------------------------------------------------------------

namespace {

Eigen::MatrixXf seeded_matrix(int rows, int cols, float scale, util::Rng& rng) {
  Eigen::MatrixXf m(rows, cols);
  // Column-major fill order, matching Eigen's storage.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      m(r, c) = scale * static_cast<float>(rng.next_normal());
    }
  }
  return m;
}

std::uint64_t fingerprint_tensors(const std::vector<const Eigen::MatrixXf*>& tensors) {
  std::uint64_t hash = 1469598103934665603ull;
  for (const auto* tensor : tensors) {
    const auto* data = reinterpret_cast<const unsigned char*>(tensor->data());
    const std::size_t bytes = static_cast<std::size_t>(tensor->size()) * sizeof(float);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash ^= data[i];
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

}  // namespace

Encoder Encoder::seeded(const EncoderConfig& config, std::uint64_t seed) {
  if (config.hidden_size <= 0 || config.layers <= 0 || config.vocab_size <= 8 ||
      config.max_seq_len <= 0) {
    throw IncompatibleBackboneError("encoder config has non-positive dimensions");
  }
  Encoder encoder;
  encoder.config_ = config;
  encoder.tokenizer_ = SubwordTokenizer(config.vocab_size);
  util::Rng rng(seed);
  const int h = config.hidden_size;
  encoder.embeddings_ = seeded_matrix(config.vocab_size, h, 0.1f, rng);
  encoder.positions_ = seeded_matrix(config.max_seq_len, h, 0.02f, rng);
  const float mix_scale = 0.4f / std::sqrt(static_cast<float>(h));
  for (int l = 0; l < config.layers; ++l) {
    Layer layer;
    layer.w_self = seeded_matrix(h, h, mix_scale, rng);
    // Residual-like start: self mixing near identity.
    for (int d = 0; d < h; ++d) layer.w_self(d, d) += 1.0f;
    layer.w_prev = seeded_matrix(h, h, mix_scale, rng);
    layer.w_ctx = seeded_matrix(h, h, mix_scale, rng);
    layer.bias = Eigen::MatrixXf::Zero(h, 1);
    encoder.layers_.push_back(std::move(layer));
  }
  return encoder;
}

EncoderHandle Encoder::handle() const {
  EncoderHandle handle;
  handle.backbone_id = config_.backbone_id;
  handle.backbone_kind = config_.kind;
  handle.hidden_size = config_.hidden_size;
  handle.max_seq_len = config_.max_seq_len;
  handle.parameter_fingerprint = util::hex64(fingerprint());
  return handle;
}

std::uint64_t Encoder::fingerprint() const { return fingerprint_tensors(parameters()); }

std::vector<const Eigen::MatrixXf*> Encoder::parameters() const {
  std::vector<const Eigen::MatrixXf*> params = {&embeddings_, &positions_};
  for (const auto& layer : layers_) {
    params.push_back(&layer.w_self);
    params.push_back(&layer.w_prev);
    params.push_back(&layer.w_ctx);
    params.push_back(&layer.bias);
  }
  return params;
}

std::vector<Eigen::MatrixXf*> Encoder::parameters() {
  std::vector<Eigen::MatrixXf*> params = {&embeddings_, &positions_};
  for (auto& layer : layers_) {
    params.push_back(&layer.w_self);
    params.push_back(&layer.w_prev);
    params.push_back(&layer.w_ctx);
    params.push_back(&layer.bias);
  }
  return params;
}

std::vector<std::string> Encoder::parameter_names() const {
  std::vector<std::string> names = {"embeddings", "positions"};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    names.push_back(prefix + "w_self");
    names.push_back(prefix + "w_prev");
    names.push_back(prefix + "w_ctx");
    names.push_back(prefix + "bias");
  }
  return names;
}

namespace {

// Context matrix C (hidden x n): full-sequence mean for bidirectional
// backbones, prefix means for causal ones.
Eigen::MatrixXf context_of(const Eigen::MatrixXf& x, BackboneKind kind) {
  const int n = static_cast<int>(x.cols());
  Eigen::MatrixXf c(x.rows(), n);
  if (kind == BackboneKind::kBidirectionalEncoder) {
    const Eigen::VectorXf mean = x.rowwise().mean();
    for (int i = 0; i < n; ++i) c.col(i) = mean;
  } else {
    Eigen::VectorXf running = Eigen::VectorXf::Zero(x.rows());
    for (int i = 0; i < n; ++i) {
      running += x.col(i);
      c.col(i) = running / static_cast<float>(i + 1);
    }
  }
  return c;
}

}  // namespace

Eigen::VectorXf Encoder::forward(const std::vector<int>& ids, int length, Cache* cache) const {
  const int n = std::min<int>(length, static_cast<int>(ids.size()));
  if (n <= 0) throw ModelNotReadyError();
  const int h = config_.hidden_size;

  Eigen::MatrixXf x(h, n);
  for (int i = 0; i < n; ++i) {
    x.col(i) = embeddings_.row(ids[i]).transpose() + positions_.row(i).transpose();
  }

  if (cache != nullptr) {
    cache->ids.assign(ids.begin(), ids.begin() + n);
    cache->layer_inputs.clear();
    cache->layer_outputs.clear();
  }

  for (const auto& layer : layers_) {
    if (cache != nullptr) cache->layer_inputs.push_back(x);
    const Eigen::MatrixXf c = context_of(x, config_.kind);
    Eigen::MatrixXf pre = layer.w_self * x + layer.w_ctx * c;
    pre.colwise() += Eigen::VectorXf(layer.bias.col(0));
    if (n > 1) {
      pre.rightCols(n - 1) += layer.w_prev * x.leftCols(n - 1);
    }
    x = pre.array().tanh().matrix();
    if (cache != nullptr) cache->layer_outputs.push_back(x);
  }

  const int pooled = config_.kind == BackboneKind::kBidirectionalEncoder ? 0 : n - 1;
  if (cache != nullptr) cache->pooled_position = pooled;
  return x.col(pooled);
}

void Encoder::backward(const Cache& cache, const Eigen::VectorXf& d_pooled,
                       std::vector<Eigen::MatrixXf>& grads) const {
  const int n = static_cast<int>(cache.ids.size());
  const int h = config_.hidden_size;
  Eigen::MatrixXf dx = Eigen::MatrixXf::Zero(h, n);
  dx.col(cache.pooled_position) = d_pooled;

  // grads layout mirrors parameters(): [embeddings, positions, layer tensors...]
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const Layer& layer = layers_[static_cast<std::size_t>(l)];
    const Eigen::MatrixXf& x = cache.layer_inputs[static_cast<std::size_t>(l)];
    const Eigen::MatrixXf& y = cache.layer_outputs[static_cast<std::size_t>(l)];

    const Eigen::MatrixXf dpre =
        (dx.array() * (1.0f - y.array().square())).matrix();
    const Eigen::MatrixXf c = context_of(x, config_.kind);

    const std::size_t base = 2 + static_cast<std::size_t>(l) * 4;
    grads[base + 0] += dpre * x.transpose();              // w_self
    if (n > 1) {
      grads[base + 1] += dpre.rightCols(n - 1) * x.leftCols(n - 1).transpose();  // w_prev
    }
    grads[base + 2] += dpre * c.transpose();              // w_ctx
    grads[base + 3].col(0) += dpre.rowwise().sum();       // bias

    Eigen::MatrixXf dx_next = layer.w_self.transpose() * dpre;
    if (n > 1) {
      dx_next.leftCols(n - 1) += layer.w_prev.transpose() * dpre.rightCols(n - 1);
    }
    const Eigen::MatrixXf g = layer.w_ctx.transpose() * dpre;  // hidden x n
    if (config_.kind == BackboneKind::kBidirectionalEncoder) {
      const Eigen::VectorXf shared = g.rowwise().sum() / static_cast<float>(n);
      dx_next.colwise() += shared;
    } else {
      // c_i averages the prefix, so position j collects the suffix of g_i/(i+1).
      Eigen::VectorXf suffix = Eigen::VectorXf::Zero(h);
      for (int i = n - 1; i >= 0; --i) {
        suffix += g.col(i) / static_cast<float>(i + 1);
        dx_next.col(i) += suffix;
      }
    }
    dx = std::move(dx_next);
  }

  for (int i = 0; i < n; ++i) {
    grads[0].row(cache.ids[static_cast<std::size_t>(i)]) += dx.col(i).transpose();
    grads[1].row(i) += dx.col(i).transpose();
  }
}

// --- classifier model --------------------------------------------------------------

std::string ClassifierModel::head_fingerprint() const {
  return util::hex64(fingerprint_tensors({&head_weight_, &head_bias_}));
}

std::vector<Eigen::MatrixXf*> ClassifierModel::parameters() {
  auto params = encoder_.parameters();
  params.push_back(&head_weight_);
  params.push_back(&head_bias_);
  return params;
}

std::vector<const Eigen::MatrixXf*> ClassifierModel::parameters() const {
  auto params = encoder_.parameters();
  std::vector<const Eigen::MatrixXf*> out(params.begin(), params.end());
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

BackboneRegistry load_backbone_registry(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigInvalidError(std::string("invalid backbone registry JSON: ") + e.what());
  }
  BackboneRegistry registry;
  for (const auto& [key, value] : doc.items()) {
    registry[key] = std::filesystem::path(value.get<std::string>());
  }
  return registry;
}

namespace {

std::optional<EncoderConfig> parse_builtin_id(const std::string& backbone_id) {
  EncoderConfig config;
  config.backbone_id = backbone_id;
  std::string rest;
  if (backbone_id == "tiny-bi" || backbone_id.rfind("tiny-bi-", 0) == 0) {
    config.kind = BackboneKind::kBidirectionalEncoder;
    rest = backbone_id.size() > 7 ? backbone_id.substr(8) : "";
  } else if (backbone_id == "tiny-causal" || backbone_id.rfind("tiny-causal-", 0) == 0) {
    config.kind = BackboneKind::kCausalDecoder;
    rest = backbone_id.size() > 11 ? backbone_id.substr(12) : "";
  } else {
    return std::nullopt;
  }
  if (!rest.empty()) {
    for (const auto& part : util::split(rest, '-')) {
      if (part.size() < 2) return std::nullopt;
      int value = 0;
      try {
        value = std::stoi(part.substr(1));
      } catch (const std::exception&) {
        return std::nullopt;
      }
      switch (part[0]) {
        case 'h': config.hidden_size = value; break;
        case 'l': config.layers = value; break;
        case 'v': config.vocab_size = value; break;
        case 'm': config.max_seq_len = value; break;
        default: return std::nullopt;
      }
    }
  }
  return config;
}

}  // namespace

Encoder load_encoder(const std::string& backbone_id, const BackboneRegistry& registry) {
  if (auto config = parse_builtin_id(backbone_id)) {
    return Encoder::seeded(*config, util::fnv1a64(backbone_id));
  }
  auto it = registry.find(backbone_id);
  if (it == registry.end()) throw BackboneNotFoundError(backbone_id);
  LoadedCheckpoint loaded = load_checkpoint(it->second);
  return loaded.model.encoder();
}

ClassifierModel attach_head(const Encoder& encoder, int num_classes, std::int64_t seed) {
  if (num_classes < 2) throw InvalidClassCountError(num_classes);
  if (encoder.empty()) throw ModelNotReadyError();
  ClassifierModel model;
  model.encoder_ = encoder;
  model.num_classes_ = num_classes;
  model.head_init_seed_ = seed;
  util::Rng rng(static_cast<std::uint64_t>(seed));
  model.head_weight_ = seeded_matrix(num_classes, encoder.config().hidden_size, 0.02f, rng);
  model.head_bias_ = Eigen::MatrixXf::Zero(num_classes, 1);
  return model;
}

ClassifierModel swap_head(const ClassifierModel& model, int new_num_classes, std::int64_t seed) {
  return attach_head(model.encoder(), new_num_classes, seed);
}

TokenBatch encode_batch(const Encoder& encoder, const std::vector<std::string>& texts,
                        int max_len) {
  if (encoder.empty()) throw ModelNotReadyError();
  if (max_len < 1 || max_len > encoder.config().max_seq_len) {
    throw IncompatibleBackboneError("max_len " + std::to_string(max_len) +
                                    " outside backbone limit " +
                                    std::to_string(encoder.config().max_seq_len));
  }
  TokenBatch batch;
  int widest = 0;
  for (const auto& text : texts) {
    bool truncated = false;
    auto ids = encoder.tokenizer().encode(text, max_len, &truncated);
    if (truncated) ++batch.truncated_count;
    widest = std::max<int>(widest, static_cast<int>(ids.size()));
    batch.lengths.push_back(static_cast<int>(ids.size()));
    batch.ids.push_back(std::move(ids));
  }
  batch.padded_len = widest;
  for (auto& row : batch.ids) {
    row.resize(static_cast<std::size_t>(widest), SubwordTokenizer::kPadId);
  }
  return batch;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXf& logits) {
  Eigen::VectorXd z = logits.cast<double>();
  const double peak = z.maxCoeff();
  Eigen::VectorXd ex = (z.array() - peak).exp();
  return ex / ex.sum();
}

struct ForwardOut {
  Eigen::VectorXf pooled;
  Eigen::VectorXd probs;
};

}  // namespace

struct ModelOps {
  static ForwardOut forward(const ClassifierModel& model, const std::vector<int>& ids, int length,
                            Encoder::Cache* cache) {
    ForwardOut out;
    out.pooled = model.encoder_.forward(ids, length, cache);
    const Eigen::VectorXf logits =
        model.head_weight_ * out.pooled + model.head_bias_.col(0);
    out.probs = softmax(logits);
    return out;
  }

  static const Eigen::MatrixXf& head_weight(const ClassifierModel& model) {
    return model.head_weight_;
  }
};

std::vector<Prediction> predict(const ClassifierModel& model, const std::vector<std::string>& texts,
                                int max_len) {
  if (model.num_classes() < 2 || model.encoder().empty()) throw ModelNotReadyError();
  const int limit = max_len > 0 ? max_len : model.encoder().config().max_seq_len;
  const TokenBatch batch = encode_batch(model.encoder(), texts, limit);
  std::vector<Prediction> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const ForwardOut fwd = ModelOps::forward(model, batch.ids[i], batch.lengths[i], nullptr);
    Prediction prediction;
    prediction.scores.resize(static_cast<std::size_t>(model.num_classes()));
    int best = 0;
    for (int c = 0; c < model.num_classes(); ++c) {
      prediction.scores[static_cast<std::size_t>(c)] = fwd.probs(c);
      if (fwd.probs(c) > fwd.probs(best)) best = c;
    }
    prediction.label = best;
    out.push_back(std::move(prediction));
  }
  return out;
}

// --- training ----------------------------------------------------------------------

AdamW::AdamW(const TrainOptions& options, const std::vector<Eigen::MatrixXf*>& params)
    : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto* p : params) {
    m_.push_back(Eigen::MatrixXf::Zero(p->rows(), p->cols()));
    v_.push_back(Eigen::MatrixXf::Zero(p->rows(), p->cols()));
  }
}

double AdamW::current_lr() const {
  const long t = step_ + 1;
  double scale = 1.0;
  if (options_.warmup_steps > 0 && t <= options_.warmup_steps) {
    scale = static_cast<double>(t) / static_cast<double>(options_.warmup_steps);
  } else if (options_.total_steps > 0 && options_.total_steps > options_.warmup_steps) {
    const double remaining = static_cast<double>(options_.total_steps - t);
    const double horizon =
        static_cast<double>(options_.total_steps - options_.warmup_steps);
    scale = std::max(0.0, remaining / horizon);
  }
  return options_.learning_rate * scale;
}

void AdamW::apply(const std::vector<Eigen::MatrixXf*>& params,
                  const std::vector<Eigen::MatrixXf>& grads) {
  constexpr float kBeta1 = 0.9f;
  constexpr float kBeta2 = 0.999f;
  constexpr float kEps = 1e-8f;
  const float lr = static_cast<float>(current_lr());
  ++step_;
  const float bias1 = 1.0f - std::pow(kBeta1, static_cast<float>(step_));
  const float bias2 = 1.0f - std::pow(kBeta2, static_cast<float>(step_));
  const float decay = static_cast<float>(options_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = grads[i];
    m = kBeta1 * m + (1.0f - kBeta1) * g;
    v.array() = kBeta2 * v.array() + (1.0f - kBeta2) * g.array().square();
    auto& p = *params[i];
    p.array() -= lr * ((m.array() / bias1) / ((v.array() / bias2).sqrt() + kEps));
    if (decay > 0.0f) {
      p.array() -= lr * decay * p.array();
    }
  }
}

double AdamW::clip_norm() const { return options_.clip_norm; }

void GradAccumulator::reset() {
  for (auto& g : grads) g.setZero();
  loss_sum = 0.0;
  examples = 0;
}

GradAccumulator make_accumulator(const ClassifierModel& model) {
  GradAccumulator acc;
  for (const auto* p : model.parameters()) {
    acc.grads.push_back(Eigen::MatrixXf::Zero(p->rows(), p->cols()));
  }
  return acc;
}

void accumulate_gradients(const ClassifierModel& model, const std::vector<std::string>& texts,
                          const std::vector<int>& labels, int max_len, GradAccumulator& acc) {
  if (texts.size() != labels.size()) {
    throw LengthMismatchError("texts and labels must align");
  }
  const TokenBatch batch = encode_batch(model.encoder(), texts, max_len);
  const std::size_t head_w = acc.grads.size() - 2;
  const std::size_t head_b = acc.grads.size() - 1;

  for (std::size_t i = 0; i < texts.size(); ++i) {
    Encoder::Cache cache;
    const ForwardOut fwd = ModelOps::forward(model, batch.ids[i], batch.lengths[i], &cache);
    const int gold = labels[i];
    if (gold < 0 || gold >= model.num_classes()) {
      throw SchemaMismatchError("gold label index " + std::to_string(gold) +
                                " outside class range");
    }
    const double p_gold = fwd.probs(gold);
    const double loss = -std::log(std::max(p_gold, 1e-300));
    if (!std::isfinite(loss)) throw NonFiniteLossError(-1, -1);
    acc.loss_sum += loss;
    acc.examples += 1;

    Eigen::VectorXf dlogits = fwd.probs.cast<float>();
    dlogits(gold) -= 1.0f;
    acc.grads[head_w] += dlogits * fwd.pooled.transpose();
    acc.grads[head_b].col(0) += dlogits;
    const Eigen::VectorXf d_pooled =
        ModelOps::head_weight(model).transpose() * dlogits;
    // Encoder gradients occupy the leading slots of the accumulator, in
    // encoder parameter order.
    model.encoder().backward(cache, d_pooled, acc.grads);
  }
}

void apply_step(ClassifierModel& model, GradAccumulator& acc, AdamW& optimizer) {
  if (acc.examples == 0) return;
  const float inv = 1.0f / static_cast<float>(acc.examples);
  double sq_norm = 0.0;
  for (auto& g : acc.grads) {
    g *= inv;
    sq_norm += static_cast<double>(g.squaredNorm());
  }
  if (!std::isfinite(sq_norm)) throw NonFiniteLossError(-1, optimizer.step());
  auto params = model.parameters();
  const double norm = std::sqrt(sq_norm);
  const double clip = optimizer.clip_norm();
  if (clip > 0.0 && norm > clip) {
    const float scale = static_cast<float>(clip / norm);
    for (auto& g : acc.grads) g *= scale;
  }
  optimizer.apply(params, acc.grads);
  acc.reset();
}

// --- checkpoints ------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'E', 'M', 'O', 'D', 'C', 'K', 'P', '1'};

void append_u32(std::string& buffer, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) buffer.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void append_u64(std::string& buffer, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) buffer.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& buffer, std::size_t& offset) {
  if (offset + 4 > buffer.size()) throw CorruptCheckpointError("truncated checkpoint blob");
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[offset + i])) << (8 * i);
  }
  offset += 4;
  return value;
}

std::uint64_t read_u64(const std::string& buffer, std::size_t& offset) {
  if (offset + 8 > buffer.size()) throw CorruptCheckpointError("truncated checkpoint blob");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(buffer[offset + i])) << (8 * i);
  }
  offset += 8;
  return value;
}

}  // namespace

struct CheckpointCodec {
  static std::string encode(const ClassifierModel& model) {
    json header;
    header["backbone_id"] = model.encoder_.config_.backbone_id;
    header["kind"] = to_string(model.encoder_.config_.kind);
    header["hidden_size"] = model.encoder_.config_.hidden_size;
    header["layers"] = model.encoder_.config_.layers;
    header["vocab_size"] = model.encoder_.config_.vocab_size;
    header["max_seq_len"] = model.encoder_.config_.max_seq_len;
    header["num_classes"] = model.num_classes_;
    header["head_init_seed"] = model.head_init_seed_;
    json tensors = json::array();
    auto params = model.parameters();
    auto names = model.encoder_.parameter_names();
    names.push_back("head.weight");
    names.push_back("head.bias");
    for (std::size_t i = 0; i < params.size(); ++i) {
      tensors.push_back({{"name", names[i]},
                         {"rows", params[i]->rows()},
                         {"cols", params[i]->cols()}});
    }
    header["tensors"] = std::move(tensors);
    const std::string header_text = header.dump();

    std::string blob(kMagic, sizeof(kMagic));
    append_u32(blob, static_cast<std::uint32_t>(header_text.size()));
    blob += header_text;
    std::string data;
    for (const auto* p : params) {
      data.append(reinterpret_cast<const char*>(p->data()),
                  static_cast<std::size_t>(p->size()) * sizeof(float));
    }
    append_u64(blob, util::fnv1a64(data));
    blob += data;
    return blob;
  }

  static ClassifierModel decode(const std::string& blob) {
    if (blob.size() < sizeof(kMagic) || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
      throw CorruptCheckpointError("bad checkpoint magic");
    }
    std::size_t offset = sizeof(kMagic);
    const std::uint32_t header_len = read_u32(blob, offset);
    if (offset + header_len > blob.size()) {
      throw CorruptCheckpointError("truncated checkpoint header");
    }
    json header;
    try {
      header = json::parse(blob.substr(offset, header_len));
    } catch (const json::exception& e) {
      throw CorruptCheckpointError(std::string("invalid checkpoint header: ") + e.what());
    }
    offset += header_len;
    const std::uint64_t expected_digest = read_u64(blob, offset);
    const std::string data = blob.substr(offset);
    if (util::fnv1a64(data) != expected_digest) {
      throw CorruptCheckpointError("checkpoint weight digest mismatch");
    }

    ClassifierModel model;
    model.encoder_.config_.backbone_id = header.value("backbone_id", "");
    model.encoder_.config_.kind = parse_backbone_kind(header.value("kind", ""));
    model.encoder_.config_.hidden_size = header.value("hidden_size", 0);
    model.encoder_.config_.layers = header.value("layers", 0);
    model.encoder_.config_.vocab_size = header.value("vocab_size", 0);
    model.encoder_.config_.max_seq_len = header.value("max_seq_len", 0);
    model.encoder_.tokenizer_ = SubwordTokenizer(model.encoder_.config_.vocab_size);
    model.num_classes_ = header.value("num_classes", 0);
    model.head_init_seed_ = header.value("head_init_seed", 0ll);

    const auto& config = model.encoder_.config_;
    model.encoder_.embeddings_.resize(config.vocab_size, config.hidden_size);
    model.encoder_.positions_.resize(config.max_seq_len, config.hidden_size);
    model.encoder_.layers_.resize(static_cast<std::size_t>(config.layers));
    for (auto& layer : model.encoder_.layers_) {
      layer.w_self.resize(config.hidden_size, config.hidden_size);
      layer.w_prev.resize(config.hidden_size, config.hidden_size);
      layer.w_ctx.resize(config.hidden_size, config.hidden_size);
      layer.bias.resize(config.hidden_size, 1);
    }
    model.head_weight_.resize(model.num_classes_, config.hidden_size);
    model.head_bias_.resize(model.num_classes_, 1);

    auto params = model.parameters();
    const json& tensors = header.at("tensors");
    if (tensors.size() != params.size()) {
      throw CorruptCheckpointError("checkpoint tensor manifest does not match model shape");
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto rows = tensors[i].value("rows", 0);
      const auto cols = tensors[i].value("cols", 0);
      if (rows != params[i]->rows() || cols != params[i]->cols()) {
        throw CorruptCheckpointError("tensor shape mismatch for " +
                                     tensors[i].value("name", std::string("?")));
      }
      const std::size_t bytes = static_cast<std::size_t>(params[i]->size()) * sizeof(float);
      if (cursor + bytes > data.size()) throw CorruptCheckpointError("truncated tensor data");
      std::memcpy(params[i]->data(), data.data() + cursor, bytes);
      cursor += bytes;
    }
    if (cursor != data.size()) throw CorruptCheckpointError("trailing bytes in checkpoint");
    return model;
  }
};

void save_checkpoint(const ClassifierModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  util::atomic_write_file(dir / "weights.bin", CheckpointCodec::encode(model));
  json meta_json;
  meta_json["stage_name"] = meta.stage_name;
  meta_json["epoch"] = meta.epoch;
  meta_json["val_metrics"] = json_io::metrics_to_json(meta.val_metrics);
  meta_json["model_seed"] = meta.model_seed;
  meta_json["data_seeds"] = {{"train", meta.data_seeds.train},
                             {"val", meta.data_seeds.val},
                             {"test", meta.data_seeds.test}};
  meta_json["config_digest"] = meta.config_digest;
  util::atomic_write_file(dir / "meta.json", meta_json.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto weights_path = dir / "weights.bin";
  if (!std::filesystem::exists(weights_path)) {
    throw CorruptCheckpointError("missing weights blob: " + weights_path.string());
  }
  LoadedCheckpoint loaded;
  loaded.model = CheckpointCodec::decode(util::read_file(weights_path));
  const auto meta_path = dir / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    json meta_json;
    try {
      meta_json = json::parse(util::read_file(meta_path));
    } catch (const json::exception& e) {
      throw CorruptCheckpointError(std::string("invalid checkpoint meta: ") + e.what());
    }
    loaded.meta.stage_name = meta_json.value("stage_name", "");
    loaded.meta.epoch = meta_json.value("epoch", 0);
    if (meta_json.contains("val_metrics")) {
      loaded.meta.val_metrics = json_io::metrics_from_json(meta_json.at("val_metrics"));
    }
    loaded.meta.model_seed = meta_json.value("model_seed", 0ll);
    if (meta_json.contains("data_seeds")) {
      loaded.meta.data_seeds.train = meta_json.at("data_seeds").value("train", 0ll);
      loaded.meta.data_seeds.val = meta_json.at("data_seeds").value("val", 0ll);
      loaded.meta.data_seeds.test = meta_json.at("data_seeds").value("test", 0ll);
    }
    loaded.meta.config_digest = meta_json.value("config_digest", "");
  }
  return loaded;
}

}  // namespace emodetect::backend
