#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hateharness/detail/rng.hpp"

namespace hateharness::encoder {

enum class GroupKind { Embeddings, EncoderLayer, Head };

// A trainable parameter group: the embedding table, one encoder layer, or the
// pooling-and-classification head.
struct Group {
  GroupKind kind = GroupKind::Embeddings;
  int layer = 0;  // 1-based, EncoderLayer only

  static Group embeddings() { return {GroupKind::Embeddings, 0}; }
  static Group encoder_layer(int j) { return {GroupKind::EncoderLayer, j}; }
  static Group head() { return {GroupKind::Head, 0}; }

  bool operator==(const Group&) const = default;
};

inline std::string group_name(const Group& g) {
  switch (g.kind) {
    case GroupKind::Embeddings: return "embeddings";
    case GroupKind::EncoderLayer: return "layer_" + std::to_string(g.layer);
    case GroupKind::Head: return "head";
  }
  throw std::logic_error("unmapped group kind");
}

struct EncoderSpec {
  int n_encoder_layers = 12;

  int group_count() const { return n_encoder_layers + 2; }

  // Bottom to top: embeddings, layer_1 .. layer_N, head.
  std::vector<Group> groups() const {
    std::vector<Group> out;
    out.reserve(static_cast<std::size_t>(group_count()));
    out.push_back(Group::embeddings());
    for (int j = 1; j <= n_encoder_layers; ++j) out.push_back(Group::encoder_layer(j));
    out.push_back(Group::head());
    return out;
  }

  int group_index(const Group& g) const {
    switch (g.kind) {
      case GroupKind::Embeddings: return 0;
      case GroupKind::EncoderLayer:
        if (g.layer < 1 || g.layer > n_encoder_layers)
          throw std::runtime_error("unknown group: " + group_name(g));
        return g.layer;
      case GroupKind::Head: return n_encoder_layers + 1;
    }
    throw std::logic_error("unmapped group kind");
  }
};

struct TokenBatch {
  std::vector<std::vector<int>> rows;  // equal lengths; padding at the end
  int pad_id = 0;
};

using Logits = std::vector<std::array<double, 2>>;

struct Tensor {
  std::vector<double> value;
  std::vector<double> grad;

  explicit Tensor(std::size_t n) : value(n, 0.0), grad(n, 0.0) {}
};

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const EncoderSpec& spec() const = 0;
  std::vector<Group> parameter_groups() const { return spec().groups(); }

  virtual void set_trainable(std::span<const Group> groups, bool trainable) = 0;
  virtual bool is_trainable(const Group& g) const = 0;

  virtual Logits forward(const TokenBatch& batch) const = 0;

  // Accumulates gradients of the mean cross-entropy loss into the tensors'
  // grad buffers and returns the loss; labels use index 0 = non-hate.
  virtual double forward_backward(const TokenBatch& batch, std::span<const int> labels,
                                  Logits* out_logits = nullptr) = 0;
  virtual void zero_grads() = 0;

  virtual std::vector<Tensor*> group_tensors(const Group& g) = 0;
  virtual std::vector<const Tensor*> group_tensors(const Group& g) const = 0;

  virtual int vocab_size() const = 0;
};

// Deterministic desk-scale stand-in for a pretrained layered encoder: seeded
// token embeddings, N per-position tanh mixing layers, mean pooling over
// non-pad positions and a linear two-way head. It exposes the same group
// structure the schedule machinery operates on and trains in seconds.
class MockEncoder final : public Encoder {
 public:
  struct Config {
    int n_layers = 2;
    int hidden_dim = 16;
    int vocab_size = 4096;
    std::uint64_t seed = 1;
  };

  explicit MockEncoder(const Config& cfg)
      : cfg_(cfg), spec_{cfg.n_layers}, emb_(0), head_w_(0), head_b_(0) {
    if (cfg.n_layers < 1) throw std::runtime_error("mock encoder: need at least one layer");
    if (cfg.hidden_dim < 1) throw std::runtime_error("mock encoder: hidden_dim must be positive");
    if (cfg.vocab_size < 3) throw std::runtime_error("mock encoder: vocab_size too small");

    const int d = cfg.hidden_dim;
    emb_ = Tensor(static_cast<std::size_t>(cfg.vocab_size) * d);
    for (int j = 0; j < cfg.n_layers; ++j)
      layers_.push_back({Tensor(static_cast<std::size_t>(d) * d), Tensor(d)});
    head_w_ = Tensor(2 * static_cast<std::size_t>(d));
    head_b_ = Tensor(2);
    trainable_.assign(static_cast<std::size_t>(spec_.group_count()), true);

    std::mt19937_64 rng(cfg.seed);
    for (auto& v : emb_.value) v = detail::uniform_range(rng, -0.5, 0.5);
    for (auto& layer : layers_) {
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          layer.w.value[static_cast<std::size_t>(r) * d + c] =
              (r == c ? 1.0 : 0.0) + detail::uniform_range(rng, -0.05, 0.05);
      // biases start at zero
    }
    for (auto& v : head_w_.value) v = detail::uniform_range(rng, -0.1, 0.1);
  }

  const Config& config() const { return cfg_; }
  const EncoderSpec& spec() const override { return spec_; }
  int vocab_size() const override { return cfg_.vocab_size; }

  void set_trainable(std::span<const Group> groups, bool trainable) override {
    for (const auto& g : groups)
      trainable_[static_cast<std::size_t>(spec_.group_index(g))] = trainable;
  }

  bool is_trainable(const Group& g) const override {
    return trainable_[static_cast<std::size_t>(spec_.group_index(g))];
  }

  Logits forward(const TokenBatch& batch) const override {
    validate_batch(batch);
    Logits logits(batch.rows.size());
    RowWork work;
    for (std::size_t b = 0; b < batch.rows.size(); ++b)
      logits[b] = forward_row(batch.rows[b], batch.pad_id, work);
    return logits;
  }

  double forward_backward(const TokenBatch& batch, std::span<const int> labels,
                          Logits* out_logits = nullptr) override {
    validate_batch(batch);
    if (labels.size() != batch.rows.size())
      throw std::runtime_error("forward_backward: label count does not match batch");
    for (int y : labels)
      if (y != 0 && y != 1) throw std::runtime_error("forward_backward: label must be 0 or 1");
    if (batch.rows.empty()) return 0.0;

    if (out_logits) out_logits->resize(batch.rows.size());
    const double inv_b = 1.0 / static_cast<double>(batch.rows.size());
    double loss = 0.0;
    RowWork work;
    for (std::size_t b = 0; b < batch.rows.size(); ++b) {
      const auto row_logits = forward_row(batch.rows[b], batch.pad_id, work);
      if (out_logits) (*out_logits)[b] = row_logits;

      // stable softmax cross-entropy
      const double m = std::max(row_logits[0], row_logits[1]);
      const double e0 = std::exp(row_logits[0] - m);
      const double e1 = std::exp(row_logits[1] - m);
      const double z = e0 + e1;
      const double p[2] = {e0 / z, e1 / z};
      loss += -std::log(p[labels[b]]) * inv_b;

      std::array<double, 2> dlogits{p[0] * inv_b, p[1] * inv_b};
      dlogits[static_cast<std::size_t>(labels[b])] -= inv_b;
      backward_row(batch.rows[b], batch.pad_id, work, dlogits);
    }
    return loss;
  }

  void zero_grads() override {
    auto zero = [](Tensor& t) { std::fill(t.grad.begin(), t.grad.end(), 0.0); };
    zero(emb_);
    for (auto& l : layers_) {
      zero(l.w);
      zero(l.b);
    }
    zero(head_w_);
    zero(head_b_);
  }

  std::vector<Tensor*> group_tensors(const Group& g) override {
    switch (g.kind) {
      case GroupKind::Embeddings: return {&emb_};
      case GroupKind::EncoderLayer: {
        auto& l = layers_[static_cast<std::size_t>(spec_.group_index(g)) - 1];
        return {&l.w, &l.b};
      }
      case GroupKind::Head: return {&head_w_, &head_b_};
    }
    throw std::logic_error("unmapped group kind");
  }

  std::vector<const Tensor*> group_tensors(const Group& g) const override {
    auto* self = const_cast<MockEncoder*>(this);
    std::vector<const Tensor*> out;
    for (auto* t : self->group_tensors(g)) out.push_back(t);
    return out;
  }

 private:
  struct Layer {
    Tensor w;  // hidden_dim x hidden_dim, row major
    Tensor b;  // hidden_dim
  };

  // Per-row scratch reused across the batch.
  struct RowWork {
    std::vector<std::vector<double>> acts;  // level 0..N, each len x d
    std::vector<int> tokens;                // non-pad token ids
    std::vector<double> pooled;
  };

  void validate_batch(const TokenBatch& batch) const {
    for (const auto& row : batch.rows) {
      if (row.size() != batch.rows.front().size())
        throw std::runtime_error("forward: ragged batch rows");
      for (int id : row)
        if (id < 0 || id >= cfg_.vocab_size)
          throw std::runtime_error("forward: token id " + std::to_string(id) +
                                   " outside vocabulary of " + std::to_string(cfg_.vocab_size));
    }
  }

  std::array<double, 2> forward_row(const std::vector<int>& row, int pad_id, RowWork& w) const {
    const int d = cfg_.hidden_dim;
    w.tokens.clear();
    for (int id : row)
      if (id != pad_id) w.tokens.push_back(id);
    const std::size_t len = w.tokens.size();

    w.acts.assign(static_cast<std::size_t>(cfg_.n_layers) + 1, {});
    for (auto& level : w.acts) level.assign(len * static_cast<std::size_t>(d), 0.0);

    for (std::size_t p = 0; p < len; ++p) {
      const double* e = &emb_.value[static_cast<std::size_t>(w.tokens[p]) * d];
      std::copy(e, e + d, &w.acts[0][p * static_cast<std::size_t>(d)]);
    }
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const auto& wt = layers_[static_cast<std::size_t>(l)].w.value;
      const auto& bt = layers_[static_cast<std::size_t>(l)].b.value;
      for (std::size_t p = 0; p < len; ++p) {
        const double* in = &w.acts[static_cast<std::size_t>(l)][p * static_cast<std::size_t>(d)];
        double* out = &w.acts[static_cast<std::size_t>(l) + 1][p * static_cast<std::size_t>(d)];
        for (int r = 0; r < d; ++r) {
          double acc = bt[static_cast<std::size_t>(r)];
          const double* wrow = &wt[static_cast<std::size_t>(r) * d];
          for (int c = 0; c < d; ++c) acc += wrow[c] * in[c];
          out[r] = std::tanh(acc);
        }
      }
    }

    w.pooled.assign(static_cast<std::size_t>(d), 0.0);
    if (len > 0) {
      const auto& top = w.acts[static_cast<std::size_t>(cfg_.n_layers)];
      for (std::size_t p = 0; p < len; ++p)
        for (int j = 0; j < d; ++j) w.pooled[static_cast<std::size_t>(j)] += top[p * d + j];
      for (auto& v : w.pooled) v /= static_cast<double>(len);
    }

    std::array<double, 2> logits{};
    for (int k = 0; k < 2; ++k) {
      double acc = head_b_.value[static_cast<std::size_t>(k)];
      for (int j = 0; j < d; ++j)
        acc += head_w_.value[static_cast<std::size_t>(k) * d + j] * w.pooled[static_cast<std::size_t>(j)];
      logits[static_cast<std::size_t>(k)] = acc;
    }
    return logits;
  }

  void backward_row(const std::vector<int>& row, int pad_id, const RowWork& w,
                    const std::array<double, 2>& dlogits) {
    (void)row;
    (void)pad_id;
    const int d = cfg_.hidden_dim;
    const std::size_t len = w.tokens.size();

    for (int k = 0; k < 2; ++k) {
      head_b_.grad[static_cast<std::size_t>(k)] += dlogits[static_cast<std::size_t>(k)];
      for (int j = 0; j < d; ++j)
        head_w_.grad[static_cast<std::size_t>(k) * d + j] +=
            dlogits[static_cast<std::size_t>(k)] * w.pooled[static_cast<std::size_t>(j)];
    }
    if (len == 0) return;

    std::vector<double> dpooled(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < 2; ++k)
        dpooled[static_cast<std::size_t>(j)] +=
            head_w_.value[static_cast<std::size_t>(k) * d + j] * dlogits[static_cast<std::size_t>(k)];

    const double inv_len = 1.0 / static_cast<double>(len);
    std::vector<double> dh(len * static_cast<std::size_t>(d));
    for (std::size_t p = 0; p < len; ++p)
      for (int j = 0; j < d; ++j) dh[p * d + j] = dpooled[static_cast<std::size_t>(j)] * inv_len;

    std::vector<double> dh_prev(len * static_cast<std::size_t>(d));
    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      auto& layer = layers_[static_cast<std::size_t>(l)];
      const auto& out_act = w.acts[static_cast<std::size_t>(l) + 1];
      const auto& in_act = w.acts[static_cast<std::size_t>(l)];
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      for (std::size_t p = 0; p < len; ++p) {
        for (int r = 0; r < d; ++r) {
          const double h = out_act[p * d + r];
          const double da = dh[p * d + r] * (1.0 - h * h);
          layer.b.grad[static_cast<std::size_t>(r)] += da;
          double* wgrad = &layer.w.grad[static_cast<std::size_t>(r) * d];
          const double* wval = &layer.w.value[static_cast<std::size_t>(r) * d];
          const double* in = &in_act[p * static_cast<std::size_t>(d)];
          for (int c = 0; c < d; ++c) {
            wgrad[c] += da * in[c];
            dh_prev[p * d + c] += wval[c] * da;
          }
        }
      }
      std::swap(dh, dh_prev);
    }

    for (std::size_t p = 0; p < len; ++p) {
      double* eg = &emb_.grad[static_cast<std::size_t>(w.tokens[p]) * d];
      for (int j = 0; j < d; ++j) eg[j] += dh[p * d + j];
    }
  }

  Config cfg_;
  EncoderSpec spec_;
  Tensor emb_;
  std::vector<Layer> layers_;
  Tensor head_w_;
  Tensor head_b_;
  std::vector<bool> trainable_;
};

// ---------------------------------------------------------------------------
// Backend selection by name
// ---------------------------------------------------------------------------

using BackendFactory = std::function<std::unique_ptr<Encoder>(const nlohmann::json& params)>;

inline std::map<std::string, BackendFactory>& backend_registry() {
  static std::map<std::string, BackendFactory> registry{
      {"mock", [](const nlohmann::json& params) -> std::unique_ptr<Encoder> {
         MockEncoder::Config cfg;
         if (params.contains("n_layers")) cfg.n_layers = params["n_layers"].get<int>();
         if (params.contains("hidden_dim")) cfg.hidden_dim = params["hidden_dim"].get<int>();
         if (params.contains("vocab_size")) cfg.vocab_size = params["vocab_size"].get<int>();
         if (params.contains("seed")) cfg.seed = params["seed"].get<std::uint64_t>();
         return std::make_unique<MockEncoder>(cfg);
       }}};
  return registry;
}

// Hook for plugging in an external pretrained backend (weight files and the
// like travel through the params object).
inline void register_backend(const std::string& name, BackendFactory factory) {
  backend_registry()[name] = std::move(factory);
}

inline std::vector<std::string> available_backends() {
  std::vector<std::string> names;
  for (const auto& [name, _] : backend_registry()) names.push_back(name);
  return names;
}

inline std::unique_ptr<Encoder> make_encoder(const std::string& backend,
                                             const nlohmann::json& params = {}) {
  auto& registry = backend_registry();
  auto it = registry.find(backend);
  if (it == registry.end()) {
    std::string known;
    for (const auto& [name, _] : registry) known += (known.empty() ? "" : ", ") + name;
    throw std::runtime_error("unknown backend '" + backend + "' (available: " + known + ")");
  }
  return it->second(params);
}

}  // namespace hateharness::encoder
