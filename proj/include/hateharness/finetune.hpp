#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hateharness/corpus.hpp"
#include "hateharness/encoder.hpp"
#include "hateharness/eval.hpp"
#include "hateharness/preprocess.hpp"

namespace hateharness::finetune {

using corpus::DatasetBundle;
using corpus::Label;
using encoder::EncoderSpec;
using encoder::Group;

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

struct StrategyNone {};

struct StrategyDiscriminative {
  double top_lr = 1.9e-5;
  double decay = 0.9;
  double head_lr = 2e-5;
};

struct StrategyWarmup {
  int steps = 0;
  bool decay_after = true;  // linear decay to zero past the warmup peak
};

struct StrategyUnfreeze {
  int last_layers = 4;  // forces epochs = last_layers
};

using Strategy = std::variant<StrategyNone, StrategyDiscriminative, StrategyWarmup,
                              StrategyUnfreeze>;

inline std::string strategy_label(const Strategy& s) {
  if (std::holds_alternative<StrategyNone>(s)) return "None";
  if (std::holds_alternative<StrategyDiscriminative>(s)) return "Discrimination";
  if (const auto* w = std::get_if<StrategyWarmup>(&s))
    return std::to_string(w->steps) + " Warmup Steps";
  const auto& u = std::get<StrategyUnfreeze>(s);
  return "Gradually Unfreeze the Last " + std::to_string(u.last_layers) + " Layers";
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct TrainConfig {
  double base_lr = 2e-5;
  int batch_size = preprocess::kDefaultBatchSize;
  std::optional<int> epochs;  // defaults to 4; an unfreeze strategy forces its own count
  std::uint64_t seed = 7;
  Strategy strategy = StrategyNone{};
  AdamWConfig optimizer{};
  // "initial layer" read as the topmost encoder layer; flip to anchor the
  // discriminative rate at the bottom layer instead.
  bool llrd_anchor_top = true;
};

inline int effective_epochs(const TrainConfig& cfg) {
  if (const auto* u = std::get_if<StrategyUnfreeze>(&cfg.strategy)) {
    if (cfg.epochs && *cfg.epochs != u->last_layers)
      throw std::runtime_error("unfreeze(" + std::to_string(u->last_layers) + ") forces " +
                               std::to_string(u->last_layers) + " epochs, config says " +
                               std::to_string(*cfg.epochs));
    return u->last_layers;
  }
  return cfg.epochs.value_or(4);
}

// ---------------------------------------------------------------------------
// Discriminative learning rates (layer-wise decay)
// ---------------------------------------------------------------------------

// Per-group base rates indexed bottom to top (EncoderSpec::group_index).
// With the top anchor, layer N gets top_lr, each layer below decays by one
// factor, embeddings sit one factor below layer 1, and the head is reset to
// head_lr. The bottom anchor mirrors the geometric ladder the other way.
inline std::vector<double> discriminative_lrs(const EncoderSpec& spec, double top_lr = 1.9e-5,
                                              double decay = 0.9, double head_lr = 2e-5,
                                              bool anchor_top = true) {
  if (top_lr <= 0.0 || head_lr <= 0.0)
    throw std::runtime_error("discriminative_lrs: rates must be positive");
  if (decay <= 0.0 || decay > 1.0)
    throw std::runtime_error("discriminative_lrs: decay must be in (0, 1]");

  const int n = spec.n_encoder_layers;
  std::vector<double> rates(static_cast<std::size_t>(spec.group_count()), 0.0);
  for (int j = 1; j <= n; ++j) {
    const int steps_from_anchor = anchor_top ? (n - j) : (j - 1);
    rates[static_cast<std::size_t>(j)] = anchor_top ? top_lr * std::pow(decay, steps_from_anchor)
                                                    : top_lr / std::pow(decay, steps_from_anchor);
  }
  rates[0] = anchor_top ? top_lr * std::pow(decay, n) : top_lr * decay;  // embeddings
  rates[static_cast<std::size_t>(spec.group_count() - 1)] = head_lr;
  return rates;
}

// ---------------------------------------------------------------------------
// Gradual unfreezing
// ---------------------------------------------------------------------------

struct FreezePlan {
  int epochs = 0;
  std::vector<std::vector<Group>> trainable;  // one set per epoch, nondecreasing
};

// Epoch e (1-based) trains the head plus the top e encoder layers; the
// embeddings are never unfrozen.
inline FreezePlan freeze_plan(const EncoderSpec& spec, int k) {
  if (k < 1 || k > spec.n_encoder_layers)
    throw std::runtime_error("freeze_plan: k must be in [1, " +
                             std::to_string(spec.n_encoder_layers) + "], got " +
                             std::to_string(k));
  FreezePlan plan;
  plan.epochs = k;
  for (int e = 1; e <= k; ++e) {
    std::vector<Group> set{Group::head()};
    for (int j = spec.n_encoder_layers - e + 1; j <= spec.n_encoder_layers; ++j)
      set.push_back(Group::encoder_layer(j));
    plan.trainable.push_back(std::move(set));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Warmup multiplier
// ---------------------------------------------------------------------------

// W = 0 keeps the rate constant. Otherwise ramps linearly to 1 over the first
// W steps and, when decay_after is set, decays linearly to zero at step T.
inline double warmup_multiplier(long step, long warmup_steps, long total_steps,
                                bool decay_after = true) {
  if (total_steps < 1 || step < 0 || step >= total_steps)
    throw std::runtime_error("warmup_multiplier: step outside [0, total_steps)");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw std::runtime_error("warmup_multiplier: warmup_steps outside [0, total_steps)");
  if (warmup_steps == 0) return 1.0;
  if (step < warmup_steps)
    return static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (!decay_after) return 1.0;
  return static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup_steps);
}

struct LRSchedule {
  std::vector<double> group_rates;  // indexed by EncoderSpec::group_index
  long warmup_steps = 0;
  long total_steps = 1;
  bool decay_after = true;

  double multiplier(long step) const {
    return warmup_multiplier(step, warmup_steps, total_steps, decay_after);
  }
  double rate(int group_index, long step) const {
    return group_rates[static_cast<std::size_t>(group_index)] * multiplier(step);
  }
};

inline LRSchedule make_schedule(const EncoderSpec& spec, const TrainConfig& cfg,
                                long total_steps) {
  LRSchedule sched;
  sched.total_steps = total_steps;
  if (const auto* d = std::get_if<StrategyDiscriminative>(&cfg.strategy)) {
    sched.group_rates =
        discriminative_lrs(spec, d->top_lr, d->decay, d->head_lr, cfg.llrd_anchor_top);
  } else {
    sched.group_rates.assign(static_cast<std::size_t>(spec.group_count()), cfg.base_lr);
  }
  if (const auto* w = std::get_if<StrategyWarmup>(&cfg.strategy)) {
    sched.warmup_steps = w->steps;
    sched.decay_after = w->decay_after;
    if (sched.warmup_steps >= total_steps)
      throw std::runtime_error("warmup steps (" + std::to_string(sched.warmup_steps) +
                               ") must be below total steps (" + std::to_string(total_steps) + ")");
  }
  return sched;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

// Decoupled weight decay; moment state and step counts are per tensor, so a
// parameter unfrozen mid-run starts its own bias correction.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(encoder::Tensor& t, const std::string& key, double lr) {
    State& st = states_[key];
    if (st.m.empty()) {
      st.m.assign(t.value.size(), 0.0);
      st.v.assign(t.value.size(), 0.0);
    }
    st.t += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < t.value.size(); ++i) {
      const double g = t.grad[i];
      st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
      st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      t.value[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * t.value[i]);
    }
  }

 private:
  struct State {
    std::vector<double> m, v;
    long t = 0;
  };
  std::map<std::string, State> states_;
  AdamWConfig cfg_;
};

// ---------------------------------------------------------------------------
// Training and prediction
// ---------------------------------------------------------------------------

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_mcc = 0.0;

  bool operator==(const EpochStats&) const = default;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;

  bool operator==(const TrainHistory&) const = default;
};

inline Label label_from_logits(const std::array<double, 2>& logits) {
  // ties go to the lower index, which is non-hate
  return logits[1] > logits[0] ? Label::Hate : Label::NonHate;
}

namespace detail_train {

struct EncodedSet {
  std::vector<encoder::TokenBatch> batches;
  std::vector<std::vector<int>> labels;  // aligned with batches
};

inline EncodedSet encode_bundle(const DatasetBundle& bundle, const preprocess::Tokenizer& tok,
                                int batch_size, bool need_labels) {
  std::vector<std::vector<int>> encoded;
  std::vector<int> lengths;
  encoded.reserve(bundle.records.size());
  for (const auto& r : bundle.records) {
    encoded.push_back(tok.encode(r.text));
    lengths.push_back(static_cast<int>(encoded.back().size()));
  }
  const auto plan = preprocess::plan_batches(lengths, batch_size);

  EncodedSet out;
  for (const auto& b : plan.batches) {
    encoder::TokenBatch batch;
    batch.pad_id = tok.pad_id();
    std::vector<int> labels;
    for (std::size_t idx : b.indices) {
      auto row = encoded[idx];
      row.resize(static_cast<std::size_t>(b.padded_length), tok.pad_id());
      batch.rows.push_back(std::move(row));
      if (need_labels) {
        const auto& rec = bundle.records[idx];
        if (!rec.label)
          throw std::runtime_error("unlabeled record '" + rec.id + "' in '" + bundle.name + "'");
        labels.push_back(*rec.label == Label::Hate ? 1 : 0);
      }
    }
    out.batches.push_back(std::move(batch));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

inline double ce_loss(const encoder::Logits& logits, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double m = std::max(logits[i][0], logits[i][1]);
    const double z = std::exp(logits[i][0] - m) + std::exp(logits[i][1] - m);
    loss += -(logits[i][static_cast<std::size_t>(labels[i])] - m - std::log(z));
  }
  return logits.empty() ? 0.0 : loss / static_cast<double>(logits.size());
}

}  // namespace detail_train

using EpochCallback = std::function<void(int epoch, const encoder::Encoder&)>;

// Runs the configured schedule: per-group rates, warmup multiplier and freeze
// plan. Training order is the split order; with a fixed seed and the mock
// backend the history is bit-reproducible.
inline TrainHistory train(encoder::Encoder& model, const DatasetBundle& train_split,
                          const DatasetBundle& val_split, const preprocess::Tokenizer& tokenizer,
                          const TrainConfig& cfg, const EpochCallback& on_epoch_end = {}) {
  const int epochs = effective_epochs(cfg);
  if (train_split.records.empty()) throw std::runtime_error("train: empty training split");
  if (val_split.records.empty()) throw std::runtime_error("train: empty validation split");

  const auto& spec = model.spec();
  if (const auto* u = std::get_if<StrategyUnfreeze>(&cfg.strategy))
    if (u->last_layers > spec.n_encoder_layers)
      throw std::runtime_error("unfreeze(" + std::to_string(u->last_layers) +
                               ") exceeds the encoder's " +
                               std::to_string(spec.n_encoder_layers) + " layers");

  const auto train_set =
      detail_train::encode_bundle(train_split, tokenizer, cfg.batch_size, true);
  const auto val_set = detail_train::encode_bundle(val_split, tokenizer, cfg.batch_size, true);

  const long steps_per_epoch = static_cast<long>(train_set.batches.size());
  const auto sched = make_schedule(spec, cfg, steps_per_epoch * epochs);

  std::vector<std::vector<Group>> per_epoch;
  if (const auto* u = std::get_if<StrategyUnfreeze>(&cfg.strategy)) {
    per_epoch = freeze_plan(spec, u->last_layers).trainable;
  } else {
    per_epoch.assign(static_cast<std::size_t>(epochs), spec.groups());
  }

  const auto all_groups = spec.groups();
  AdamW opt(cfg.optimizer);
  TrainHistory history;
  long global_step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    model.set_trainable(all_groups, false);
    model.set_trainable(per_epoch[static_cast<std::size_t>(epoch)], true);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < train_set.batches.size(); ++b) {
      model.zero_grads();
      epoch_loss += model.forward_backward(train_set.batches[b], train_set.labels[b]);
      for (const auto& g : all_groups) {
        if (!model.is_trainable(g)) continue;
        const double lr = sched.rate(spec.group_index(g), global_step);
        const auto tensors = model.group_tensors(g);
        for (std::size_t ti = 0; ti < tensors.size(); ++ti)
          opt.step(*tensors[ti], encoder::group_name(g) + "/" + std::to_string(ti), lr);
      }
      ++global_step;
    }

    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(train_set.batches.size());
    std::vector<Label> y_true, y_pred;
    double val_loss = 0.0;
    for (std::size_t b = 0; b < val_set.batches.size(); ++b) {
      const auto logits = model.forward(val_set.batches[b]);
      val_loss += detail_train::ce_loss(logits, val_set.labels[b]) *
                  static_cast<double>(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        y_true.push_back(val_set.labels[b][i] == 1 ? Label::Hate : Label::NonHate);
        y_pred.push_back(label_from_logits(logits[i]));
      }
    }
    stats.val_loss = val_loss / static_cast<double>(y_true.size());
    const auto cm = eval::confusion(y_true, y_pred);
    stats.val_accuracy = eval::accuracy(cm);
    stats.val_mcc = eval::mcc(cm);
    history.epochs.push_back(stats);

    if (on_epoch_end) on_epoch_end(epoch, model);
  }
  return history;
}

inline std::vector<Label> predict(const encoder::Encoder& model, const DatasetBundle& bundle,
                                  const preprocess::Tokenizer& tokenizer,
                                  int batch_size = preprocess::kDefaultBatchSize) {
  const auto set = detail_train::encode_bundle(bundle, tokenizer, batch_size, false);
  std::vector<Label> out;
  out.reserve(bundle.records.size());
  for (const auto& batch : set.batches)
    for (const auto& logits : model.forward(batch)) out.push_back(label_from_logits(logits));
  return out;
}

}  // namespace hateharness::finetune
