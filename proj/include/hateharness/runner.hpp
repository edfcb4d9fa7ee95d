#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hateharness/corpus.hpp"
#include "hateharness/deploy.hpp"
#include "hateharness/encoder.hpp"
#include "hateharness/eval.hpp"
#include "hateharness/finetune.hpp"
#include "hateharness/preprocess.hpp"

namespace hateharness::runner {

using corpus::DatasetBundle;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string train_dataset;
  std::vector<std::string> test_datasets;
  bool clean = false;
  finetune::Strategy strategy = finetune::StrategyNone{};
  std::optional<int> epochs;
  std::uint64_t seed = 7;
  std::string backend = "mock";
  json backend_params = json::object();
  double base_lr = 2e-5;
  int batch_size = preprocess::kDefaultBatchSize;
  std::array<double, 3> ratios{0.81, 0.09, 0.10};
  std::vector<std::string> trim_rules;    // applied to the training dataset before splitting
  int augment_factor = 0;                 // 0 = off; >= 2 duplicates hate records
  bool augment_train_only = false;        // restrict duplication to the training split
  bool allow_custom_params = false;       // permit strategy params outside the studied grids
  std::string output_dir = "runs";        // empty string disables persistence
};

inline json strategy_to_json(const finetune::Strategy& s) {
  json out;
  if (std::holds_alternative<finetune::StrategyNone>(s)) {
    out["strategy"] = "none";
  } else if (const auto* d = std::get_if<finetune::StrategyDiscriminative>(&s)) {
    out["strategy"] = "discriminative";
    out["strategy-params"] = {{"top-lr", d->top_lr}, {"decay", d->decay}, {"head-lr", d->head_lr}};
  } else if (const auto* w = std::get_if<finetune::StrategyWarmup>(&s)) {
    out["strategy"] = "warmup";
    out["strategy-params"] = {{"steps", w->steps}, {"decay-after", w->decay_after}};
  } else {
    const auto& u = std::get<finetune::StrategyUnfreeze>(s);
    out["strategy"] = "unfreeze";
    out["strategy-params"] = {{"last-layers", u.last_layers}};
  }
  return out;
}

inline finetune::Strategy strategy_from_json(const json& cfg) {
  const std::string name = cfg.value("strategy", "none");
  const json params = cfg.value("strategy-params", json::object());
  if (name == "none") return finetune::StrategyNone{};
  if (name == "discriminative") {
    finetune::StrategyDiscriminative d;
    d.top_lr = params.value("top-lr", d.top_lr);
    d.decay = params.value("decay", d.decay);
    d.head_lr = params.value("head-lr", d.head_lr);
    return d;
  }
  if (name == "warmup") {
    finetune::StrategyWarmup w;
    if (!params.contains("steps")) throw std::runtime_error("warmup strategy needs 'steps'");
    w.steps = params["steps"].get<int>();
    w.decay_after = params.value("decay-after", true);
    return w;
  }
  if (name == "unfreeze") {
    finetune::StrategyUnfreeze u;
    if (!params.contains("last-layers"))
      throw std::runtime_error("unfreeze strategy needs 'last-layers'");
    u.last_layers = params["last-layers"].get<int>();
    return u;
  }
  throw std::runtime_error("unknown strategy '" + name + "'");
}

// The studied grids; anything else requires allow_custom_params.
inline void validate_strategy_params(const ExperimentConfig& cfg) {
  if (cfg.allow_custom_params) return;
  if (const auto* w = std::get_if<finetune::StrategyWarmup>(&cfg.strategy)) {
    for (int s : {25, 50, 75, 100})
      if (w->steps == s) return;
    throw std::runtime_error("warmup steps " + std::to_string(w->steps) +
                             " outside the studied grid {25, 50, 75, 100}; set allow-custom");
  }
  if (const auto* u = std::get_if<finetune::StrategyUnfreeze>(&cfg.strategy)) {
    for (int k : {4, 8, 12})
      if (u->last_layers == k) return;
    throw std::runtime_error("unfreeze depth " + std::to_string(u->last_layers) +
                             " outside the studied grid {4, 8, 12}; set allow-custom");
  }
  if (const auto* d = std::get_if<finetune::StrategyDiscriminative>(&cfg.strategy)) {
    const finetune::StrategyDiscriminative ref;
    if (d->top_lr != ref.top_lr || d->decay != ref.decay || d->head_lr != ref.head_lr)
      throw std::runtime_error("discriminative parameters differ from the studied setting; "
                               "set allow-custom");
  }
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j = strategy_to_json(cfg.strategy);
  j["dataset"] = cfg.train_dataset;
  j["test-datasets"] = cfg.test_datasets;
  j["clean"] = cfg.clean;
  j["epochs"] = cfg.epochs ? json(*cfg.epochs) : json();
  j["seed"] = cfg.seed;
  j["backend"] = cfg.backend;
  j["backend-params"] = cfg.backend_params;
  j["base-lr"] = cfg.base_lr;
  j["batch-size"] = cfg.batch_size;
  j["ratios"] = cfg.ratios;
  j["trim-rules"] = cfg.trim_rules;
  j["augment-factor"] = cfg.augment_factor;
  j["augment-train-only"] = cfg.augment_train_only;
  j["allow-custom"] = cfg.allow_custom_params;
  j["output-dir"] = cfg.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.contains("dataset")) throw std::runtime_error("config: missing 'dataset'");
  cfg.train_dataset = j["dataset"].get<std::string>();
  if (j.contains("test-datasets"))
    cfg.test_datasets = j["test-datasets"].get<std::vector<std::string>>();
  cfg.clean = j.value("clean", false);
  cfg.strategy = strategy_from_json(j);
  if (j.contains("epochs") && !j["epochs"].is_null()) cfg.epochs = j["epochs"].get<int>();
  cfg.seed = j.value("seed", cfg.seed);
  cfg.backend = j.value("backend", cfg.backend);
  cfg.backend_params = j.value("backend-params", json::object());
  cfg.base_lr = j.value("base-lr", cfg.base_lr);
  cfg.batch_size = j.value("batch-size", cfg.batch_size);
  if (j.contains("ratios")) {
    auto r = j["ratios"].get<std::vector<double>>();
    if (r.size() != 3) throw std::runtime_error("config: 'ratios' needs three values");
    cfg.ratios = {r[0], r[1], r[2]};
  }
  if (j.contains("trim-rules")) cfg.trim_rules = j["trim-rules"].get<std::vector<std::string>>();
  cfg.augment_factor = j.value("augment-factor", 0);
  cfg.augment_train_only = j.value("augment-train-only", false);
  cfg.allow_custom_params = j.value("allow-custom", false);
  cfg.output_dir = j.value("output-dir", cfg.output_dir);
  return cfg;
}

// Hash of the canonicalized config (sorted keys, defaults filled, artifact
// locations excluded) — stable under whitespace and key order.
inline std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output-dir");
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(j.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset resolution
// ---------------------------------------------------------------------------

// Named lookup, in-memory bundles first, then <root>/<name>.csv or .jsonl.
class DatasetResolver {
 public:
  DatasetResolver() = default;
  explicit DatasetResolver(std::filesystem::path root) : root_(std::move(root)) {}

  void add_memory(DatasetBundle bundle) {
    auto name = bundle.name;
    memory_[std::move(name)] = std::move(bundle);
  }

  bool exists(const std::string& name) const {
    return memory_.contains(name) || !file_for(name).empty();
  }

  DatasetBundle resolve(const std::string& name) const {
    if (auto it = memory_.find(name); it != memory_.end()) return it->second;
    const auto path = file_for(name);
    if (path.empty())
      throw std::runtime_error("unknown dataset '" + name + "' (searched " +
                               (root_.empty() ? std::string("memory only") : root_.string()) + ")");
    return corpus::load_dataset(path, corpus::format_from_path(path));
  }

 private:
  std::filesystem::path file_for(const std::string& name) const {
    if (root_.empty()) return {};
    for (const char* ext : {".csv", ".jsonl"}) {
      auto p = root_ / (name + ext);
      if (std::filesystem::exists(p)) return p;
    }
    return {};
  }

  std::filesystem::path root_;
  std::map<std::string, DatasetBundle> memory_;
};

// ---------------------------------------------------------------------------
// Run records and persistence
// ---------------------------------------------------------------------------

struct RunRecord {
  ExperimentConfig config;
  std::string hash;
  std::string started_at;
  std::string finished_at;
  std::array<std::size_t, 3> split_sizes{0, 0, 0};  // realized train/validate/test
  finetune::TrainHistory history;
  std::vector<eval::MetricsReport> reports;
  std::string run_dir;
  std::string error;  // nonempty for failed grid cells
};

inline std::string now_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json record_to_json(const RunRecord& rec) {
  json j;
  j["hash"] = rec.hash;
  j["config"] = config_to_json(rec.config);
  j["started_at"] = rec.started_at;
  j["finished_at"] = rec.finished_at;
  j["split_sizes"] = rec.split_sizes;
  json hist = json::array();
  for (const auto& e : rec.history.epochs)
    hist.push_back({{"train_loss", e.train_loss},
                    {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy},
                    {"val_mcc", e.val_mcc}});
  j["history"] = hist;
  json reports = json::array();
  for (const auto& r : rec.reports)
    reports.push_back({{"dataset", r.dataset},
                       {"accuracy", r.accuracy},
                       {"mcc", r.mcc},
                       {"valid", r.valid}});
  j["reports"] = reports;
  j["run_dir"] = rec.run_dir;
  j["error"] = rec.error;
  return j;
}

inline RunRecord record_from_json(const json& j) {
  RunRecord rec;
  rec.hash = j.value("hash", "");
  rec.config = config_from_json(j.at("config"));
  rec.started_at = j.value("started_at", "");
  rec.finished_at = j.value("finished_at", "");
  if (j.contains("split_sizes")) {
    const auto sizes = j["split_sizes"].get<std::vector<std::size_t>>();
    if (sizes.size() == 3) rec.split_sizes = {sizes[0], sizes[1], sizes[2]};
  }
  for (const auto& e : j.value("history", json::array())) {
    finetune::EpochStats s;
    s.train_loss = e.value("train_loss", 0.0);
    s.val_loss = e.value("val_loss", 0.0);
    s.val_accuracy = e.value("val_accuracy", 0.0);
    s.val_mcc = e.value("val_mcc", 0.0);
    rec.history.epochs.push_back(s);
  }
  for (const auto& r : j.value("reports", json::array())) {
    eval::MetricsReport m;
    m.dataset = r.value("dataset", "");
    m.accuracy = r.value("accuracy", 0.0);
    m.mcc = r.value("mcc", 0.0);
    m.valid = r.value("valid", false);
    rec.reports.push_back(m);
  }
  rec.run_dir = j.value("run_dir", "");
  rec.error = j.value("error", "");
  return rec;
}

// Append is serialized so concurrent grid cells keep the file well-formed.
inline void append_run(const std::filesystem::path& runs_jsonl, const RunRecord& rec) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (runs_jsonl.has_parent_path()) std::filesystem::create_directories(runs_jsonl.parent_path());
  std::ofstream out(runs_jsonl, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + runs_jsonl.string());
  out << record_to_json(rec).dump() << '\n';
}

inline std::vector<RunRecord> load_runs(const std::filesystem::path& runs_jsonl) {
  std::ifstream in(runs_jsonl);
  if (!in) throw std::runtime_error("cannot open " + runs_jsonl.string());
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    out.push_back(record_from_json(json::parse(line)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

namespace detail_run {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

inline std::string fresh_run_dir_name(const std::string& hash) {
  static std::atomic<unsigned> counter{0};
  std::string stamp = now_iso();
  for (auto& c : stamp)
    if (c == ':') c = '-';
  return hash.substr(0, 12) + "-" + stamp + "-" + std::to_string(counter++);
}

}  // namespace detail_run

inline void validate_config(const ExperimentConfig& cfg, const DatasetResolver& data) {
  if (cfg.train_dataset.empty()) throw std::runtime_error("config: no training dataset");
  if (!data.exists(cfg.train_dataset))
    throw std::runtime_error("config: unknown dataset '" + cfg.train_dataset + "'");
  for (const auto& name : cfg.test_datasets)
    if (!data.exists(name)) throw std::runtime_error("config: unknown dataset '" + name + "'");
  validate_strategy_params(cfg);
  if (cfg.augment_factor != 0 && cfg.augment_factor < 2)
    throw std::runtime_error("config: augment-factor must be 0 or >= 2");
}

// split -> (optional clean) -> train -> predict -> eval for each test set.
// Test sets are the held-out splits of the named datasets under this run's
// seed and ratios; they are evaluated on raw text.
inline RunRecord run_experiment(const ExperimentConfig& cfg, const DatasetResolver& data) {
  using detail_run::stage;

  stage("configure", [&] { validate_config(cfg, data); return 0; });

  RunRecord rec;
  rec.config = cfg;
  rec.hash = config_hash(cfg);
  rec.started_at = now_iso();

  DatasetBundle train_full = stage("load", [&] { return data.resolve(cfg.train_dataset); });

  if (!cfg.trim_rules.empty()) {
    train_full = stage("trim", [&] {
      std::vector<deploy::TrimRule> rules;
      for (const auto& name : cfg.trim_rules) rules.push_back(deploy::trim_rule_from_name(name));
      static const auto lexicon = corpus::build_lexicon();
      return deploy::trim(train_full, rules, lexicon).bundle;
    });
  }
  if (cfg.augment_factor >= 2 && !cfg.augment_train_only) {
    train_full = stage("augment",
                       [&] { return deploy::augment_duplicate_hate(train_full, cfg.augment_factor); });
  }

  preprocess::SplitConfig split_cfg{cfg.ratios[0], cfg.ratios[1], cfg.ratios[2], cfg.seed};
  auto split = stage("split", [&] { return preprocess::split_dataset(train_full, split_cfg); });

  if (cfg.augment_factor >= 2 && cfg.augment_train_only) {
    split.train = stage("augment",
                        [&] { return deploy::augment_duplicate_hate(split.train, cfg.augment_factor); });
  }
  if (cfg.clean) {
    split.train = stage("clean", [&] { return preprocess::clean_bundle(split.train); });
    split.validate = stage("clean", [&] { return preprocess::clean_bundle(split.validate); });
  }
  rec.split_sizes = {split.train.records.size(), split.validate.records.size(),
                     split.test.records.size()};

  json backend_params = cfg.backend_params;
  if (!backend_params.contains("seed")) backend_params["seed"] = cfg.seed;
  auto model = stage("backend", [&] { return encoder::make_encoder(cfg.backend, backend_params); });
  preprocess::HashTokenizer tokenizer(model->vocab_size());

  finetune::TrainConfig tc;
  tc.base_lr = cfg.base_lr;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.seed = cfg.seed;
  tc.strategy = cfg.strategy;
  rec.history = stage("train", [&] {
    return finetune::train(*model, split.train, split.validate, tokenizer, tc);
  });

  for (const auto& name : cfg.test_datasets) {
    const auto report = stage("eval", [&] {
      const auto full = data.resolve(name);
      const auto test_split = preprocess::split_dataset(full, split_cfg).test;
      const auto preds = finetune::predict(*model, test_split, tokenizer, cfg.batch_size);
      std::vector<corpus::Label> truth;
      truth.reserve(test_split.records.size());
      for (const auto& r : test_split.records) {
        if (!r.label) throw std::runtime_error("unlabeled record '" + r.id + "' in '" + name + "'");
        truth.push_back(*r.label);
      }
      return eval::make_report(name, eval::confusion(truth, preds));
    });
    rec.reports.push_back(report);
  }

  rec.finished_at = now_iso();

  if (!cfg.output_dir.empty()) {
    detail_run::stage("persist", [&] {
      const std::filesystem::path out_dir(cfg.output_dir);
      const auto run_dir = out_dir / detail_run::fresh_run_dir_name(rec.hash);
      std::filesystem::create_directories(run_dir);
      rec.run_dir = run_dir.string();
      std::ofstream record_file(run_dir / "record.json");
      record_file << record_to_json(rec).dump(2) << '\n';
      append_run(out_dir / "runs.jsonl", rec);
      return 0;
    });
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Grid execution
// ---------------------------------------------------------------------------

struct GridSpec {
  ExperimentConfig base;
  std::vector<std::string> datasets;
  std::vector<finetune::Strategy> strategies;
  std::vector<bool> clean{false};
  std::vector<std::uint64_t> seeds;  // empty -> the base seed
};

inline std::vector<ExperimentConfig> grid_cells(const GridSpec& grid) {
  if (grid.datasets.empty() || grid.strategies.empty() || grid.clean.empty())
    throw std::runtime_error("grid: empty axis");
  const auto seeds = grid.seeds.empty() ? std::vector<std::uint64_t>{grid.base.seed} : grid.seeds;
  std::vector<ExperimentConfig> cells;
  for (const auto& dataset : grid.datasets)
    for (const auto& strategy : grid.strategies)
      for (bool clean : grid.clean)
        for (auto seed : seeds) {
          ExperimentConfig cfg = grid.base;
          cfg.train_dataset = dataset;
          cfg.strategy = strategy;
          cfg.clean = clean;
          cfg.seed = seed;
          cfg.epochs.reset();  // let unfreeze strategies force their own count
          cells.push_back(std::move(cfg));
        }
  return cells;
}

// One record per cell, order-stable by cell index; failed cells carry their
// error and the grid continues.
inline std::vector<RunRecord> run_grid(const GridSpec& grid, const DatasetResolver& data,
                                       int workers = 1) {
  const auto cells = grid_cells(grid);
  std::vector<RunRecord> results(cells.size());

  auto run_cell = [&](std::size_t i) {
    try {
      results[i] = run_experiment(cells[i], data);
    } catch (const std::exception& e) {
      RunRecord rec;
      rec.config = cells[i];
      rec.hash = config_hash(cells[i]);
      rec.error = e.what();
      if (!cells[i].output_dir.empty())
        append_run(std::filesystem::path(cells[i].output_dir) / "runs.jsonl", rec);
      results[i] = std::move(rec);
    }
  };

  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) break;
          run_cell(i);
        }
      });
    for (auto& t : pool) t.join();
  }
  return results;
}

// ---------------------------------------------------------------------------
// Paper-style result tables
// ---------------------------------------------------------------------------

inline std::string train_label(const ExperimentConfig& cfg) {
  return cfg.clean ? cfg.train_dataset + " (clean)" : cfg.train_dataset;
}

inline std::map<std::string, corpus::DatasetStats> collect_test_stats(
    std::span<const RunRecord> records, const DatasetResolver& data) {
  std::map<std::string, corpus::DatasetStats> stats;
  for (const auto& rec : records)
    for (const auto& rep : rec.reports)
      if (!stats.contains(rep.dataset)) stats[rep.dataset] = corpus::compute_stats(data.resolve(rep.dataset));
  return stats;
}

// Rows grouped by training set and technique, both in first-appearance order
// (concurrent grid cells may finish out of order in runs.jsonl); a (train,
// technique) cell with no valid result renders as a single "/" placeholder
// row, matching the published table convention.
inline std::vector<eval::TableRow> build_table(
    std::span<const RunRecord> records,
    const std::map<std::string, corpus::DatasetStats>& test_stats) {
  std::vector<std::pair<std::string, std::string>> cell_order;
  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> cells;
  std::vector<std::string> section_order;
  for (const auto& rec : records) {
    const auto key = std::make_pair(train_label(rec.config),
                                    finetune::strategy_label(rec.config.strategy));
    if (!cells.contains(key)) cell_order.push_back(key);
    if (std::find(section_order.begin(), section_order.end(), key.first) == section_order.end())
      section_order.push_back(key.first);
    cells[key].push_back(&rec);
  }

  std::vector<eval::TableRow> rows;
  for (const auto& section : section_order) {
    for (const auto& key : cell_order) {
      if (key.first != section) continue;
      for (const RunRecord* rec : cells.at(key)) {
        std::size_t valid_here = 0;
        for (const auto& rep : rec->reports) {
          if (rep.mcc <= 0.0) continue;
          eval::TableRow row;
          row.section = key.first;
          row.train_label = key.first;
          row.technique = key.second;
          row.test_dataset = rep.dataset;
          row.accuracy = rep.accuracy;
          row.mcc = rep.mcc;
          rows.push_back(std::move(row));
          ++valid_here;
        }
        if (valid_here == 0) {
          eval::TableRow row;
          row.section = key.first;
          row.train_label = key.first;
          row.technique = key.second;
          row.placeholder = true;
          rows.push_back(std::move(row));
        }
      }
    }
  }
  eval::apply_report_rules(rows, test_stats);
  return rows;
}

}  // namespace hateharness::runner
