#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "hateharness/fixtures.hpp"
#include "hateharness/runner.hpp"
#include "test_support.hpp"

using namespace hateharness;
using runner::DatasetResolver;
using runner::ExperimentConfig;
using testsupport::TempDir;

namespace {

corpus::DatasetBundle named_separable(std::string name, std::size_t n, std::uint64_t seed) {
  auto b = fixtures::synthetic_separable(n, seed);
  b.name = std::move(name);
  return b;
}

DatasetResolver desk_resolver() {
  DatasetResolver data;
  data.add_memory(named_separable("set_a", 150, 1));
  data.add_memory(named_separable("set_b", 150, 2));
  data.add_memory(named_separable("set_c", 150, 3));
  return data;
}

ExperimentConfig desk_config() {
  ExperimentConfig cfg;
  cfg.train_dataset = "set_a";
  cfg.test_datasets = {"set_a", "set_b"};
  cfg.backend_params = {{"n_layers", 12}, {"hidden_dim", 4}, {"vocab_size", 512}};
  cfg.base_lr = 0.02;
  cfg.batch_size = 4;
  cfg.seed = 7;
  cfg.output_dir.clear();  // no persistence unless a test asks for it
  return cfg;
}

}  // namespace

TEST_CASE("run_experiment trains, evaluates and reports") {
  const auto rec = runner::run_experiment(desk_config(), desk_resolver());
  CHECK(rec.history.epochs.size() == 4);
  REQUIRE(rec.reports.size() == 2);
  CHECK(rec.reports[0].dataset == "set_a");
  CHECK(rec.reports[1].dataset == "set_b");
  CHECK(rec.error.empty());
  CHECK_FALSE(rec.hash.empty());
  for (const auto& r : rec.reports) {
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    CHECK(r.valid == (r.mcc > 0.0));
  }
}

TEST_CASE("unfreeze experiments run their forced epoch count") {
  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyUnfreeze{8};
  const auto rec = runner::run_experiment(cfg, desk_resolver());
  CHECK(rec.history.epochs.size() == 8);
}

TEST_CASE("unknown datasets fail during configuration, before training") {
  auto cfg = desk_config();
  cfg.train_dataset = "missing_set";
  REQUIRE_THROWS_WITH(runner::run_experiment(cfg, desk_resolver()),
                      Catch::Contains("stage configure") && Catch::Contains("missing_set"));

  cfg = desk_config();
  cfg.test_datasets.push_back("also_missing");
  REQUIRE_THROWS_WITH(runner::run_experiment(cfg, desk_resolver()),
                      Catch::Contains("stage configure"));
}

TEST_CASE("strategy parameters outside the studied grids need the custom flag") {
  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyWarmup{42};
  REQUIRE_THROWS_WITH(runner::run_experiment(cfg, desk_resolver()),
                      Catch::Contains("allow-custom"));
  cfg.allow_custom_params = true;
  CHECK_NOTHROW(runner::run_experiment(cfg, desk_resolver()));
}

TEST_CASE("reruns of one config reproduce reports bit for bit") {
  const auto cfg = desk_config();
  const auto data = desk_resolver();
  const auto first = runner::run_experiment(cfg, data);
  const auto second = runner::run_experiment(cfg, data);
  REQUIRE(first.history == second.history);
  REQUIRE(first.reports.size() == second.reports.size());
  for (std::size_t i = 0; i < first.reports.size(); ++i) {
    REQUIRE(first.reports[i].accuracy == second.reports[i].accuracy);
    REQUIRE(first.reports[i].mcc == second.reports[i].mcc);
  }
}

TEST_CASE("config hashes ignore formatting but track semantics") {
  const char* text_a = R"({"dataset":"set_a","seed":7,"strategy":"none"})";
  const char* text_b = R"({
      "strategy": "none",
      "seed":    7,
      "dataset": "set_a"
  })";
  const auto cfg_a = runner::config_from_json(nlohmann::json::parse(text_a));
  const auto cfg_b = runner::config_from_json(nlohmann::json::parse(text_b));
  CHECK(runner::config_hash(cfg_a) == runner::config_hash(cfg_b));

  auto changed = cfg_a;
  changed.seed = 8;
  CHECK(runner::config_hash(changed) != runner::config_hash(cfg_a));
  changed = cfg_a;
  changed.strategy = finetune::StrategyWarmup{50};
  CHECK(runner::config_hash(changed) != runner::config_hash(cfg_a));
  changed = cfg_a;
  changed.train_dataset = "set_b";
  CHECK(runner::config_hash(changed) != runner::config_hash(cfg_a));
  changed = cfg_a;
  changed.output_dir = "elsewhere";  // artifact location is not semantic
  CHECK(runner::config_hash(changed) == runner::config_hash(cfg_a));
}

TEST_CASE("config json round-trips every field") {
  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyDiscriminative{};
  cfg.trim_rules = {"relevance_flag_false"};
  cfg.augment_factor = 2;
  cfg.augment_train_only = true;
  cfg.epochs = 5;
  const auto round = runner::config_from_json(runner::config_to_json(cfg));
  CHECK(runner::config_hash(round) == runner::config_hash(cfg));
  CHECK(round.trim_rules == cfg.trim_rules);
  CHECK(round.augment_factor == 2);
  CHECK(round.augment_train_only);
  CHECK(round.epochs == 5);
}

TEST_CASE("augmentation precedes splitting by default") {
  // set_a holds 150 records, 75 of them hate
  auto cfg = desk_config();
  cfg.test_datasets = {"set_b"};
  cfg.augment_factor = 2;

  const auto pre_split = runner::run_experiment(cfg, desk_resolver());
  // 150 + 75 duplicates = 225 records split 0.81 : 0.09 : 0.10
  CHECK(pre_split.split_sizes == std::array<std::size_t, 3>{182, 20, 23});

  cfg.augment_train_only = true;
  const auto post_split = runner::run_experiment(cfg, desk_resolver());
  // the 150-record split is (121, 13, 16); only the train split grows
  CHECK(post_split.split_sizes[1] == 13);
  CHECK(post_split.split_sizes[2] == 16);
  CHECK(post_split.split_sizes[0] > 121);
}

TEST_CASE("a one-by-one grid equals a single experiment") {
  runner::GridSpec grid;
  grid.base = desk_config();
  grid.datasets = {"set_a"};
  grid.strategies = {finetune::StrategyNone{}};
  const auto records = runner::run_grid(grid, desk_resolver());
  REQUIRE(records.size() == 1);

  const auto single = runner::run_experiment(desk_config(), desk_resolver());
  REQUIRE(records[0].reports.size() == single.reports.size());
  for (std::size_t i = 0; i < single.reports.size(); ++i) {
    CHECK(records[0].reports[i].mcc == single.reports[i].mcc);
    CHECK(records[0].reports[i].accuracy == single.reports[i].accuracy);
  }
}

TEST_CASE("failed grid cells are recorded and the grid continues") {
  runner::GridSpec grid;
  grid.base = desk_config();
  grid.datasets = {"set_a", "no_such_set", "set_b"};
  grid.strategies = {finetune::StrategyNone{}};
  const auto records = runner::run_grid(grid, desk_resolver());
  REQUIRE(records.size() == 3);
  CHECK(records[0].error.empty());
  CHECK(records[1].error.find("no_such_set") != std::string::npos);
  CHECK(records[2].error.empty());
  CHECK(records[0].config.train_dataset == "set_a");
  CHECK(records[2].config.train_dataset == "set_b");
}

TEST_CASE("the full strategy grid over three datasets yields 27 records") {
  runner::GridSpec grid;
  grid.base = desk_config();
  grid.base.test_datasets = {"set_b"};
  grid.datasets = {"set_a", "set_b", "set_c"};
  grid.strategies = {finetune::StrategyNone{},       finetune::StrategyDiscriminative{},
                     finetune::StrategyWarmup{25},   finetune::StrategyWarmup{50},
                     finetune::StrategyWarmup{75},   finetune::StrategyWarmup{100},
                     finetune::StrategyUnfreeze{4},  finetune::StrategyUnfreeze{8},
                     finetune::StrategyUnfreeze{12}};

  const auto records = runner::run_grid(grid, desk_resolver(), 2);
  REQUIRE(records.size() == 27);
  for (const auto& rec : records) CHECK(rec.error.empty());

  // order is stable by cell index: datasets outermost, strategies inner
  CHECK(records[0].config.train_dataset == "set_a");
  CHECK(records[8].config.train_dataset == "set_a");
  CHECK(records[9].config.train_dataset == "set_b");
  CHECK(finetune::strategy_label(records[0].config.strategy) == "None");
  CHECK(finetune::strategy_label(records[8].config.strategy) ==
        "Gradually Unfreeze the Last 12 Layers");

  // workers don't change the outcome
  const auto serial = runner::run_grid(grid, desk_resolver(), 1);
  REQUIRE(serial.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    REQUIRE(serial[i].history == records[i].history);
    REQUIRE(serial[i].reports.size() == records[i].reports.size());
    for (std::size_t j = 0; j < records[i].reports.size(); ++j)
      REQUIRE(serial[i].reports[j].mcc == records[i].reports[j].mcc);
  }
}

TEST_CASE("runs persist as append-only JSONL plus a per-run directory") {
  TempDir tmp;
  auto cfg = desk_config();
  cfg.output_dir = (tmp.path / "runs").string();

  const auto first = runner::run_experiment(cfg, desk_resolver());
  const auto second = runner::run_experiment(cfg, desk_resolver());
  REQUIRE_FALSE(first.run_dir.empty());
  CHECK(std::filesystem::exists(std::filesystem::path(first.run_dir) / "record.json"));
  CHECK(first.run_dir != second.run_dir);

  const auto loaded = runner::load_runs(tmp.path / "runs" / "runs.jsonl");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].hash == first.hash);
  CHECK(loaded[1].hash == second.hash);
  REQUIRE(loaded[0].reports.size() == first.reports.size());
  for (std::size_t i = 0; i < first.reports.size(); ++i) {
    CHECK(loaded[0].reports[i].dataset == first.reports[i].dataset);
    CHECK(loaded[0].reports[i].mcc == first.reports[i].mcc);
  }
  CHECK(loaded[0].history == first.history);
}

TEST_CASE("report tables keep the slash convention for invalid cells") {
  runner::RunRecord rec;
  rec.config = desk_config();
  rec.config.train_dataset = "set_a";
  eval::MetricsReport bad;
  bad.dataset = "set_b";
  bad.accuracy = 0.5;
  bad.mcc = 0.0;
  rec.reports.push_back(bad);
  bad.mcc = -0.1;
  rec.reports.push_back(bad);

  std::map<std::string, corpus::DatasetStats> stats{
      {"set_b", corpus::compute_stats(named_separable("set_b", 150, 2))}};
  const std::vector<runner::RunRecord> records{rec};
  const auto rows = runner::build_table(records, stats);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].placeholder);
  const auto md = eval::render_markdown(rows);
  CHECK(md.find("| set_a | None | / | / | / |") != std::string::npos);
}

TEST_CASE("table bolding agrees with the report rules") {
  const auto data = desk_resolver();
  runner::GridSpec grid;
  grid.base = desk_config();
  grid.base.test_datasets = {"set_a", "set_b"};
  grid.datasets = {"set_a", "set_b"};
  grid.strategies = {finetune::StrategyNone{}, finetune::StrategyUnfreeze{4}};
  const auto records = runner::run_grid(grid, data);

  const auto stats = runner::collect_test_stats(records, data);
  const auto rows = runner::build_table(records, stats);

  // recompute the flags straight from the rule definitions
  std::map<std::string, double> section_best;
  for (const auto& row : rows)
    if (!row.placeholder && row.mcc > 0.0) {
      auto [it, fresh] = section_best.emplace(row.section, row.mcc);
      if (!fresh) it->second = std::max(it->second, row.mcc);
    }
  for (const auto& row : rows) {
    if (row.placeholder) continue;
    CHECK(row.valid == (row.mcc > 0.0));
    CHECK(row.bold_accuracy == (row.accuracy > stats.at(row.test_dataset).portion_non_hate));
    if (row.bold_mcc) CHECK(row.mcc == section_best.at(row.section));
  }

  // a single valid record yields exactly one row
  const std::vector<runner::RunRecord> one{records[0]};
  const auto single_rows = runner::build_table(one, stats);
  std::size_t data_rows = 0;
  for (const auto& r : single_rows)
    if (!r.placeholder) ++data_rows;
  CHECK(single_rows.size() >= 1);
  CHECK(data_rows == records[0].reports.size() - [&] {
          std::size_t invalid = 0;
          for (const auto& rep : records[0].reports)
            if (rep.mcc <= 0.0) ++invalid;
          return invalid;
        }());
}
