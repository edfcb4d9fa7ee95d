#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hateharness/hateharness.hpp"

using namespace hateharness;
namespace fs = std::filesystem;

namespace {

std::string default_data_dir() {
  if (const char* env = std::getenv("HATE_HARNESS_DATA_DIR")) return env;
  return "data";
}

corpus::DatasetBundle load_any(const std::string& name_or_path, const std::string& data_dir) {
  const fs::path p(name_or_path);
  if (fs::exists(p) && fs::is_regular_file(p))
    return corpus::load_dataset(p, corpus::format_from_path(p));
  return runner::DatasetResolver(data_dir).resolve(name_or_path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void print_stats(const std::string& name, const corpus::DatasetStats& s, bool as_json) {
  if (as_json) {
    nlohmann::json j{{"dataset", name},
                     {"n_hate", s.n_hate},
                     {"n_non_hate", s.n_non_hate},
                     {"n_total", s.n_total},
                     {"portion_hate", s.portion_hate},
                     {"portion_non_hate", s.portion_non_hate}};
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::printf("%s: %zu tweets, %zu hate / %zu non-hate (%.2f/%.2f)\n", name.c_str(), s.n_total,
              s.n_hate, s.n_non_hate, s.portion_hate, s.portion_non_hate);
}

void print_run_summary(const runner::RunRecord& rec) {
  std::printf("run %s: %zu epoch(s)\n", rec.hash.c_str(), rec.history.epochs.size());
  for (std::size_t e = 0; e < rec.history.epochs.size(); ++e) {
    const auto& s = rec.history.epochs[e];
    std::printf("  epoch %zu: train_loss=%.4f val_loss=%.4f val_acc=%.4f val_mcc=%.4f\n", e + 1,
                s.train_loss, s.val_loss, s.val_accuracy, s.val_mcc);
  }
  for (const auto& r : rec.reports)
    std::printf("  test %s: accuracy=%s mcc=%s%s\n", r.dataset.c_str(),
                eval::format_score(r.accuracy).c_str(), eval::format_score(r.mcc).c_str(),
                r.valid ? "" : " (not valid)");
  if (!rec.run_dir.empty()) std::printf("  artifacts: %s\n", rec.run_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workbench for fine-tuning and evaluating tweet hate-speech classifiers"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string data_dir = default_data_dir();
  app.add_option("--data-dir", data_dir, "Dataset root (or HATE_HARNESS_DATA_DIR)");

  // fixtures
  auto* cmd_fixtures = app.add_subcommand("fixtures", "Write the bundled synthetic datasets");
  std::string fixtures_out = "data";
  std::string fixtures_format = "csv";
  cmd_fixtures->add_option("--out", fixtures_out, "Output directory")->capture_default_str();
  cmd_fixtures->add_option("--format", fixtures_format, "csv or jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  // lexicon
  auto* cmd_lexicon = app.add_subcommand("lexicon", "Export the keyword lexicon as TSV");
  std::string lexicon_out;
  cmd_lexicon->add_option("--out", lexicon_out, "Output file (default: stdout)");

  // stats
  auto* cmd_stats = app.add_subcommand("stats", "Label counts and portions of a dataset");
  std::string stats_target;
  bool stats_json = false;
  cmd_stats->add_option("dataset", stats_target, "Dataset name or file path")->required();
  cmd_stats->add_flag("--json", stats_json, "Emit JSON");

  // clean
  auto* cmd_clean = app.add_subcommand("clean", "Strip mentions, hashtags, URLs and emoji");
  std::string clean_in, clean_out;
  bool keep_mentions = false, keep_hashtags = false, keep_urls = false, keep_emojis = false;
  cmd_clean->add_option("--in", clean_in, "Input dataset file")->required();
  cmd_clean->add_option("--out", clean_out, "Output dataset file")->required();
  cmd_clean->add_flag("--keep-mentions", keep_mentions, "Keep @mentions");
  cmd_clean->add_flag("--keep-hashtags", keep_hashtags, "Keep #hashtags");
  cmd_clean->add_flag("--keep-urls", keep_urls, "Keep URLs");
  cmd_clean->add_flag("--keep-emojis", keep_emojis, "Keep emoji");

  // split
  auto* cmd_split = app.add_subcommand("split", "Deterministic train/validate/test split");
  std::string split_in, split_out_dir = ".";
  std::uint64_t split_seed = 0;
  std::vector<double> split_ratios{0.81, 0.09, 0.10};
  cmd_split->add_option("--in", split_in, "Input dataset file")->required();
  cmd_split->add_option("--out-dir", split_out_dir, "Output directory")->capture_default_str();
  cmd_split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  cmd_split->add_option("--ratios", split_ratios, "train,validate,test ratios")
      ->delimiter(',')
      ->expected(3);

  // trim
  auto* cmd_trim = app.add_subcommand("trim", "Remove perturbed or flagged records");
  std::string trim_in, trim_out, trim_report;
  std::vector<std::string> trim_rules{"relevance_flag_false", "username_only_match"};
  cmd_trim->add_option("--in", trim_in, "Input dataset file")->required();
  cmd_trim->add_option("--out", trim_out, "Output dataset file")->required();
  cmd_trim->add_option("--report", trim_report, "Removal report CSV (id,rule)");
  cmd_trim->add_option("--rules", trim_rules, "Rules to apply, in order")
      ->delimiter(',')
      ->capture_default_str();

  // augment
  auto* cmd_augment = app.add_subcommand("augment", "Duplicate hate records");
  std::string augment_in, augment_out;
  int augment_factor = 2;
  cmd_augment->add_option("--in", augment_in, "Input dataset file")->required();
  cmd_augment->add_option("--out", augment_out, "Output dataset file")->required();
  cmd_augment->add_option("--factor", augment_factor, "Copies per hate record (>= 2)")
      ->capture_default_str();

  // train
  auto* cmd_train = app.add_subcommand("train", "Run one experiment from a config file");
  std::string train_config;
  cmd_train->add_option("--config", train_config, "Experiment config (JSON)")->required();

  // eval
  auto* cmd_eval = app.add_subcommand("eval", "Score a predictions file against labels");
  std::string eval_pred, eval_data, eval_name, eval_json_out, eval_md_out;
  cmd_eval->add_option("--pred", eval_pred, "Predictions CSV (id,label)")->required();
  cmd_eval->add_option("--data", eval_data, "Labeled dataset file or name")->required();
  cmd_eval->add_option("--name", eval_name, "Dataset name for the report");
  cmd_eval->add_option("--json", eval_json_out, "Write metrics JSON here (default: stdout)");
  cmd_eval->add_option("--md", eval_md_out, "Write a markdown table here");

  // grid
  auto* cmd_grid = app.add_subcommand("grid", "Run a config grid");
  std::string grid_config;
  int grid_workers = 1;
  std::vector<std::uint64_t> grid_seeds;
  cmd_grid->add_option("--config", grid_config, "Grid config (JSON)")->required();
  cmd_grid->add_option("--workers", grid_workers, "Parallel cells")->capture_default_str();
  cmd_grid->add_option("--seeds", grid_seeds, "Seeds per cell (default: one run per cell)")
      ->delimiter(',');

  // report
  auto* cmd_report = app.add_subcommand("report", "Render result tables from runs.jsonl");
  std::string report_runs, report_md, report_csv;
  cmd_report->add_option("--runs", report_runs, "Path to runs.jsonl")->required();
  cmd_report->add_option("--md", report_md, "Write markdown here (default: stdout)");
  cmd_report->add_option("--csv", report_csv, "Write CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_fixtures) {
      const auto format =
          fixtures_format == "jsonl" ? corpus::FileFormat::Jsonl : corpus::FileFormat::Csv;
      fixtures::write_all(fixtures_out, format);
      std::printf("wrote fixtures to %s\n", fixtures_out.c_str());
    } else if (*cmd_lexicon) {
      const auto tsv = corpus::lexicon_tsv(corpus::build_lexicon());
      if (lexicon_out.empty())
        std::cout << tsv;
      else
        write_text(lexicon_out, tsv);
    } else if (*cmd_stats) {
      const auto bundle = load_any(stats_target, data_dir);
      print_stats(bundle.name, corpus::compute_stats(bundle), stats_json);
    } else if (*cmd_clean) {
      const fs::path in(clean_in), out(clean_out);
      auto bundle = corpus::load_dataset(in, corpus::format_from_path(in));
      preprocess::CleanConfig cfg{!keep_mentions, !keep_hashtags, !keep_urls, !keep_emojis};
      corpus::save_dataset(preprocess::clean_bundle(bundle, cfg), out,
                           corpus::format_from_path(out));
      std::printf("cleaned %zu records -> %s\n", bundle.records.size(), clean_out.c_str());
    } else if (*cmd_split) {
      const fs::path in(split_in);
      const auto bundle = corpus::load_dataset(in, corpus::format_from_path(in));
      preprocess::SplitConfig cfg{split_ratios[0], split_ratios[1], split_ratios[2], split_seed};
      const auto split = preprocess::split_dataset(bundle, cfg);
      const auto stem = in.stem().string();
      const auto ext = in.extension().string().empty() ? ".csv" : in.extension().string();
      for (const auto& [part, suffix] :
           {std::pair{&split.train, "_train"}, {&split.validate, "_validate"},
            {&split.test, "_test"}}) {
        const auto path = fs::path(split_out_dir) / (stem + suffix + ext);
        corpus::save_dataset(*part, path, corpus::format_from_path(path));
        std::printf("%s: %zu records\n", path.string().c_str(), part->records.size());
      }
    } else if (*cmd_trim) {
      const fs::path in(trim_in), out(trim_out);
      const auto bundle = corpus::load_dataset(in, corpus::format_from_path(in));
      std::vector<deploy::TrimRule> rules;
      for (const auto& name : trim_rules) rules.push_back(deploy::trim_rule_from_name(name));
      const auto result = deploy::trim(bundle, rules, corpus::build_lexicon());
      corpus::save_dataset(result.bundle, out, corpus::format_from_path(out));
      if (!trim_report.empty()) {
        std::string csv = "id,rule\n";
        for (const auto& e : result.removed) csv += e.id + "," + e.rule + "\n";
        write_text(trim_report, csv);
      }
      std::printf("kept %zu, removed %zu -> %s\n", result.bundle.records.size(),
                  result.removed.size(), trim_out.c_str());
    } else if (*cmd_augment) {
      const fs::path in(augment_in), out(augment_out);
      const auto bundle = corpus::load_dataset(in, corpus::format_from_path(in));
      const auto augmented = deploy::augment_duplicate_hate(bundle, augment_factor);
      corpus::save_dataset(augmented, out, corpus::format_from_path(out));
      std::printf("%zu -> %zu records -> %s\n", bundle.records.size(), augmented.records.size(),
                  augment_out.c_str());
    } else if (*cmd_train) {
      const auto cfg = runner::config_from_json(read_json_file(train_config));
      const auto rec = runner::run_experiment(cfg, runner::DatasetResolver(data_dir));
      print_run_summary(rec);
    } else if (*cmd_eval) {
      const auto bundle = load_any(eval_data, data_dir);
      std::map<std::string, corpus::Label> truth;
      for (const auto& r : bundle.records) {
        if (!r.label) throw std::runtime_error("unlabeled record '" + r.id + "'");
        truth[r.id] = *r.label;
      }
      std::ifstream pred_in(eval_pred);
      if (!pred_in) throw std::runtime_error("cannot open predictions: " + eval_pred);
      const auto rows = detail::read_csv(pred_in);
      if (rows.empty() || rows[0] != std::vector<std::string>{"id", "label"})
        throw std::runtime_error("predictions file needs an 'id,label' header");
      std::vector<corpus::Label> y_true, y_pred;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2)
          throw std::runtime_error("predictions row " + std::to_string(i + 1) + ": need id,label");
        const auto it = truth.find(rows[i][0]);
        if (it == truth.end())
          throw std::runtime_error("prediction for unknown id '" + rows[i][0] + "'");
        y_true.push_back(it->second);
        y_pred.push_back(corpus::label_from_string(rows[i][1]));
      }
      const auto cm = eval::confusion(y_true, y_pred);
      const auto name = eval_name.empty() ? bundle.name : eval_name;
      const auto report = eval::make_report(name, cm);
      nlohmann::json j{{"dataset", report.dataset},
                       {"accuracy", report.accuracy},
                       {"mcc", report.mcc},
                       {"valid", report.valid},
                       {"confusion",
                        {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}}}};
      if (eval_json_out.empty())
        std::cout << j.dump(2) << "\n";
      else
        write_text(eval_json_out, j.dump(2) + "\n");
      if (!eval_md_out.empty()) {
        eval::TableRow row;
        row.section = row.train_label = "(external)";
        row.technique = "-";
        row.test_dataset = name;
        row.accuracy = report.accuracy;
        row.mcc = report.mcc;
        row.valid = report.valid;
        write_text(eval_md_out, eval::render_markdown(std::vector<eval::TableRow>{row}));
      }
    } else if (*cmd_grid) {
      const auto j = read_json_file(grid_config);
      runner::GridSpec grid;
      if (j.contains("base")) grid.base = runner::config_from_json(j["base"]);
      if (!j.contains("datasets")) throw std::runtime_error("grid config: missing 'datasets'");
      grid.datasets = j["datasets"].get<std::vector<std::string>>();
      if (!j.contains("strategies")) throw std::runtime_error("grid config: missing 'strategies'");
      for (const auto& s : j["strategies"]) grid.strategies.push_back(runner::strategy_from_json(s));
      if (j.contains("clean")) grid.clean = j["clean"].get<std::vector<bool>>();
      if (j.contains("seeds")) grid.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
      if (!grid_seeds.empty()) grid.seeds = grid_seeds;
      if (j.contains("workers")) grid_workers = j["workers"].get<int>();

      const auto records = runner::run_grid(grid, runner::DatasetResolver(data_dir), grid_workers);
      std::size_t failed = 0;
      for (const auto& rec : records)
        if (!rec.error.empty()) {
          ++failed;
          std::fprintf(stderr, "cell %s (%s): %s\n", rec.config.train_dataset.c_str(),
                       finetune::strategy_label(rec.config.strategy).c_str(), rec.error.c_str());
        }
      std::printf("grid complete: %zu cell(s), %zu failed\n", records.size(), failed);
      if (!grid.base.output_dir.empty())
        std::printf("results: %s\n",
                    (fs::path(grid.base.output_dir) / "runs.jsonl").string().c_str());
    } else if (*cmd_report) {
      const auto records = runner::load_runs(report_runs);
      if (records.empty()) throw std::runtime_error("no runs in " + report_runs);
      const runner::DatasetResolver data(data_dir);
      const auto stats = runner::collect_test_stats(records, data);
      const auto rows = runner::build_table(records, stats);
      const auto md = eval::render_markdown(rows);
      if (report_md.empty())
        std::cout << md;
      else
        write_text(report_md, md);
      if (!report_csv.empty()) write_text(report_csv, eval::render_csv(rows));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
