// Copyright (c) 2026 The alnoise Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "alnoise/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "alnoise/dataset.hpp"
#include "alnoise/engine.hpp"
#include "alnoise/error.hpp"

namespace aln::cli {

namespace fs = std::filesystem;

namespace {

/// Flag values that parse but are inconsistent with each other or the data.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct SynthOptions {
  SyntheticConfig cfg;
  std::string out;
};

/// Flags shared by run and sweep.
struct RunOptions {
  std::string dataset;
  std::string out;
  std::string strategy = "random";
  double noise_rate = 0.0;
  std::size_t k = 256;
  std::size_t k0 = 1024;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> data_seed, oracle_seed, strategy_seed, train_seed;
  std::string smoothing = "smooth";
  std::string loss = "auto";
  double epsilon = 0.1;
  std::string optimizer = "adam";
  double lr = 0.0;
  int max_epochs = 100;
  int batch_size = 64;
  int plateau_patience = 10;
  double plateau_factor = 0.9;
  int early_stop_patience = 5;
  std::uint32_t hidden = 0;
  bool warm_start = false;
  double lambda_start = 0.25;
  double lambda_end = 0.75;
  std::string lambda_mode = "budget";
  double alpha = 0.5;
  bool include_true_class = false;
  bool clean_validation = false;
  std::string timing = "off";
  // sweep only
  std::vector<std::string> strategies;
  std::vector<double> rates;
};

struct ReportOptions {
  std::string input;
  std::string out;
};

void add_run_flags(CLI::App* app, RunOptions& o, bool sweep) {
  app->add_option("--dataset", o.dataset, "dataset container (.alnb)")->required()->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "output directory")->capture_default_str();
  if (sweep) {
    app->add_option("--strategies", o.strategies, "comma-separated strategies (default: all)")
        ->delimiter(',')
        ->check(CLI::IsMember(strategy_names()));
    app->add_option("--rates", o.rates, "comma-separated noise rates (default: 0,0.2,0.4,0.6)")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1.0));
  } else {
    app->add_option("--strategy", o.strategy, "query strategy")
        ->capture_default_str()
        ->check(CLI::IsMember(strategy_names()));
    app->add_option("--noise-rate", o.noise_rate, "symmetric label noise rate")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
  }
  app->add_option("--k", o.k, "samples labeled per cycle")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--k0", o.k0, "clean seed size")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--budget", o.budget, "total labeled samples incl. seed (0 = whole train split)")
      ->capture_default_str();
  app->add_option("--seed", o.seed, "master seed for all four streams")->capture_default_str();
  app->add_option("--data-seed", o.data_seed, "override the clean-seed draw stream");
  app->add_option("--oracle-seed", o.oracle_seed, "override the label-noise stream");
  app->add_option("--strategy-seed", o.strategy_seed, "override the selection stream");
  app->add_option("--train-seed", o.train_seed, "override the training stream");
  app->add_option("--smoothing", o.smoothing, "gci-vital label handling")
      ->capture_default_str()
      ->check(CLI::IsMember({"smooth", "hard", "off"}));
  app->add_option("--loss", o.loss, "training loss (auto picks per strategy)")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "ce", "uniform_smooth", "ccore_smooth"}));
  app->add_option("--epsilon", o.epsilon, "smoothing epsilon")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app->add_option("--optimizer", o.optimizer)->capture_default_str()->check(CLI::IsMember({"adam", "sgd-momentum"}));
  app->add_option("--lr", o.lr, "learning rate (0 = optimizer default)")->capture_default_str()->check(CLI::NonNegativeNumber);
  app->add_option("--max-epochs", o.max_epochs)->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--batch-size", o.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--plateau-patience", o.plateau_patience)->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--plateau-factor", o.plateau_factor)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app->add_option("--early-stop-patience", o.early_stop_patience)->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--hidden", o.hidden, "hidden width (0 = linear head)")->capture_default_str();
  app->add_flag("--warm-start", o.warm_start, "continue from the previous round's head");
  app->add_option("--lambda-start", o.lambda_start)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app->add_option("--lambda-end", o.lambda_end)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app->add_option("--lambda-mode", o.lambda_mode)->capture_default_str()->check(CLI::IsMember({"budget", "validation"}));
  app->add_option("--alpha", o.alpha, "hybrid uncertainty weight")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app->add_flag("--include-true-class", o.include_true_class, "noise may redraw the true class");
  app->add_flag("--clean-validation", o.clean_validation, "validation labels are not corrupted");
  app->add_option("--timing", o.timing, "select_seconds column: zeroed (default, byte-stable) or wall clock")
      ->capture_default_str()
      ->check(CLI::IsMember({"wall", "off"}));
}

RunConfig to_run_config(const RunOptions& o) {
  RunConfig c;
  c.strategy = parse_strategy(o.strategy);
  c.noise_rate = o.noise_rate;
  c.include_true_class = o.include_true_class;
  c.k = o.k;
  c.k0 = o.k0;
  c.budget = o.budget;
  c.seeds = RunSeeds::from(o.seed);
  if (o.data_seed) c.seeds.data = *o.data_seed;
  if (o.oracle_seed) c.seeds.oracle = *o.oracle_seed;
  if (o.strategy_seed) c.seeds.strategy = *o.strategy_seed;
  if (o.train_seed) c.seeds.training = *o.train_seed;
  c.smoothing = parse_smoothing_mode(o.smoothing);
  if (o.loss != "auto") c.loss_kind = parse_loss_kind(o.loss);
  c.train.epsilon_smooth = o.epsilon;
  c.train.optimizer = parse_optimizer_kind(o.optimizer);
  c.train.lr = o.lr;
  c.train.max_epochs = o.max_epochs;
  c.train.batch_size = o.batch_size;
  c.train.plateau_patience = o.plateau_patience;
  c.train.plateau_factor = o.plateau_factor;
  c.train.early_stop_patience = o.early_stop_patience;
  c.train.hidden = o.hidden;
  c.train.warm_start = o.warm_start;
  c.lambda.start = o.lambda_start;
  c.lambda.end = o.lambda_end;
  c.lambda.mode = o.lambda_mode == "budget" ? LambdaSchedule::Mode::kBudget
                                            : LambdaSchedule::Mode::kValidation;
  c.hybrid_alpha = o.alpha;
  c.noisy_validation = !o.clean_validation;
  c.record_timing = o.timing == "wall";
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << text;
}

unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ALN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    } catch (const std::exception&) {
      // Ignore unparsable values and keep the hardware default.
    }
  }
  return n;
}

std::string describe(const DatasetBundle& b) {
  std::ostringstream s;
  s << "classes=" << b.num_classes << " heads=" << b.heads << " embed_dim=" << b.embed_dim
    << " feature_dim=" << b.feature_dim << " train=" << b.train.size() << " val=" << b.val.size()
    << " test=" << b.test.size() << '\n';
  auto counts = [&](const std::vector<SampleRecord>& split, const char* name) {
    std::vector<std::size_t> c(b.num_classes, 0);
    std::size_t with_dist = 0;
    for (const auto& r : split) {
      ++c[r.true_label];
      if (r.label_dist) ++with_dist;
    }
    s << name << " per-class:";
    for (auto v : c) s << ' ' << v;
    s << " labeled=" << with_dist << '\n';
  };
  counts(b.train, "train");
  counts(b.val, "val");
  counts(b.test, "test");
  return s.str();
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const DatasetBundle b = as_usage([&] { return make_synthetic(o.cfg); });
  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_bundle(b, path);
  out << "wrote " << path.string() << '\n' << describe(b);
  out << "manifest " << manifest_path(path).string() << '\n';
  return kExitOk;
}

int cmd_run(const RunOptions& o, std::ostream& out) {
  const RunConfig cfg = to_run_config(o);
  const DatasetBundle b = load_bundle(o.dataset);
  as_usage([&] {
    cfg.validate(b.num_classes);
    if (cfg.k0 > b.train.size()) throw Error(ErrorCode::kInvalidArgument, "--k0 exceeds the train split");
    return 0;
  });
  const fs::path dir(o.out);
  fs::create_directories(dir);
  nlohmann::ordered_json echo = cfg.to_json();
  echo["dataset"] = o.dataset;
  echo["seed"] = o.seed;
  write_text(dir / "config.json", echo.dump(2) + "\n");
  out << echo.dump(2) << '\n';

  const RunResult r = run(b, cfg);
  write_metrics_csv(r.rounds, dir / "metrics.csv");
  {
    std::ofstream flips(dir / "flips.csv", std::ios::trunc);
    if (!flips) throw Error(ErrorCode::kIo, "cannot write flips.csv");
    flips << "id,clean,issued\n";
    for (const auto& f : r.flip_log) flips << f.id << ',' << f.clean << ',' << f.issued << '\n';
  }
  write_text(dir / "train_report.json", r.last_train.to_json() + "\n");
  const auto& last = r.rounds.back();
  out << "rounds=" << r.rounds.size() << " budget=" << last.budget
      << " final_test_top1=" << last.test_top1 << '\n';
  return kExitOk;
}

int cmd_sweep(RunOptions o, std::ostream& out, std::ostream& err) {
  if (o.strategies.empty()) o.strategies = strategy_names();
  if (o.rates.empty()) o.rates = {0.0, 0.2, 0.4, 0.6};
  const RunConfig base = to_run_config(o);
  std::vector<StrategyKind> kinds;
  for (const auto& s : o.strategies) kinds.push_back(parse_strategy(s));

  const DatasetBundle b = load_bundle(o.dataset);
  as_usage([&] {
    base.validate(b.num_classes);
    return 0;
  });
  const fs::path dir(o.out);
  fs::create_directories(dir);
  nlohmann::ordered_json echo = base.to_json();
  echo.erase("strategy");
  echo.erase("noise_rate");
  echo.erase("loss_kind");
  echo["loss_kind"] = o.loss;
  echo["strategies"] = o.strategies;
  echo["rates"] = o.rates;
  echo["dataset"] = o.dataset;
  echo["seed"] = o.seed;
  write_text(dir / "config.json", echo.dump(2) + "\n");
  out << echo.dump(2) << '\n';

  const SweepResult res = sweep(b, kinds, o.rates, base, sweep_threads());
  write_sweep_outputs(res, dir);
  const auto failed = res.failed();
  out << "cells=" << res.cells.size() << " failed=" << failed.size() << '\n';
  if (!failed.empty()) {
    std::ostringstream list;
    for (const auto* c : failed) {
      list << cell_stem(c->strategy, c->noise_rate) << ": " << c->error << '\n';
    }
    write_text(dir / "failed.txt", list.str());
    err << "failed cells:\n" << list.str();
    return kExitFailure;
  }
  return kExitOk;
}

/// Long-format accuracy-vs-budget series from a sweep's aggregate.csv.
int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  fs::path in(o.input);
  if (fs::is_directory(in)) in /= "aggregate.csv";
  std::ifstream f(in);
  if (!f) {
    err << "cannot open " << in.string() << '\n';
    return kExitFailure;
  }
  std::string header;
  std::getline(f, header);
  const std::string expected = std::string("strategy,rate,") + kMetricsHeader;
  if (header != expected) {
    err << "unexpected header in " << in.string() << '\n';
    return kExitFailure;
  }
  std::ostringstream table;
  table << "strategy,rate,budget,top1\n";
  std::size_t rows = 0;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    if (cols.size() != 9) {
      err << "malformed row: " << line << '\n';
      return kExitFailure;
    }
    table << cols[0] << ',' << cols[1] << ',' << cols[3] << ',' << cols[4] << '\n';
    ++rows;
  }
  if (rows == 0) {
    err << "no rows in " << in.string() << '\n';
    return kExitFailure;
  }
  if (o.out.empty()) {
    out << table.str();
  } else {
    const fs::path path(o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text(path, table.str());
    nlohmann::ordered_json echo = {{"input", in.string()}, {"out", o.out}};
    write_text(fs::path(path).replace_extension(".config.json"), echo.dump(2) + "\n");
    out << "wrote " << rows << " rows to " << path.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active learning under symmetric label noise", "alnoise"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset container");
  synth_cmd->add_option("--classes", synth.cfg.num_classes)->capture_default_str()->check(CLI::Range(2u, 1000000u));
  synth_cmd->add_option("--train", synth.cfg.n_train)->capture_default_str();
  synth_cmd->add_option("--val", synth.cfg.n_val)->capture_default_str();
  synth_cmd->add_option("--test", synth.cfg.n_test)->capture_default_str();
  synth_cmd->add_option("--heads", synth.cfg.heads)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--embed-dim", synth.cfg.embed_dim)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--feature-dim", synth.cfg.feature_dim)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sep", synth.cfg.cluster_sep, "class-mean separation")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--attention-noise", synth.cfg.attention_noise)->capture_default_str()->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", synth.cfg.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output container path")->required();

  RunOptions run_opts;
  run_opts.out = "alnoise_run";
  auto* run_cmd = app.add_subcommand("run", "run one active-learning experiment");
  add_run_flags(run_cmd, run_opts, false);

  RunOptions sweep_opts;
  sweep_opts.out = "alnoise_sweep";
  auto* sweep_cmd = app.add_subcommand("sweep", "run a strategy x noise-rate grid");
  add_run_flags(sweep_cmd, sweep_opts, true);

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "emit a plot-ready accuracy-vs-budget table");
  report_cmd->add_option("--input", report.input, "sweep directory or aggregate.csv")->required();
  report_cmd->add_option("--out", report.out, "output CSV (default: stdout)");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "validate and summarize a dataset container");
  inspect_cmd->add_option("--dataset", inspect_path)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
    if (run_cmd->parsed()) return cmd_run(run_opts, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, out, err);
    if (report_cmd->parsed()) return cmd_report(report, out, err);
    if (inspect_cmd->parsed()) {
      const DatasetBundle b = load_bundle(inspect_path);
      out << describe(b);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace aln::cli
