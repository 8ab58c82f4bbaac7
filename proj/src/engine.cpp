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

#include "alnoise/engine.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "alnoise/error.hpp"

namespace aln {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd feature_matrix(const std::vector<SampleRecord>& split, std::uint32_t d) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(split.size()), d);
  for (std::size_t i = 0; i < split.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = split[i].features.cast<double>().transpose();
  }
  return x;
}

std::vector<std::uint32_t> true_labels(const std::vector<SampleRecord>& split) {
  std::vector<std::uint32_t> y;
  y.reserve(split.size());
  for (const auto& s : split) y.push_back(s.true_label);
  return y;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

RunSeeds RunSeeds::from(std::uint64_t seed) {
  RunSeeds s;
  s.data = splitmix64(seed);
  s.oracle = splitmix64(s.data);
  s.strategy = splitmix64(s.oracle);
  s.training = splitmix64(s.strategy);
  return s;
}

void RunConfig::validate(std::uint32_t num_classes) const {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
  if (k0 < num_classes) throw Error(ErrorCode::kInvalidArgument, "K0 must be at least the class count");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise rate must be in [0,1]");
  }
  if (budget != 0 && budget < k0) throw Error(ErrorCode::kInvalidArgument, "budget smaller than K0");
  if (!(hybrid_alpha >= 0.0 && hybrid_alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "hybrid alpha must be in [0,1]");
  }
  if (!(lambda.start >= 0.0 && lambda.start <= 1.0 && lambda.end >= 0.0 && lambda.end <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda schedule endpoints must be in [0,1]");
  }
  train.validate();
}

LossKind RunConfig::resolved_loss() const {
  if (loss_kind) return *loss_kind;
  return strategy == StrategyKind::kGciVital ? LossKind::kCcoreSmooth : LossKind::kCe;
}

nlohmann::ordered_json RunConfig::to_json() const {
  return {
      {"strategy", to_string(strategy)},
      {"noise_rate", noise_rate},
      {"include_true_class", include_true_class},
      {"k", k},
      {"k0", k0},
      {"budget", budget},
      {"smoothing", to_string(smoothing)},
      {"loss_kind", to_string(resolved_loss())},
      {"lambda_start", lambda.start},
      {"lambda_end", lambda.end},
      {"lambda_mode", lambda.mode == LambdaSchedule::Mode::kBudget ? "budget" : "validation"},
      {"hybrid_alpha", hybrid_alpha},
      {"noisy_validation", noisy_validation},
      {"record_timing", record_timing},
      {"seeds",
       {{"data", seeds.data}, {"oracle", seeds.oracle}, {"strategy", seeds.strategy},
        {"training", seeds.training}}},
      {"train",
       {{"optimizer", to_string(train.optimizer)},
        {"lr", train.resolved_lr()},
        {"plateau_patience", train.plateau_patience},
        {"plateau_factor", train.plateau_factor},
        {"early_stop_patience", train.early_stop_patience},
        {"max_epochs", train.max_epochs},
        {"batch_size", train.batch_size},
        {"epsilon_smooth", train.epsilon_smooth},
        {"hidden", train.hidden},
        {"warm_start", train.warm_start},
        {"restore_best", train.restore_best}}},
  };
}

RunResult run(const DatasetBundle& bundle, const RunConfig& cfg) {
  validate_bundle(bundle);
  cfg.validate(bundle.num_classes);
  const std::uint32_t C = bundle.num_classes;
  const std::size_t n = bundle.train.size();
  if (cfg.k0 > n) throw Error(ErrorCode::kInvalidArgument, "K0 larger than the train split");
  const std::size_t budget_total = cfg.budget == 0 ? n : std::min(cfg.budget, n);

  const Eigen::MatrixXd x_train = feature_matrix(bundle.train, bundle.feature_dim);
  const Eigen::MatrixXd x_test = feature_matrix(bundle.test, bundle.feature_dim);
  const Eigen::MatrixXd x_val = feature_matrix(bundle.val, bundle.feature_dim);
  const std::vector<std::uint32_t> y_test = true_labels(bundle.test);
  const std::vector<std::uint32_t> y_val_true = true_labels(bundle.val);

  std::unordered_map<SampleId, std::size_t> train_index;
  for (std::size_t i = 0; i < n; ++i) train_index.emplace(bundle.train[i].id, i);

  // Validation supervision for scheduling and early stopping.
  LabeledSet val;
  val.features = x_val;
  {
    NoisyOracle val_oracle(cfg.noise_rate, C, splitmix64(cfg.seeds.oracle ^ 0x76616cULL),
                           cfg.include_true_class);
    for (const auto& s : bundle.val) {
      const std::uint32_t y = cfg.noisy_validation ? val_oracle.label(s) : s.true_label;
      val.targets.push_back({one_hot(y, C), y, std::nullopt});
    }
  }

  NoisyOracle oracle(cfg.noise_rate, C, cfg.seeds.oracle, cfg.include_true_class);
  RunResult result;
  std::vector<bool> is_labeled(n, false);

  // Clean seed: true labels, no oracle involvement.
  const auto seed_ids = draw_clean_seed(bundle, cfg.k0, cfg.seeds.data);
  for (SampleId id : seed_ids) {
    const std::size_t i = train_index.at(id);
    is_labeled[i] = true;
    result.labeled_ids.push_back(id);
    const std::uint32_t y = bundle.train[i].true_label;
    result.targets.push_back({one_hot(y, C), y, std::nullopt});
  }

  std::optional<CentroidBank> bank;
  if (cfg.strategy == StrategyKind::kGciVital) {
    std::vector<const SampleRecord*> clean;
    std::vector<std::uint32_t> labels;
    for (SampleId id : seed_ids) {
      clean.push_back(&bundle.train[train_index.at(id)]);
      labels.push_back(clean.back()->true_label);
    }
    bank = build_centroids(clean, labels, C);
  }

  TrainConfig tcfg = cfg.train;
  tcfg.loss_kind = cfg.resolved_loss();
  tcfg.hidden = cfg.train.hidden;

  ModelHead head(C, bundle.feature_dim, tcfg.hidden);
  std::optional<ModelHead> previous;

  auto train_round = [&](int round) {
    LabeledSet labeled;
    labeled.features.resize(static_cast<Eigen::Index>(result.labeled_ids.size()), bundle.feature_dim);
    for (std::size_t j = 0; j < result.labeled_ids.size(); ++j) {
      labeled.features.row(static_cast<Eigen::Index>(j)) =
          x_train.row(static_cast<Eigen::Index>(train_index.at(result.labeled_ids[j])));
    }
    labeled.targets = result.targets;
    TrainConfig rcfg = tcfg;
    rcfg.seed = splitmix64(cfg.seeds.training + static_cast<std::uint64_t>(round));
    // A warm start still needs an initial head in the first round.
    if (round == 0) rcfg.warm_start = false;
    return train_head(head, labeled, val, rcfg);
  };

  auto record = [&](int round, double seconds, int epochs, std::size_t smoothed) {
    RoundMetrics m;
    m.round = round;
    m.budget = result.labeled_ids.size();
    m.test_top1 = evaluate_top1(head, x_test, y_test);
    m.val_top1 = evaluate_top1(head, x_val, y_val_true);
    m.select_seconds = cfg.record_timing ? seconds : 0.0;
    m.train_epochs = epochs;
    m.n_smoothed = smoothed;
    result.rounds.push_back(m);
  };

  result.last_train = train_round(0);
  record(0, 0.0, result.last_train.epochs, 0);

  for (int round = 1; result.labeled_ids.size() < budget_total; ++round) {
    QueryContext ctx;
    ctx.head = &head;
    ctx.previous_head = previous ? &*previous : nullptr;
    ctx.centroids = bank ? &*bank : nullptr;
    ctx.round = round;
    ctx.budget_used = result.labeled_ids.size();
    ctx.budget_total = budget_total;
    ctx.lambda = cfg.lambda;
    ctx.lambda.val_top1 = result.rounds.back().val_top1;
    ctx.hybrid_alpha = cfg.hybrid_alpha;
    ctx.seed = cfg.seeds.strategy;
    for (std::size_t i = 0; i < n; ++i) {
      (is_labeled[i] ? ctx.labeled : ctx.unlabeled).push_back(&bundle.train[i]);
    }
    if (ctx.unlabeled.empty()) break;
    if (ctx.labeled.size() + ctx.unlabeled.size() != n) {
      throw Error(ErrorCode::kState, "labeled and unlabeled sets do not partition the train split");
    }

    const std::size_t k = std::min(cfg.k, budget_total - result.labeled_ids.size());
    SelectionResult sel;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      sel = select(cfg.strategy, ctx, k);
    } catch (const Error& e) {
      throw Error(e.code(), "round " + std::to_string(round) + ": " + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<std::uint32_t> issued;
    issued.reserve(sel.chosen.size());
    for (SampleId id : sel.chosen) issued.push_back(oracle.label(bundle.train[train_index.at(id)]));
    attach_smoothing_decisions(sel, issued, cfg.smoothing, cfg.train.epsilon_smooth);

    std::size_t smoothed = 0;
    for (std::size_t j = 0; j < sel.chosen.size(); ++j) {
      const std::size_t i = train_index.at(sel.chosen[j]);
      if (is_labeled[i]) throw Error(ErrorCode::kState, "sample selected twice");
      is_labeled[i] = true;
      const auto& dec = sel.decisions[j];
      TrainTarget t{apply_decision(dec, issued[j], C), issued[j], std::nullopt};
      if (dec.kind == SmoothingDecision::Kind::kSmooth) t.ccore_class = dec.ccore_class;
      if (dec.kind != SmoothingDecision::Kind::kNone) ++smoothed;
      result.labeled_ids.push_back(sel.chosen[j]);
      result.targets.push_back(std::move(t));
    }

    previous = head;
    try {
      result.last_train = train_round(round);
    } catch (const Error& e) {
      throw Error(e.code(), "round " + std::to_string(round) + ": " + e.what());
    }
    record(round, seconds, result.last_train.epochs, smoothed);
  }

  result.flip_log = oracle.flip_log();
  return result;
}

void write_metrics_csv(const std::vector<RoundMetrics>& rounds, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& m : rounds) {
    out << m.round << ',' << m.budget << ',' << fmt_double(m.test_top1) << ','
        << fmt_double(m.val_top1) << ',' << fmt_double(m.select_seconds) << ',' << m.train_epochs
        << ',' << m.n_smoothed << '\n';
  }
}

void write_metrics_csv(const std::vector<RoundMetrics>& rounds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_metrics_csv(rounds, out);
}

std::string format_rate(double rate) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), rate);
  return std::string(buf, res.ptr);
}

std::string cell_stem(StrategyKind strategy, double rate) {
  return std::string(to_string(strategy)) + "_r" + format_rate(rate);
}

std::vector<const SweepCell*> SweepResult::failed() const {
  std::vector<const SweepCell*> out;
  for (const auto& c : cells)
    if (!c.result) out.push_back(&c);
  return out;
}

nlohmann::ordered_json SweepResult::aggregate_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& c : cells) {
    if (!c.result || c.result->rounds.empty()) continue;
    j[to_string(c.strategy)][format_rate(c.noise_rate)] = c.result->rounds.back().test_top1;
  }
  return j;
}

void SweepResult::write_aggregate_csv(std::ostream& out) const {
  out << "strategy,rate," << kMetricsHeader << '\n';
  for (const auto& c : cells) {
    if (!c.result) continue;
    for (const auto& m : c.result->rounds) {
      out << to_string(c.strategy) << ',' << format_rate(c.noise_rate) << ',' << m.round << ','
          << m.budget << ',' << fmt_double(m.test_top1) << ',' << fmt_double(m.val_top1) << ','
          << fmt_double(m.select_seconds) << ',' << m.train_epochs << ',' << m.n_smoothed << '\n';
    }
  }
}

SweepResult sweep(const DatasetBundle& bundle, const std::vector<StrategyKind>& strategies,
                  const std::vector<double>& noise_rates, const RunConfig& base, unsigned threads,
                  const CellRunner& runner) {
  SweepResult out;
  for (auto s : strategies)
    for (double r : noise_rates) out.cells.push_back({s, r, std::nullopt, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < out.cells.size(); i = next++) {
      auto& cell = out.cells[i];
      RunConfig cfg = base;
      cfg.strategy = cell.strategy;
      cfg.noise_rate = cell.noise_rate;
      try {
        cell.result = runner(bundle, cfg);
      } catch (const std::exception& e) {
        cell.error = e.what();
        if (cell.error.empty()) cell.error = "unknown failure";
      }
    }
  };
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(out.cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "cells");
  for (const auto& c : result.cells) {
    if (c.result) write_metrics_csv(c.result->rounds, dir / "cells" / (cell_stem(c.strategy, c.noise_rate) + ".csv"));
  }
  {
    std::ofstream out(dir / "aggregate.csv", std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write aggregate.csv");
    result.write_aggregate_csv(out);
  }
  std::ofstream js(dir / "aggregate.json", std::ios::trunc);
  if (!js) throw Error(ErrorCode::kIo, "cannot write aggregate.json");
  js << result.aggregate_json().dump(2) << '\n';
}

}  // namespace aln
