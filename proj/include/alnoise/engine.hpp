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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "alnoise/dataset.hpp"
#include "alnoise/model.hpp"
#include "alnoise/oracle.hpp"
#include "alnoise/strategies.hpp"

namespace aln {

/// Independent seed streams so an ablation can change one factor at a time.
struct RunSeeds {
  std::uint64_t data = 0;      // clean-seed draw
  std::uint64_t oracle = 1;    // label noise
  std::uint64_t strategy = 2;  // random tie-free choices (random, model-delta cold start)
  std::uint64_t training = 3;  // init and shuffle order

  /// All four streams derived from one user seed.
  static RunSeeds from(std::uint64_t seed);
};

struct RunConfig {
  StrategyKind strategy = StrategyKind::kRandom;
  double noise_rate = 0.0;
  bool include_true_class = false;
  std::size_t k = 256;
  std::size_t k0 = 1024;
  /// Total samples labeled, clean seed included; 0 means the whole train split.
  std::size_t budget = 0;
  TrainConfig train;
  /// Unset: cross-entropy for the baselines, C-Core smoothed loss for gci-vital.
  std::optional<LossKind> loss_kind;
  RunSeeds seeds;
  SmoothingMode smoothing = SmoothingMode::kSmooth;
  LambdaSchedule lambda;
  double hybrid_alpha = 0.5;
  /// Validation labels come from an independent noisy oracle at the same rate.
  bool noisy_validation = true;
  /// Off by default so metrics are byte-stable; when on, select_seconds holds wall time.
  bool record_timing = false;

  void validate(std::uint32_t num_classes) const;
  LossKind resolved_loss() const;
  nlohmann::ordered_json to_json() const;
};

struct RoundMetrics {
  int round = 0;
  std::size_t budget = 0;
  double test_top1 = 0.0;
  double val_top1 = 0.0;
  double select_seconds = 0.0;
  int train_epochs = 0;
  std::size_t n_smoothed = 0;
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  /// Labeled train ids in labeling order, with the supervision each trained on.
  std::vector<SampleId> labeled_ids;
  std::vector<TrainTarget> targets;
  std::vector<FlipRecord> flip_log;
  TrainReport last_train;
};

/// Runs the active-learning loop: clean seed, then select / label / smooth /
/// retrain / evaluate until the pool or the budget is exhausted.
RunResult run(const DatasetBundle& bundle, const RunConfig& cfg);

inline constexpr const char* kMetricsHeader =
    "round,budget,test_top1,val_top1,select_seconds,train_epochs,n_smoothed";

void write_metrics_csv(const std::vector<RoundMetrics>& rounds, std::ostream& out);
void write_metrics_csv(const std::vector<RoundMetrics>& rounds, const std::filesystem::path& path);

struct SweepCell {
  StrategyKind strategy;
  double noise_rate;
  std::optional<RunResult> result;
  std::string error;  // non-empty iff the cell failed
};

struct SweepResult {
  std::vector<SweepCell> cells;

  std::vector<const SweepCell*> failed() const;
  /// strategy -> rate -> final test top-1 of successful cells.
  nlohmann::ordered_json aggregate_json() const;
  /// One row per (cell, round): strategy,rate,<metrics columns>.
  void write_aggregate_csv(std::ostream& out) const;
};

using CellRunner = std::function<RunResult(const DatasetBundle&, const RunConfig&)>;

/// Cross product of strategies and noise rates. Cells run on up to `threads`
/// workers and share nothing mutable; a failing cell is recorded and the sweep
/// continues. Cell order is strategies-major regardless of scheduling.
SweepResult sweep(const DatasetBundle& bundle, const std::vector<StrategyKind>& strategies,
                  const std::vector<double>& noise_rates, const RunConfig& base,
                  unsigned threads = 1, const CellRunner& runner = run);

/// Shortest round-trip text for a noise rate, used in file names and keys.
std::string format_rate(double rate);
std::string cell_stem(StrategyKind strategy, double rate);

/// Writes cells/<stem>.csv, aggregate.csv and aggregate.json under dir.
void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace aln
