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

// Pool-based query strategies. Every selector scores candidates one at a time
// and takes the greedy top-K; equal scores resolve to the lower sample id.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alnoise/dataset.hpp"
#include "alnoise/model.hpp"
#include "alnoise/numerics.hpp"

namespace aln {

enum class StrategyKind { kRandom, kEntropy, kMargin, kHybrid, kModelDelta, kGciVital };

/// Stable CLI identifiers, in the order of StrategyKind.
const std::vector<std::string>& strategy_names();
const char* to_string(StrategyKind kind);
StrategyKind parse_strategy(const std::string& name);

/// Per-class mean attention maps of the clean seed set. Immutable once built.
class CentroidBank {
 public:
  const std::vector<Eigen::MatrixXd>& centroids() const { return centroids_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(centroids_.size()); }

  /// Frobenius distance from `attention` to every centroid.
  ScoreVec distances(const AttentionMap& attention) const;
  /// Class of the nearest centroid; ties resolve to the lowest class.
  std::uint32_t nearest(const AttentionMap& attention) const;

 private:
  friend CentroidBank build_centroids(const std::vector<const SampleRecord*>&,
                                      const std::vector<std::uint32_t>&, std::uint32_t);

  std::vector<Eigen::MatrixXd> centroids_;
  std::vector<std::size_t> counts_;
  // Centroid c flattened row-major into row c, for batched distances.
  Eigen::MatrixXd stacked_;
};

/// labels[i] is the clean label of samples[i]. Throws kMissingClass when a
/// class has no sample.
CentroidBank build_centroids(const std::vector<const SampleRecord*>& samples,
                             const std::vector<std::uint32_t>& labels, std::uint32_t num_classes);

struct LambdaSchedule {
  enum class Mode { kBudget, kValidation };
  double start = 0.25;
  double end = 0.75;
  Mode mode = Mode::kBudget;
  /// Read only in kValidation mode: top-1 on the validation split after the
  /// latest training round.
  double val_top1 = 0.0;
};

struct QueryContext {
  const ModelHead* head = nullptr;
  const ModelHead* previous_head = nullptr;
  std::vector<const SampleRecord*> labeled;
  std::vector<const SampleRecord*> unlabeled;
  const CentroidBank* centroids = nullptr;
  int round = 0;
  std::size_t budget_used = 0;
  std::size_t budget_total = 0;
  LambdaSchedule lambda;
  double hybrid_alpha = 0.5;
  std::uint64_t seed = 0;
};

enum class SmoothingMode { kSmooth, kHard, kOff };
const char* to_string(SmoothingMode mode);
SmoothingMode parse_smoothing_mode(const std::string& s);

struct SmoothingDecision {
  enum class Kind { kNone, kSmooth, kHardRelabel };
  Kind kind = Kind::kNone;
  std::uint32_t ccore_class = 0;
  double eps = 0.0;
};

struct SelectionResult {
  std::vector<SampleId> chosen;
  std::vector<double> scores;
  /// Filled for gci-vital only: nearest-centroid class of each chosen sample.
  std::vector<std::optional<std::uint32_t>> ccore_class;
  /// Filled by attach_smoothing_decisions once the oracle has answered.
  std::vector<SmoothingDecision> decisions;
};

/// Linear interpolation from start to end in the budget fraction (or in the
/// validation top-1), clamped to [0,1].
double lambda_schedule(const QueryContext& ctx);

/// lambda H(p_hat) + (1 - lambda) softmax_y(d_F(V, centroid_y))[y_hat] ln C,
/// with y_hat the predicted class.
double gci_score(const QueryContext& ctx, const SampleRecord& sample);

SelectionResult select_random(const QueryContext& ctx, std::size_t k);
SelectionResult select_entropy(const QueryContext& ctx, std::size_t k);
SelectionResult select_margin(const QueryContext& ctx, std::size_t k);
SelectionResult select_hybrid(const QueryContext& ctx, std::size_t k, double alpha);
/// Falls back to select_random when ctx.previous_head is null.
SelectionResult select_model_delta(const QueryContext& ctx, std::size_t k);
SelectionResult select_gci_vital(const QueryContext& ctx, std::size_t k);

SelectionResult select(StrategyKind kind, const QueryContext& ctx, std::size_t k);

/// Compares each oracle label with the chosen sample's centroid class and
/// records a decision per chosen id. `oracle_labels` is parallel to
/// result.chosen. Samples without a centroid class get kNone.
void attach_smoothing_decisions(SelectionResult& result,
                                const std::vector<std::uint32_t>& oracle_labels,
                                SmoothingMode mode, double eps);

/// Label distribution after applying a decision to the oracle's answer.
ProbVec apply_decision(const SmoothingDecision& decision, std::uint32_t oracle_label,
                       std::uint32_t num_classes);

}  // namespace aln
