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

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alnoise/numerics.hpp"

namespace aln {

/// Every loss evaluates log-probabilities as ln(max(p, kLogProbFloor)), so
/// saturated predictions give a large but finite loss.
inline constexpr double kLogProbFloor = 1e-12;

enum class LossKind { kCe, kUniformSmooth, kCcoreSmooth };
enum class OptimizerKind { kAdam, kSgdMomentum };

const char* to_string(LossKind kind);
const char* to_string(OptimizerKind kind);
LossKind parse_loss_kind(const std::string& s);
OptimizerKind parse_optimizer_kind(const std::string& s);

/// -sum_y target_y ln p_hat_y
double loss_ce(const ProbVec& p_hat, const ProbVec& target);

/// -[sum_y (1-eps) target_y ln p_hat_y + (eps/C) sum_y ln p_hat_y]
double loss_uniform_smooth(const ProbVec& p_hat, const ProbVec& target_onehot, double eps);

/// -[sum_y (1-eps) target_y ln p_hat_y + I(argmax p_hat == ccore) eps sum_y ln p_hat_y]
double loss_ccore_smooth(const ProbVec& p_hat, const ProbVec& target_onehot, double eps,
                         std::uint32_t ccore_class);

/// Supervision for one labeled sample.
///
/// `dist` is the (possibly smoothed or relabeled) label distribution.
/// `ccore_class` is set only when the nearest attention centroid disagreed
/// with the oracle; the C-Core smoothed loss uses it together with
/// `oracle_label`.
struct TrainTarget {
  ProbVec dist;
  std::uint32_t oracle_label = 0;
  std::optional<std::uint32_t> ccore_class;
};

/// Per-class weights w such that the per-sample loss equals -sum_y w_y ln p_y.
Eigen::VectorXd loss_weights(LossKind kind, const ProbVec& p_hat, const TrainTarget& target,
                             double eps);

struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step = 0;
};

/// Softmax classifier head: linear (C x d) or one tanh hidden layer of width H.
///
/// Parameters live in one flat vector so optimizers and gradient checks can
/// treat both variants uniformly. Layout, column-major blocks:
///   linear: W (C x d), b (C)
///   hidden: W1 (H x d), b1 (H), W2 (C x H), b2 (C)
class ModelHead {
 public:
  ModelHead() = default;
  ModelHead(std::uint32_t num_classes, std::uint32_t feature_dim, std::uint32_t hidden = 0);

  /// Glorot-uniform weights and zero biases, deterministic in seed.
  void init_random(std::uint64_t seed);

  std::uint32_t num_classes() const { return classes_; }
  std::uint32_t feature_dim() const { return features_; }
  std::uint32_t hidden() const { return hidden_; }
  bool has_hidden() const { return hidden_ > 0; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  /// Views into params(); the hidden_* accessors are only valid for the
  /// hidden variant, out_* always refer to the layer producing logits.
  Eigen::Map<Eigen::MatrixXd> out_weight();
  Eigen::Map<Eigen::VectorXd> out_bias();
  Eigen::Map<Eigen::MatrixXd> hidden_weight();
  Eigen::Map<Eigen::VectorXd> hidden_bias();
  Eigen::Map<const Eigen::MatrixXd> out_weight() const;
  Eigen::Map<const Eigen::VectorXd> out_bias() const;
  Eigen::Map<const Eigen::MatrixXd> hidden_weight() const;
  Eigen::Map<const Eigen::VectorXd> hidden_bias() const;

  /// Row i of the result holds the logits of row i of x (n x d).
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;
  /// Row-wise softmax of logits(x).
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;

  template <typename Derived>
  ProbVec forward(const Eigen::MatrixBase<Derived>& features) const {
    if (features.size() != features_) {
      throw Error(ErrorCode::kShapeMismatch, "feature dimension mismatch");
    }
    Eigen::MatrixXd row = features.template cast<double>().transpose();
    if (!row.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite features");
    return stable_softmax(logits(row).row(0).transpose());
  }

  /// Mean loss over the rows of x; writes d(mean loss)/d(params) to grad when
  /// non-null. The C-Core indicator is piecewise constant and contributes no
  /// gradient.
  double loss_and_grad(const Eigen::MatrixXd& x, const std::vector<TrainTarget>& targets,
                       LossKind kind, double eps, Eigen::VectorXd* grad) const;

  OptimizerState optimizer_state;
  std::int64_t epoch_counter = 0;

 private:
  Eigen::Index hidden_weight_offset() const { return 0; }
  Eigen::Index hidden_bias_offset() const { return Eigen::Index(hidden_) * features_; }
  Eigen::Index out_weight_offset() const {
    return has_hidden() ? hidden_bias_offset() + hidden_ : 0;
  }
  Eigen::Index out_in_dim() const { return has_hidden() ? hidden_ : features_; }
  Eigen::Index out_bias_offset() const {
    return out_weight_offset() + Eigen::Index(classes_) * out_in_dim();
  }

  std::uint32_t classes_ = 0;
  std::uint32_t features_ = 0;
  std::uint32_t hidden_ = 0;
  Eigen::VectorXd params_;
};

/// Row-wise numerically stable softmax.
Eigen::MatrixXd rowwise_softmax(const Eigen::MatrixXd& logits);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  /// Zero means the optimizer default (Adam 1e-3, SGD 1e-2).
  double lr = 0.0;
  int plateau_patience = 10;
  double plateau_factor = 0.9;
  int early_stop_patience = 5;
  int max_epochs = 100;
  int batch_size = 64;
  double epsilon_smooth = 0.1;
  LossKind loss_kind = LossKind::kCe;
  std::uint32_t hidden = 0;
  bool warm_start = false;
  /// Restore the parameters of the best validation epoch when training ends.
  bool restore_best = true;
  std::uint64_t seed = 0;

  double resolved_lr() const;
  void validate() const;
};

/// Validation-loss bookkeeping: learning-rate plateau reduction and early
/// stopping, kept separate from the optimizer so it can be driven directly.
class TrainingMonitor {
 public:
  TrainingMonitor(double lr, int plateau_patience, double plateau_factor, int early_stop_patience);

  struct Step {
    bool improved = false;
    bool lr_reduced = false;
    bool stop = false;
  };

  /// Feeds one epoch's validation loss. A loss counts as an improvement only
  /// when strictly below the best seen so far.
  Step update(double val_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  int epochs_since_best() const { return since_best_; }

 private:
  double lr_;
  int plateau_patience_;
  double plateau_factor_;
  int early_stop_patience_;
  double best_;
  int since_best_ = 0;
  int since_plateau_ = 0;
};

struct LabeledSet {
  Eigen::MatrixXd features;  // n x d
  std::vector<TrainTarget> targets;

  std::size_t size() const { return targets.size(); }
};

struct TrainReport {
  int epochs = 0;
  double best_val_loss = 0.0;
  double final_lr = 0.0;
  std::vector<double> lr_trace;
  std::vector<double> train_loss_trace;
  std::vector<double> val_loss_trace;

  std::string to_json() const;
};

/// Mini-batch training with the configured loss against `train`; the plain
/// cross-entropy on `val` drives plateau reduction and early stopping. When
/// cfg.warm_start is false the head is re-initialized from cfg.seed first.
TrainReport train_head(ModelHead& head, const LabeledSet& train, const LabeledSet& val,
                       const TrainConfig& cfg);

/// Fraction of rows whose tie-broken argmax prediction equals the label.
double evaluate_top1(const ModelHead& head, const Eigen::MatrixXd& features,
                     const std::vector<std::uint32_t>& labels);

}  // namespace aln
