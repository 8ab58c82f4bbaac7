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

#include "alnoise/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"

#include "alnoise/error.hpp"

namespace aln {

namespace {

const double kLogFloor = std::log(kLogProbFloor);

void check_pair(const ProbVec& p_hat, const ProbVec& target) {
  if (p_hat.size() != target.size()) {
    throw Error(ErrorCode::kShapeMismatch, "prediction and target sizes differ");
  }
  check_prob_vec(p_hat);
  check_prob_vec(target);
}

double floored_log(double p) { return std::max(std::log(std::max(p, 0.0)), kLogFloor); }

double weighted_nll(const ProbVec& p_hat, const Eigen::VectorXd& w) {
  double loss = 0.0;
  for (Eigen::Index y = 0; y < p_hat.size(); ++y) {
    if (w(y) != 0.0) loss -= w(y) * floored_log(p_hat(y));
  }
  return loss;
}

void check_eps(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be in [0,1]");
}

}  // namespace

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCe: return "ce";
    case LossKind::kUniformSmooth: return "uniform_smooth";
    case LossKind::kCcoreSmooth: return "ccore_smooth";
  }
  return "?";
}

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd-momentum";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "ce") return LossKind::kCe;
  if (s == "uniform_smooth") return LossKind::kUniformSmooth;
  if (s == "ccore_smooth") return LossKind::kCcoreSmooth;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind '" + s + "'");
}

OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd-momentum") return OptimizerKind::kSgdMomentum;
  throw Error(ErrorCode::kInvalidArgument, "unknown optimizer '" + s + "'");
}

double loss_ce(const ProbVec& p_hat, const ProbVec& target) {
  check_pair(p_hat, target);
  return weighted_nll(p_hat, target);
}

double loss_uniform_smooth(const ProbVec& p_hat, const ProbVec& target_onehot, double eps) {
  check_pair(p_hat, target_onehot);
  check_eps(eps);
  const double C = static_cast<double>(p_hat.size());
  Eigen::VectorXd w = (1.0 - eps) * target_onehot;
  w.array() += eps / C;
  return weighted_nll(p_hat, w);
}

double loss_ccore_smooth(const ProbVec& p_hat, const ProbVec& target_onehot, double eps,
                         std::uint32_t ccore_class) {
  check_pair(p_hat, target_onehot);
  check_eps(eps);
  if (ccore_class >= p_hat.size()) throw Error(ErrorCode::kInvalidArgument, "ccore class out of range");
  Eigen::VectorXd w = (1.0 - eps) * target_onehot;
  if (argmax_tiebreak(p_hat) == static_cast<Eigen::Index>(ccore_class)) w.array() += eps;
  return weighted_nll(p_hat, w);
}

Eigen::VectorXd loss_weights(LossKind kind, const ProbVec& p_hat, const TrainTarget& target,
                             double eps) {
  const auto C = p_hat.size();
  switch (kind) {
    case LossKind::kCe:
      return target.dist;
    case LossKind::kUniformSmooth: {
      Eigen::VectorXd w = Eigen::VectorXd::Constant(C, eps / static_cast<double>(C));
      w(target.oracle_label) += 1.0 - eps;
      return w;
    }
    case LossKind::kCcoreSmooth: {
      // Samples whose oracle label agrees with the centroid assignment train on
      // their label distribution directly.
      if (!target.ccore_class) return target.dist;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(C);
      w(target.oracle_label) = 1.0 - eps;
      if (argmax_tiebreak(p_hat) == static_cast<Eigen::Index>(*target.ccore_class)) w.array() += eps;
      return w;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

ModelHead::ModelHead(std::uint32_t num_classes, std::uint32_t feature_dim, std::uint32_t hidden)
    : classes_(num_classes), features_(feature_dim), hidden_(hidden) {
  if (num_classes < 2 || feature_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "head needs C >= 2 and d >= 1");
  }
  params_ = Eigen::VectorXd::Zero(out_bias_offset() + classes_);
}

void ModelHead::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto glorot = [&rng](auto&& w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  };
  params_.setZero();
  if (has_hidden()) glorot(hidden_weight());
  glorot(out_weight());
  optimizer_state = {};
  epoch_counter = 0;
}

Eigen::Map<Eigen::MatrixXd> ModelHead::out_weight() {
  return {params_.data() + out_weight_offset(), classes_, out_in_dim()};
}
Eigen::Map<Eigen::VectorXd> ModelHead::out_bias() {
  return {params_.data() + out_bias_offset(), classes_};
}
Eigen::Map<Eigen::MatrixXd> ModelHead::hidden_weight() {
  if (!has_hidden()) throw Error(ErrorCode::kState, "head has no hidden layer");
  return {params_.data() + hidden_weight_offset(), hidden_, features_};
}
Eigen::Map<Eigen::VectorXd> ModelHead::hidden_bias() {
  if (!has_hidden()) throw Error(ErrorCode::kState, "head has no hidden layer");
  return {params_.data() + hidden_bias_offset(), hidden_};
}
Eigen::Map<const Eigen::MatrixXd> ModelHead::out_weight() const {
  return {params_.data() + out_weight_offset(), classes_, out_in_dim()};
}
Eigen::Map<const Eigen::VectorXd> ModelHead::out_bias() const {
  return {params_.data() + out_bias_offset(), classes_};
}
Eigen::Map<const Eigen::MatrixXd> ModelHead::hidden_weight() const {
  if (!has_hidden()) throw Error(ErrorCode::kState, "head has no hidden layer");
  return {params_.data() + hidden_weight_offset(), hidden_, features_};
}
Eigen::Map<const Eigen::VectorXd> ModelHead::hidden_bias() const {
  if (!has_hidden()) throw Error(ErrorCode::kState, "head has no hidden layer");
  return {params_.data() + hidden_bias_offset(), hidden_};
}

Eigen::MatrixXd ModelHead::logits(const Eigen::MatrixXd& x) const {
  if (x.cols() != features_) throw Error(ErrorCode::kShapeMismatch, "feature dimension mismatch");
  if (has_hidden()) {
    Eigen::MatrixXd h = ((x * hidden_weight().transpose()).rowwise() +
                         hidden_bias().transpose()).array().tanh().matrix();
    return (h * out_weight().transpose()).rowwise() + out_bias().transpose();
  }
  return (x * out_weight().transpose()).rowwise() + out_bias().transpose();
}

Eigen::MatrixXd rowwise_softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p = (z.colwise() - z.rowwise().maxCoeff()).array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

Eigen::MatrixXd ModelHead::predict(const Eigen::MatrixXd& x) const { return rowwise_softmax(logits(x)); }

double ModelHead::loss_and_grad(const Eigen::MatrixXd& x, const std::vector<TrainTarget>& targets,
                                LossKind kind, double eps, Eigen::VectorXd* grad) const {
  const Eigen::Index n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != targets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "features and targets disagree in count");
  }
  if (x.cols() != features_) throw Error(ErrorCode::kShapeMismatch, "feature dimension mismatch");

  Eigen::MatrixXd hid;
  Eigen::MatrixXd z;
  if (has_hidden()) {
    hid = ((x * hidden_weight().transpose()).rowwise() + hidden_bias().transpose())
              .array().tanh().matrix();
    z = (hid * out_weight().transpose()).rowwise() + out_bias().transpose();
  } else {
    z = (x * out_weight().transpose()).rowwise() + out_bias().transpose();
  }
  const Eigen::VectorXd lse =
      (z.colwise() - z.rowwise().maxCoeff()).array().exp().rowwise().sum().log().matrix() +
      z.rowwise().maxCoeff();
  Eigen::MatrixXd logp = z.colwise() - lse;
  Eigen::MatrixXd p = logp.array().exp().matrix();

  // dL/dz for a row with weights w is p * sum(w) - w, restricted to the
  // entries whose log-probability is not floored.
  Eigen::MatrixXd gz = Eigen::MatrixXd::Zero(n, classes_);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const ProbVec pi = p.row(i).transpose();
    const Eigen::VectorXd w = loss_weights(kind, pi, targets[i], eps);
    double wsum = 0.0;
    for (Eigen::Index y = 0; y < classes_; ++y) {
      if (w(y) == 0.0) continue;
      if (logp(i, y) <= kLogFloor) {
        total -= w(y) * kLogFloor;
        continue;
      }
      total -= w(y) * logp(i, y);
      wsum += w(y);
      gz(i, y) -= w(y);
    }
    gz.row(i) += wsum * p.row(i);
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  if (grad) {
    grad->setZero(params_.size());
    gz *= inv_n;
    const Eigen::MatrixXd& in = has_hidden() ? hid : x;
    Eigen::Map<Eigen::MatrixXd>(grad->data() + out_weight_offset(), classes_, out_in_dim()) =
        gz.transpose() * in;
    Eigen::Map<Eigen::VectorXd>(grad->data() + out_bias_offset(), classes_) =
        gz.colwise().sum().transpose();
    if (has_hidden()) {
      const Eigen::MatrixXd ga =
          ((gz * out_weight()).array() * (1.0 - hid.array().square())).matrix();
      Eigen::Map<Eigen::MatrixXd>(grad->data() + hidden_weight_offset(), hidden_, features_) =
          ga.transpose() * x;
      Eigen::Map<Eigen::VectorXd>(grad->data() + hidden_bias_offset(), hidden_) =
          ga.colwise().sum().transpose();
    }
  }
  return total * inv_n;
}

double TrainConfig::resolved_lr() const {
  if (lr > 0.0) return lr;
  return optimizer == OptimizerKind::kAdam ? 1e-3 : 1e-2;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kInvalidArgument, "lr must be positive");
  if (plateau_patience < 1 || early_stop_patience < 1) {
    throw Error(ErrorCode::kInvalidArgument, "patience must be at least 1");
  }
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "plateau factor must be in (0,1]");
  }
  if (max_epochs < 1 || batch_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_epochs and batch_size must be positive");
  }
  check_eps(epsilon_smooth);
}

TrainingMonitor::TrainingMonitor(double lr, int plateau_patience, double plateau_factor,
                                 int early_stop_patience)
    : lr_(lr),
      plateau_patience_(plateau_patience),
      plateau_factor_(plateau_factor),
      early_stop_patience_(early_stop_patience),
      best_(std::numeric_limits<double>::infinity()) {}

TrainingMonitor::Step TrainingMonitor::update(double val_loss) {
  Step s;
  if (val_loss < best_) {
    best_ = val_loss;
    since_best_ = 0;
    since_plateau_ = 0;
    s.improved = true;
    return s;
  }
  ++since_best_;
  if (++since_plateau_ >= plateau_patience_) {
    lr_ *= plateau_factor_;
    since_plateau_ = 0;
    s.lr_reduced = true;
  }
  s.stop = since_best_ >= early_stop_patience_;
  return s;
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j = {
      {"epochs", epochs},
      {"best_val_loss", best_val_loss},
      {"final_lr", final_lr},
      {"lr_trace", lr_trace},
      {"train_loss_trace", train_loss_trace},
      {"val_loss_trace", val_loss_trace},
  };
  return j.dump();
}

namespace {

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, OptimizerState& state, Eigen::Index n) : kind_(kind), s_(state) {
    if (s_.first_moment.size() != n) {
      s_.first_moment = Eigen::VectorXd::Zero(n);
      s_.second_moment = Eigen::VectorXd::Zero(n);
      s_.step = 0;
    }
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    ++s_.step;
    if (kind_ == OptimizerKind::kAdam) {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      s_.first_moment = b1 * s_.first_moment + (1.0 - b1) * grad;
      s_.second_moment = b2 * s_.second_moment + (1.0 - b2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(s_.step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(s_.step));
      params.array() -= lr * (s_.first_moment.array() / c1) /
                        ((s_.second_moment.array() / c2).sqrt() + eps);
    } else {
      constexpr double momentum = 0.9;
      s_.first_moment = momentum * s_.first_moment + grad;
      params -= lr * s_.first_moment;
    }
  }

 private:
  OptimizerKind kind_;
  OptimizerState& s_;
};

double validation_loss(const ModelHead& head, const LabeledSet& val) {
  return head.loss_and_grad(val.features, val.targets, LossKind::kCe, 0.0, nullptr);
}

}  // namespace

TrainReport train_head(ModelHead& head, const LabeledSet& train, const LabeledSet& val,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty labeled set");
  if (train.features.rows() != static_cast<Eigen::Index>(train.size()) ||
      val.features.rows() != static_cast<Eigen::Index>(val.size())) {
    throw Error(ErrorCode::kInvalidArgument, "features and targets disagree in count");
  }
  for (const auto& t : train.targets) {
    if (t.dist.size() != head.num_classes() || t.oracle_label >= head.num_classes() ||
        (t.ccore_class && *t.ccore_class >= head.num_classes())) {
      throw Error(ErrorCode::kInvalidArgument, "target class out of range");
    }
  }

  if (!cfg.warm_start) head.init_random(cfg.seed);
  head.optimizer_state = {};

  const LabeledSet& monitor_set = val.size() > 0 ? val : train;
  const std::size_t n = train.size();
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  Optimizer opt(cfg.optimizer, head.optimizer_state, head.params().size());
  TrainingMonitor monitor(cfg.resolved_lr(), cfg.plateau_patience, cfg.plateau_factor,
                          cfg.early_stop_patience);
  TrainReport report;
  Eigen::VectorXd best_params = head.params();
  Eigen::VectorXd grad;
  Eigen::MatrixXd xb;
  std::vector<TrainTarget> tb;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      xb.resize(static_cast<Eigen::Index>(end - start), train.features.cols());
      tb.clear();
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - start)) = train.features.row(static_cast<Eigen::Index>(order[k]));
        tb.push_back(train.targets[order[k]]);
      }
      const double loss = head.loss_and_grad(xb, tb, cfg.loss_kind, cfg.epsilon_smooth, &grad);
      epoch_loss += loss * static_cast<double>(end - start);
      opt.step(head.params(), grad, monitor.lr());
    }
    ++head.epoch_counter;
    report.epochs = epoch + 1;
    report.train_loss_trace.push_back(epoch_loss / static_cast<double>(n));
    report.lr_trace.push_back(monitor.lr());

    const double vl = validation_loss(head, monitor_set);
    report.val_loss_trace.push_back(vl);
    const auto step = monitor.update(vl);
    if (step.improved) best_params = head.params();
    if (step.stop) break;
  }

  if (cfg.restore_best) head.params() = best_params;
  report.best_val_loss = monitor.best();
  report.final_lr = monitor.lr();
  return report;
}

double evaluate_top1(const ModelHead& head, const Eigen::MatrixXd& features,
                     const std::vector<std::uint32_t>& labels) {
  if (labels.empty()) throw Error(ErrorCode::kInvalidArgument, "empty split");
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw Error(ErrorCode::kInvalidArgument, "features and labels disagree in count");
  }
  const Eigen::MatrixXd z = head.predict(features);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (argmax_tiebreak(z.row(i)) == static_cast<Eigen::Index>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace aln
