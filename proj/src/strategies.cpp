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

#include "alnoise/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "alnoise/error.hpp"

namespace aln {

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = {"random", "entropy",     "margin",
                                                 "hybrid", "model-delta", "gci-vital"};
  return names;
}

const char* to_string(StrategyKind kind) {
  return strategy_names()[static_cast<std::size_t>(kind)].c_str();
}

StrategyKind parse_strategy(const std::string& name) {
  const auto& names = strategy_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<StrategyKind>(i);
  }
  std::string all;
  for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + name + "' (expected one of: " + all + ")");
}

const char* to_string(SmoothingMode mode) {
  switch (mode) {
    case SmoothingMode::kSmooth: return "smooth";
    case SmoothingMode::kHard: return "hard";
    case SmoothingMode::kOff: return "off";
  }
  return "?";
}

SmoothingMode parse_smoothing_mode(const std::string& s) {
  if (s == "smooth") return SmoothingMode::kSmooth;
  if (s == "hard") return SmoothingMode::kHard;
  if (s == "off") return SmoothingMode::kOff;
  throw Error(ErrorCode::kInvalidArgument, "unknown smoothing mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Centroids

CentroidBank build_centroids(const std::vector<const SampleRecord*>& samples,
                             const std::vector<std::uint32_t>& labels, std::uint32_t num_classes) {
  if (samples.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "samples and labels disagree in count");
  }
  if (samples.empty()) throw Error(ErrorCode::kMissingClass, "no clean samples");
  const Eigen::Index m = samples.front()->attention.rows();
  const Eigen::Index e = samples.front()->attention.cols();

  CentroidBank bank;
  bank.centroids_.assign(num_classes, Eigen::MatrixXd::Zero(m, e));
  bank.counts_.assign(num_classes, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& att = samples[i]->attention;
    if (att.rows() != m || att.cols() != e) {
      throw Error(ErrorCode::kShapeMismatch, "attention shape mismatch");
    }
    if (labels[i] >= num_classes) throw Error(ErrorCode::kInvalidArgument, "label out of range");
    bank.centroids_[labels[i]] += att.cast<double>();
    ++bank.counts_[labels[i]];
  }
  bank.stacked_.resize(num_classes, m * e);
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    if (bank.counts_[c] == 0) {
      throw Error(ErrorCode::kMissingClass, "class " + std::to_string(c) + " has no clean sample");
    }
    bank.centroids_[c] /= static_cast<double>(bank.counts_[c]);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index k = 0; k < e; ++k) bank.stacked_(c, j * e + k) = bank.centroids_[c](j, k);
  }
  return bank;
}

ScoreVec CentroidBank::distances(const AttentionMap& attention) const {
  if (attention.size() != stacked_.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "attention shape mismatch");
  }
  const Eigen::RowVectorXd v =
      Eigen::Map<const Eigen::RowVectorXf>(attention.data(), attention.size()).cast<double>();
  return (stacked_.rowwise() - v).rowwise().norm();
}

std::uint32_t CentroidBank::nearest(const AttentionMap& attention) const {
  const ScoreVec d = distances(attention);
  return static_cast<std::uint32_t>(argmax_tiebreak(-d));
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

void check_context(const QueryContext& ctx, bool needs_head) {
  if (needs_head && ctx.head == nullptr) throw Error(ErrorCode::kState, "query context has no head");
  std::unordered_set<SampleId> labeled;
  labeled.reserve(ctx.labeled.size());
  for (const auto* s : ctx.labeled) labeled.insert(s->id);
  for (const auto* s : ctx.unlabeled) {
    if (labeled.count(s->id)) {
      throw Error(ErrorCode::kState, "sample " + std::to_string(s->id) + " is both labeled and unlabeled");
    }
  }
}

Eigen::MatrixXd gather_features(const std::vector<const SampleRecord*>& samples, Eigen::Index d) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = samples[i]->features.cast<double>().transpose();
  }
  return x;
}

Eigen::MatrixXd pool_probs(const QueryContext& ctx, const ModelHead& head) {
  return head.predict(gather_features(ctx.unlabeled, head.feature_dim()));
}

/// Greedy top-k by score (descending, or ascending when `ascending`), ties by id.
SelectionResult take_top_k(const QueryContext& ctx, const std::vector<double>& scores,
                           std::size_t k, bool ascending = false) {
  const std::size_t n = ctx.unlabeled.size();
  const std::size_t take = std::min(k, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return ascending ? scores[a] < scores[b] : scores[a] > scores[b];
    return ctx.unlabeled[a]->id < ctx.unlabeled[b]->id;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
  SelectionResult r;
  r.chosen.reserve(take);
  r.scores.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    if (!std::isfinite(scores[idx[i]])) throw Error(ErrorCode::kNonFinite, "non-finite selection score");
    r.chosen.push_back(ctx.unlabeled[idx[i]]->id);
    r.scores.push_back(scores[idx[i]]);
  }
  r.ccore_class.assign(take, std::nullopt);
  return r;
}

double gci_from_parts(double lambda, const ProbVec& p_hat, const ScoreVec& dist) {
  const double ln_c = std::log(static_cast<double>(p_hat.size()));
  const auto y_hat = argmax_tiebreak(p_hat);
  const ProbVec soft = stable_softmax(dist);
  return lambda * entropy(p_hat) + (1.0 - lambda) * soft(y_hat) * ln_c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Strategies

double lambda_schedule(const QueryContext& ctx) {
  const auto& s = ctx.lambda;
  double frac = 0.0;
  if (s.mode == LambdaSchedule::Mode::kValidation) {
    frac = s.val_top1;
  } else if (ctx.budget_total > 0) {
    frac = static_cast<double>(ctx.budget_used) / static_cast<double>(ctx.budget_total);
  }
  frac = std::clamp(frac, 0.0, 1.0);
  return std::clamp(s.start + (s.end - s.start) * frac, 0.0, 1.0);
}

double gci_score(const QueryContext& ctx, const SampleRecord& sample) {
  if (ctx.centroids == nullptr) throw Error(ErrorCode::kState, "gci-vital needs a centroid bank");
  if (ctx.head == nullptr) throw Error(ErrorCode::kState, "query context has no head");
  return gci_from_parts(lambda_schedule(ctx), ctx.head->forward(sample.features),
                        ctx.centroids->distances(sample.attention));
}

SelectionResult select_random(const QueryContext& ctx, std::size_t k) {
  check_context(ctx, false);
  const std::size_t n = ctx.unlabeled.size();
  const std::size_t take = std::min(k, n);
  std::seed_seq seq{static_cast<std::uint32_t>(ctx.seed), static_cast<std::uint32_t>(ctx.seed >> 32),
                    static_cast<std::uint32_t>(ctx.round)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  SelectionResult r;
  for (std::size_t i = 0; i < take; ++i) {
    r.chosen.push_back(ctx.unlabeled[idx[i]]->id);
    r.scores.push_back(0.0);
  }
  r.ccore_class.assign(take, std::nullopt);
  return r;
}

SelectionResult select_entropy(const QueryContext& ctx, std::size_t k) {
  check_context(ctx, true);
  const Eigen::MatrixXd p = pool_probs(ctx, *ctx.head);
  std::vector<double> s(ctx.unlabeled.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i) s[i] = entropy(p.row(i).transpose());
  return take_top_k(ctx, s, k);
}

SelectionResult select_margin(const QueryContext& ctx, std::size_t k) {
  check_context(ctx, true);
  const Eigen::MatrixXd p = pool_probs(ctx, *ctx.head);
  std::vector<double> s(ctx.unlabeled.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i) s[i] = margin(p.row(i).transpose());
  return take_top_k(ctx, s, k, /*ascending=*/true);
}

SelectionResult select_hybrid(const QueryContext& ctx, std::size_t k, double alpha) {
  check_context(ctx, true);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be in [0,1]");
  const Eigen::Index d = ctx.head->feature_dim();
  const Eigen::MatrixXd x = gather_features(ctx.unlabeled, d);
  const Eigen::MatrixXd p = ctx.head->predict(x);
  const double ln_c = std::log(static_cast<double>(ctx.head->num_classes()));
  const std::size_t n = ctx.unlabeled.size();

  std::vector<double> diversity(n, 1.0);
  if (!ctx.labeled.empty()) {
    const Eigen::MatrixXd lab = gather_features(ctx.labeled, d);
    double pool_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::RowVectorXd xi = x.row(static_cast<Eigen::Index>(i));
      diversity[i] = std::sqrt((lab.rowwise() - xi).rowwise().squaredNorm().minCoeff());
      pool_max = std::max(pool_max, diversity[i]);
    }
    for (auto& v : diversity) v = pool_max > 0.0 ? v / pool_max : 0.0;
  }
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = entropy(p.row(static_cast<Eigen::Index>(i)).transpose()) / ln_c;
    s[i] = alpha * h + (1.0 - alpha) * diversity[i];
  }
  return take_top_k(ctx, s, k);
}

SelectionResult select_model_delta(const QueryContext& ctx, std::size_t k) {
  if (ctx.previous_head == nullptr) return select_random(ctx, k);
  check_context(ctx, true);
  const Eigen::MatrixXd x = gather_features(ctx.unlabeled, ctx.head->feature_dim());
  const Eigen::MatrixXd now = ctx.head->predict(x);
  const Eigen::MatrixXd before = ctx.previous_head->predict(x);
  std::vector<double> s(ctx.unlabeled.size());
  for (Eigen::Index i = 0; i < now.rows(); ++i) s[i] = (now.row(i) - before.row(i)).lpNorm<1>();
  return take_top_k(ctx, s, k);
}

SelectionResult select_gci_vital(const QueryContext& ctx, std::size_t k) {
  check_context(ctx, true);
  if (ctx.centroids == nullptr) throw Error(ErrorCode::kState, "gci-vital needs a centroid bank");
  const double lambda = lambda_schedule(ctx);
  const Eigen::MatrixXd p = pool_probs(ctx, *ctx.head);
  std::vector<double> s(ctx.unlabeled.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    s[i] = gci_from_parts(lambda, p.row(i).transpose(),
                          ctx.centroids->distances(ctx.unlabeled[i]->attention));
  }
  SelectionResult r = take_top_k(ctx, s, k);
  std::unordered_map<SampleId, const SampleRecord*> by_id;
  for (const auto* smp : ctx.unlabeled) by_id.emplace(smp->id, smp);
  for (std::size_t i = 0; i < r.chosen.size(); ++i) {
    r.ccore_class[i] = ctx.centroids->nearest(by_id.at(r.chosen[i])->attention);
  }
  return r;
}

SelectionResult select(StrategyKind kind, const QueryContext& ctx, std::size_t k) {
  switch (kind) {
    case StrategyKind::kRandom: return select_random(ctx, k);
    case StrategyKind::kEntropy: return select_entropy(ctx, k);
    case StrategyKind::kMargin: return select_margin(ctx, k);
    case StrategyKind::kHybrid: return select_hybrid(ctx, k, ctx.hybrid_alpha);
    case StrategyKind::kModelDelta: return select_model_delta(ctx, k);
    case StrategyKind::kGciVital: return select_gci_vital(ctx, k);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy");
}

void attach_smoothing_decisions(SelectionResult& result,
                                const std::vector<std::uint32_t>& oracle_labels,
                                SmoothingMode mode, double eps) {
  if (oracle_labels.size() != result.chosen.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one oracle label per chosen sample required");
  }
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be in [0,1]");
  result.decisions.assign(result.chosen.size(), SmoothingDecision{});
  if (mode == SmoothingMode::kOff) return;
  for (std::size_t i = 0; i < result.chosen.size(); ++i) {
    const auto& cc = i < result.ccore_class.size() ? result.ccore_class[i] : std::nullopt;
    if (!cc || *cc == oracle_labels[i]) continue;
    auto& dec = result.decisions[i];
    dec.ccore_class = *cc;
    if (mode == SmoothingMode::kHard) {
      dec.kind = SmoothingDecision::Kind::kHardRelabel;
    } else {
      dec.kind = SmoothingDecision::Kind::kSmooth;
      dec.eps = eps;
    }
  }
}

ProbVec apply_decision(const SmoothingDecision& decision, std::uint32_t oracle_label,
                       std::uint32_t num_classes) {
  if (oracle_label >= num_classes || decision.ccore_class >= num_classes) {
    throw Error(ErrorCode::kInvalidArgument, "class index out of range");
  }
  ProbVec p = ProbVec::Zero(num_classes);
  switch (decision.kind) {
    case SmoothingDecision::Kind::kNone:
      p(oracle_label) = 1.0;
      break;
    case SmoothingDecision::Kind::kHardRelabel:
      p(decision.ccore_class) = 1.0;
      break;
    case SmoothingDecision::Kind::kSmooth:
      p(oracle_label) += 1.0 - decision.eps;
      p(decision.ccore_class) += decision.eps;
      break;
  }
  return p;
}

}  // namespace aln
