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


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alnoise/model.hpp"

namespace aln {
namespace {

double ref_log(double p) { return std::log(std::max(p, 1e-12)); }

// Reference losses written directly from their sums.
double ref_ce(const ProbVec& p, const ProbVec& t) {
  double s = 0.0;
  for (Eigen::Index y = 0; y < p.size(); ++y) s += t(y) * ref_log(p(y));
  return -s;
}

double ref_uniform(const ProbVec& p, const ProbVec& t, double eps) {
  const double c = static_cast<double>(p.size());
  double a = 0.0, b = 0.0;
  for (Eigen::Index y = 0; y < p.size(); ++y) {
    a += (1.0 - eps) * t(y) * ref_log(p(y));
    b += ref_log(p(y));
  }
  return -(a + eps / c * b);
}

double ref_ccore(const ProbVec& p, const ProbVec& t, double eps, Eigen::Index cc) {
  Eigen::Index best = 0;
  for (Eigen::Index y = 1; y < p.size(); ++y) {
    if (p(y) > p(best)) best = y;
  }
  double a = 0.0, b = 0.0;
  for (Eigen::Index y = 0; y < p.size(); ++y) {
    a += (1.0 - eps) * t(y) * ref_log(p(y));
    b += ref_log(p(y));
  }
  return -(a + (best == cc ? eps * b : 0.0));
}

ProbVec random_prob(std::mt19937_64& rng, int c) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  ProbVec p(c);
  for (int i = 0; i < c; ++i) p(i) = u(rng);
  return p / p.sum();
}

ProbVec hot(int k, int c) {
  ProbVec p = ProbVec::Zero(c);
  p(k) = 1.0;
  return p;
}

TEST(Loss, CrossEntropyExamples) {
  EXPECT_EQ(loss_ce(hot(2, 4), hot(2, 4)), 0.0);
  EXPECT_NEAR(loss_ce(ProbVec::Constant(10, 0.1), hot(7, 10)), std::log(10.0), 1e-12);
  // zero probability on the target is floored
  EXPECT_NEAR(loss_ce(hot(0, 3), hot(1, 3)), -std::log(1e-12), 1e-9);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const ProbVec p = random_prob(rng, 6);
    const ProbVec q = random_prob(rng, 6);
    EXPECT_NEAR(loss_ce(p, q), ref_ce(p, q), 1e-9);
  }
}

TEST(Loss, UniformSmoothExamples) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const ProbVec p = random_prob(rng, 5);
    const ProbVec y = hot(t % 5, 5);
    EXPECT_EQ(loss_uniform_smooth(p, y, 0.0), loss_ce(p, y));
    EXPECT_NEAR(loss_uniform_smooth(p, y, 0.1), ref_uniform(p, y, 0.1), 1e-9);
  }
  EXPECT_NEAR(loss_uniform_smooth(ProbVec::Constant(8, 0.125), hot(1, 8), 1.0), std::log(8.0),
              1e-12);
}

TEST(Loss, CcoreSmoothExamples) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const ProbVec p = random_prob(rng, 5);
    const ProbVec y = hot(t % 5, 5);
    const auto pred = static_cast<std::uint32_t>(argmax_tiebreak(p));
    const std::uint32_t other = (pred + 1) % 5;
    EXPECT_NEAR(loss_ccore_smooth(p, y, 0.0, pred), loss_ce(p, y), 1e-12);
    EXPECT_NEAR(loss_ccore_smooth(p, y, 0.2, other), 0.8 * loss_ce(p, y), 1e-12);
    EXPECT_NEAR(loss_ccore_smooth(p, y, 0.2, pred), ref_ccore(p, y, 0.2, pred), 1e-9);
    // lower bound, strict when the indicator fires
    EXPECT_GT(loss_ccore_smooth(p, y, 0.2, pred), 0.8 * loss_ce(p, y));
    EXPECT_GE(loss_ccore_smooth(p, y, 0.2, other), 0.8 * loss_ce(p, y) - 1e-15);
  }
}

TEST(Loss, ResidualTermWhenConfident) {
  // near-perfect prediction: CE vanishes but the smoothing term does not
  ProbVec p = ProbVec::Constant(4, 1e-6);
  p(2) = 1.0 - 3e-6;
  EXPECT_LT(loss_ce(p, hot(2, 4)), 1e-5);
  EXPECT_GT(loss_ccore_smooth(p, hot(2, 4), 0.1, 2), 0.1 * 3 * 13.0);
}

TEST(Loss, WeightsReproduceLosses) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const ProbVec p = random_prob(rng, 4);
    TrainTarget tt{hot(t % 4, 4), static_cast<std::uint32_t>(t % 4), std::nullopt};
    const Eigen::VectorXd logp = p.array().log().matrix();
    EXPECT_NEAR(-loss_weights(LossKind::kCe, p, tt, 0.3).dot(logp), loss_ce(p, tt.dist), 1e-12);
    EXPECT_NEAR(-loss_weights(LossKind::kUniformSmooth, p, tt, 0.3).dot(logp),
                loss_uniform_smooth(p, tt.dist, 0.3), 1e-12);
    // no centroid disagreement: C-Core loss is plain CE on the target
    EXPECT_NEAR(-loss_weights(LossKind::kCcoreSmooth, p, tt, 0.3).dot(logp),
                loss_ce(p, tt.dist), 1e-12);
    tt.ccore_class = static_cast<std::uint32_t>(argmax_tiebreak(p));
    EXPECT_NEAR(-loss_weights(LossKind::kCcoreSmooth, p, tt, 0.3).dot(logp),
                loss_ccore_smooth(p, tt.dist, 0.3, *tt.ccore_class), 1e-12);
  }
}

TEST(Loss, Names) {
  for (LossKind k : {LossKind::kCe, LossKind::kUniformSmooth, LossKind::kCcoreSmooth}) {
    EXPECT_EQ(parse_loss_kind(to_string(k)), k);
  }
  for (OptimizerKind k : {OptimizerKind::kAdam, OptimizerKind::kSgdMomentum}) {
    EXPECT_EQ(parse_optimizer_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_loss_kind("mse"), Error);
}

TEST(Head, ZeroWeightsUniform) {
  ModelHead h(5, 3);
  h.params().setZero();
  const ProbVec p = h.forward(Eigen::Vector3d(1.0, -2.0, 3.0));
  EXPECT_TRUE(p.isApprox(ProbVec::Constant(5, 0.2), 1e-15));
  EXPECT_THROW(h.forward(Eigen::Vector2d(1.0, 1.0)), Error);
  EXPECT_THROW(h.forward(Eigen::Vector3d(1.0, NAN, 1.0)), Error);
}

TEST(Head, SaturatesAlongHugeRow) {
  ModelHead h(3, 2);
  h.params().setZero();
  h.out_weight()(1, 0) = 1e4;
  const ProbVec p = h.forward(Eigen::Vector2d(1.0, 0.0));
  EXPECT_GT(p(1), 1.0 - 1e-12);
}

TEST(Head, MatchesReferenceForward) {
  for (std::uint32_t hidden : {0u, 4u}) {
    ModelHead h(3, 5, hidden);
    h.init_random(9 + hidden);
    h.params().tail(3).setRandom();
    if (hidden) h.hidden_bias().setRandom();
    const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
    const auto params = h.params();
    // unpack the documented column-major layout by hand
    Eigen::VectorXd input = x;
    Eigen::Index off = 0;
    if (hidden) {
      Eigen::VectorXd a(hidden);
      for (std::uint32_t r = 0; r < hidden; ++r) {
        double s = params(Eigen::Index(hidden) * 5 + r);
        for (int c = 0; c < 5; ++c) s += params(Eigen::Index(c) * hidden + r) * x(c);
        a(r) = std::tanh(s);
      }
      input = a;
      off = Eigen::Index(hidden) * 5 + hidden;
    }
    const Eigen::Index in = input.size();
    Eigen::VectorXd z(3);
    for (int r = 0; r < 3; ++r) {
      double s = params(off + 3 * in + r);
      for (Eigen::Index c = 0; c < in; ++c) s += params(off + c * 3 + r) * input(c);
      z(r) = s;
    }
    Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    e /= e.sum();
    EXPECT_LE((h.forward(x) - e).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((h.predict(x.transpose()).row(0).transpose() - e).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Head, InitDeterministic) {
  ModelHead a(4, 6, 3), b(4, 6, 3), c(4, 6, 3);
  a.init_random(5);
  b.init_random(5);
  c.init_random(6);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
  EXPECT_EQ(a.params().size(), 3 * 6 + 3 + 4 * 3 + 4);
}

struct GradCase {
  LossKind kind;
  std::uint32_t hidden;
};

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const GradCase gc = GetParam();
  std::mt19937_64 rng(100 + static_cast<int>(gc.kind) * 10 + gc.hidden);
  int checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::uint32_t c = 2 + inst % 4;
    const std::uint32_t d = 1 + inst % 8;
    ModelHead h(c, d, gc.hidden);
    h.init_random(rng());
    h.params() += 0.3 * Eigen::VectorXd::Random(h.params().size());
    const int n = 6;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(n, d);
    std::vector<TrainTarget> targets;
    const Eigen::MatrixXd p = h.predict(x);
    for (int i = 0; i < n; ++i) {
      const std::uint32_t y = static_cast<std::uint32_t>(rng() % c);
      TrainTarget t{hot(static_cast<int>(y), static_cast<int>(c)), y, std::nullopt};
      if (i % 2 == 0) t.ccore_class = static_cast<std::uint32_t>(argmax_tiebreak(p.row(i)));
      targets.push_back(t);
    }
    Eigen::VectorXd g;
    h.loss_and_grad(x, targets, gc.kind, 0.2, &g);
    const double step = 1e-5;
    Eigen::VectorXd num(g.size());
    bool stable = true;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      ModelHead plus = h, minus = h;
      plus.params()(k) += step;
      minus.params()(k) -= step;
      // the indicator must not switch inside the stencil
      const Eigen::MatrixXd pp = plus.predict(x), pm = minus.predict(x);
      for (int i = 0; i < n; ++i) {
        stable &= argmax_tiebreak(pp.row(i)) == argmax_tiebreak(p.row(i));
        stable &= argmax_tiebreak(pm.row(i)) == argmax_tiebreak(p.row(i));
      }
      num(k) = (plus.loss_and_grad(x, targets, gc.kind, 0.2, nullptr) -
                minus.loss_and_grad(x, targets, gc.kind, 0.2, nullptr)) /
               (2 * step);
    }
    if (!stable) continue;
    ++checked;
    const double rel = (g - num).norm() / std::max(1e-8, g.norm() + num.norm());
    EXPECT_LT(rel, 1e-5) << "instance " << inst;
  }
  EXPECT_GE(checked, 15);
}

INSTANTIATE_TEST_SUITE_P(
    AllLosses, GradientCheck,
    ::testing::Values(GradCase{LossKind::kCe, 0}, GradCase{LossKind::kUniformSmooth, 0},
                      GradCase{LossKind::kCcoreSmooth, 0}, GradCase{LossKind::kCe, 3},
                      GradCase{LossKind::kUniformSmooth, 3}, GradCase{LossKind::kCcoreSmooth, 3}));

TEST(Monitor, PlateauReducesLrAfterTenFlatEpochs) {
  TrainingMonitor m(1e-3, 10, 0.9, 100);
  EXPECT_TRUE(m.update(1.0).improved);
  for (int e = 1; e < 10; ++e) {
    const auto s = m.update(1.0);
    EXPECT_FALSE(s.improved);
    EXPECT_FALSE(s.lr_reduced);
  }
  const auto s = m.update(1.0);
  EXPECT_TRUE(s.lr_reduced);
  EXPECT_DOUBLE_EQ(m.lr(), 0.9e-3);
  for (int e = 1; e < 10; ++e) EXPECT_FALSE(m.update(1.0).lr_reduced);
  EXPECT_TRUE(m.update(1.0).lr_reduced);
  EXPECT_DOUBLE_EQ(m.lr(), 0.81e-3);
}

TEST(Monitor, EarlyStopAfterFiveRisingEpochs) {
  TrainingMonitor m(1e-3, 10, 0.9, 5);
  EXPECT_FALSE(m.update(1.0).stop);
  for (int e = 1; e < 5; ++e) EXPECT_FALSE(m.update(1.0 + e).stop);
  EXPECT_TRUE(m.update(6.0).stop);
  EXPECT_EQ(m.epochs_since_best(), 5);
}

TEST(Monitor, ImprovementResetsCounters) {
  TrainingMonitor m(1.0, 3, 0.5, 4);
  m.update(1.0);
  m.update(2.0);
  m.update(2.0);
  EXPECT_TRUE(m.update(0.5).improved);
  EXPECT_EQ(m.epochs_since_best(), 0);
  EXPECT_FALSE(m.update(0.5).improved);  // equal is not an improvement
  EXPECT_DOUBLE_EQ(m.lr(), 1.0);
}

LabeledSet separable(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  LabeledSet s;
  s.features.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const std::uint32_t y = i % 2;
    s.features(i, 0) = (y ? 3.0 : -3.0) + 0.5 * g(rng);
    s.features(i, 1) = g(rng);
    s.targets.push_back({hot(static_cast<int>(y), 2), y, std::nullopt});
  }
  return s;
}

std::vector<std::uint32_t> labels_of(const LabeledSet& s) {
  std::vector<std::uint32_t> out;
  for (const auto& t : s.targets) out.push_back(t.oracle_label);
  return out;
}

TEST(Train, SeparableTwoClass) {
  for (std::uint32_t hidden : {0u, 4u}) {
    const LabeledSet train = separable(200, 1);
    const LabeledSet val = separable(50, 2);
    TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.hidden = hidden;
    cfg.seed = 3;
    ModelHead head(2, 2, hidden);
    const TrainReport rep = train_head(head, train, val, cfg);
    EXPECT_LE(rep.epochs, 200);
    EXPECT_GE(evaluate_top1(head, train.features, labels_of(train)), 0.99);
    EXPECT_EQ(rep.val_loss_trace.size(), static_cast<std::size_t>(rep.epochs));
  }
}

TEST(Train, DeterministicInSeed) {
  const LabeledSet train = separable(100, 4);
  const LabeledSet val = separable(30, 5);
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.seed = 11;
  ModelHead a(2, 2), b(2, 2), c(2, 2);
  train_head(a, train, val, cfg);
  train_head(b, train, val, cfg);
  EXPECT_EQ(a.params(), b.params());
  cfg.seed = 12;
  train_head(c, train, val, cfg);
  EXPECT_NE(a.params(), c.params());
}

TEST(Train, SgdMomentumAlsoLearns) {
  const LabeledSet train = separable(200, 6);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSgdMomentum;
  cfg.max_epochs = 100;
  ModelHead head(2, 2);
  const TrainReport rep = train_head(head, train, LabeledSet{}, cfg);
  EXPECT_DOUBLE_EQ(rep.lr_trace.front(), 1e-2);
  EXPECT_GE(evaluate_top1(head, train.features, labels_of(train)), 0.99);
}

TEST(Train, Errors) {
  ModelHead head(2, 2);
  TrainConfig cfg;
  EXPECT_THROW(train_head(head, LabeledSet{}, LabeledSet{}, cfg), Error);
  LabeledSet bad = separable(10, 1);
  bad.targets[0].oracle_label = 5;
  bad.targets[0].dist = hot(1, 3);
  EXPECT_THROW(train_head(head, bad, LabeledSet{}, cfg), Error);
  TrainConfig neg;
  neg.epsilon_smooth = 1.5;
  EXPECT_THROW(neg.validate(), Error);
  neg = TrainConfig{};
  neg.plateau_patience = 0;
  EXPECT_THROW(neg.validate(), Error);
  neg = TrainConfig{};
  neg.lr = -1.0;
  EXPECT_THROW(neg.validate(), Error);
  neg.lr = 0.0;
  EXPECT_NO_THROW(neg.validate());  // zero selects the optimizer default
  EXPECT_DOUBLE_EQ(neg.resolved_lr(), 1e-3);
}

TEST(Train, ReportJson) {
  TrainReport r;
  r.epochs = 2;
  r.best_val_loss = 0.5;
  r.final_lr = 1e-3;
  r.lr_trace = {1e-3, 1e-3};
  const std::string j = r.to_json();
  EXPECT_NE(j.find("\"epochs\":2"), std::string::npos);
  EXPECT_NE(j.find("lr_trace"), std::string::npos);
}

TEST(Evaluate, MemorizingHeadAndSingleSample) {
  // one-hot features, identity weights: predictions equal the labels
  ModelHead h(4, 4);
  h.params().setZero();
  h.out_weight() = Eigen::MatrixXd::Identity(4, 4) * 10.0;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_EQ(evaluate_top1(h, x, {0, 1, 2, 3}), 1.0);
  EXPECT_EQ(evaluate_top1(h, x.topRows(1), {0}), 1.0);
  EXPECT_EQ(evaluate_top1(h, x.topRows(1), {2}), 0.0);
  EXPECT_THROW(evaluate_top1(h, Eigen::MatrixXd(0, 4), {}), Error);
}

TEST(Evaluate, RandomHeadNearChance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 2000;
  Eigen::MatrixXd x(n, 16);
  std::vector<std::uint32_t> labels;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 16; ++j) x(i, j) = g(rng);
    labels.push_back(i % 10);
  }
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    ModelHead h(10, 16);
    h.init_random(s);
    mean += evaluate_top1(h, x, labels) / 5.0;
  }
  EXPECT_NEAR(mean, 0.1, 0.03);
}

}  // namespace
}  // namespace aln
