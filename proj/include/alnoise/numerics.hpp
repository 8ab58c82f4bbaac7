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

// Numerically stable primitives shared by the scoring and training code.
//
// All logarithms are natural logarithms, so entropy lives in [0, ln C].
// 0 * log 0 is taken as 0.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

#include "alnoise/error.hpp"

namespace aln {

using ProbVec = Eigen::VectorXd;
using ScoreVec = Eigen::VectorXd;

inline constexpr double kProbSumTolerance = 1e-9;

/// Throws kInvalidProbVec unless every entry is in [0,1] and the entries sum
/// to one within kProbSumTolerance.
template <typename Derived>
void check_prob_vec(const Eigen::MatrixBase<Derived>& p) {
  if (p.size() == 0) throw Error(ErrorCode::kInvalidProbVec, "empty probability vector");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = static_cast<double>(p(i));
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::kInvalidProbVec, "probability entry out of [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw Error(ErrorCode::kInvalidProbVec, "probabilities do not sum to 1");
  }
}

template <typename Derived>
ProbVec stable_softmax(const Eigen::MatrixBase<Derived>& logits) {
  if (logits.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty logits");
  Eigen::VectorXd z = logits.template cast<double>();
  if (!z.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite logits");
  const double mx = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - mx).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
double entropy(const Eigen::MatrixBase<Derived>& p) {
  check_prob_vec(p);
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = static_cast<double>(p(i));
    if (v > 0.0) h -= v * std::log(v);
  }
  return h < 0.0 ? 0.0 : h;
}

/// Top-1 minus top-2 probability.
template <typename Derived>
double margin(const Eigen::MatrixBase<Derived>& p) {
  if (p.size() < 2) throw Error(ErrorCode::kInvalidArgument, "margin needs at least 2 classes");
  check_prob_vec(p);
  double first = -1.0;
  double second = -1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = static_cast<double>(p(i));
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

/// Index of the maximum; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax_tiebreak(const Eigen::DenseBase<Derived>& v) {
  if (v.size() == 0) throw Error(ErrorCode::kInvalidArgument, "argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v.derived().coeff(i) > v.derived().coeff(best)) best = i;
  }
  return best;
}

/// Frobenius norm of the elementwise difference, accumulated in double
/// regardless of the storage scalar.
template <typename DerivedA, typename DerivedB>
double frobenius_distance(const Eigen::MatrixBase<DerivedA>& a,
                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "attention shape mismatch");
  }
  return (a.template cast<double>() - b.template cast<double>()).norm();
}

}  // namespace aln
