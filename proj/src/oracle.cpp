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

#include "alnoise/oracle.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "alnoise/error.hpp"

namespace aln {

ProbVec one_hot(std::uint32_t cls, std::uint32_t num_classes) {
  if (cls >= num_classes) throw Error(ErrorCode::kInvalidArgument, "class index out of range");
  ProbVec p = ProbVec::Zero(num_classes);
  p(cls) = 1.0;
  return p;
}

NoisyOracle::NoisyOracle(double noise_rate, std::uint32_t num_classes, std::uint64_t seed,
                         bool include_true_class)
    : rate_(noise_rate), classes_(num_classes), seed_(seed), include_true_(include_true_class) {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise rate must be in [0,1]");
  }
  if (num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "oracle needs at least 2 classes");
}

std::uint32_t NoisyOracle::label(const SampleRecord& sample) {
  if (sample.true_label >= classes_) {
    throw Error(ErrorCode::kInvalidArgument, "sample label out of range");
  }
  if (auto it = committed_.find(sample.id); it != committed_.end()) return it->second;

  // A fresh engine per (seed, id) makes the answer independent of query order.
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(sample.id),
                    static_cast<std::uint32_t>(sample.id >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::uint32_t issued = sample.true_label;
  if (unit(rng) < rate_) {
    if (include_true_) {
      issued = std::uniform_int_distribution<std::uint32_t>(0, classes_ - 1)(rng);
    } else {
      // Uniform over the C - 1 other classes: draw from [0, C-2] and skip the
      // true class.
      std::uint32_t k = std::uniform_int_distribution<std::uint32_t>(0, classes_ - 2)(rng);
      issued = k >= sample.true_label ? k + 1 : k;
    }
  }
  committed_.emplace(sample.id, issued);
  log_.push_back({sample.id, sample.true_label, issued});
  return issued;
}

ProbVec NoisyOracle::label_as_onehot(const SampleRecord& sample) {
  return one_hot(label(sample), classes_);
}

void NoisyOracle::write_flip_log(std::ostream& out) const {
  out << "id,clean,issued\n";
  for (const auto& r : log_) out << r.id << ',' << r.clean << ',' << r.issued << '\n';
}

void NoisyOracle::write_flip_log(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_flip_log(out);
}

}  // namespace aln
