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
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "alnoise/dataset.hpp"
#include "alnoise/numerics.hpp"

namespace aln {

struct FlipRecord {
  SampleId id;
  std::uint32_t clean;
  std::uint32_t issued;
};

/// Simulated annotator with symmetric label noise.
///
/// With probability 1 - r the true label is issued. Otherwise a class is drawn
/// uniformly from the C - 1 wrong classes, or from all C classes when
/// include_true_class is set (realized corruption rate r (C-1)/C).
///
/// Each answer is a pure function of (seed, sample id) and is committed on
/// first query: asking again returns the same label and does not log twice.
/// Not thread safe.
class NoisyOracle {
 public:
  NoisyOracle(double noise_rate, std::uint32_t num_classes, std::uint64_t seed,
              bool include_true_class = false);

  std::uint32_t label(const SampleRecord& sample);
  ProbVec label_as_onehot(const SampleRecord& sample);

  double noise_rate() const { return rate_; }
  std::uint32_t num_classes() const { return classes_; }
  const std::vector<FlipRecord>& flip_log() const { return log_; }

  /// CSV with header "id,clean,issued", one row per issued label in query order.
  void write_flip_log(std::ostream& out) const;
  void write_flip_log(const std::filesystem::path& path) const;

 private:
  double rate_;
  std::uint32_t classes_;
  std::uint64_t seed_;
  bool include_true_;
  std::vector<FlipRecord> log_;
  std::unordered_map<SampleId, std::uint32_t> committed_;
};

ProbVec one_hot(std::uint32_t cls, std::uint32_t num_classes);

}  // namespace aln
