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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "alnoise/oracle.hpp"
#include "stats_util.hpp"

namespace aln {
namespace {

SampleRecord sample(SampleId id, std::uint32_t label) {
  SampleRecord s;
  s.id = id;
  s.true_label = label;
  return s;
}

TEST(Oracle, ZeroRateIsClean) {
  NoisyOracle o(0.0, 10, 1);
  for (SampleId i = 0; i < 1000; ++i) EXPECT_EQ(o.label(sample(i, i % 10)), i % 10);
}

TEST(Oracle, FullRateTwoClassesFlips) {
  NoisyOracle o(1.0, 2, 1);
  for (SampleId i = 0; i < 1000; ++i) {
    const std::uint32_t y = static_cast<std::uint32_t>(i % 2);
    EXPECT_EQ(o.label(sample(i, y)), 1 - y);
  }
}

TEST(Oracle, FlipFractionCalibrated) {
  NoisyOracle o(0.4, 10, 42);
  int flips = 0;
  for (SampleId i = 0; i < 100000; ++i) {
    if (o.label(sample(i, i % 10)) != i % 10) ++flips;
  }
  EXPECT_NEAR(flips / 100000.0, 0.4, 0.01);
}

TEST(Oracle, FlipDestinationsUniform) {
  NoisyOracle o(0.4, 10, 43);
  std::vector<double> offsets(9, 0.0);
  for (SampleId i = 0; i < 100000; ++i) {
    const std::uint32_t y = i % 10;
    const std::uint32_t z = o.label(sample(i, y));
    if (z != y) offsets[(z + 10 - y) % 10 - 1] += 1.0;
  }
  EXPECT_GT(testing::chi2_uniform_pvalue(offsets), 0.01);
}

TEST(Oracle, IncludeTrueClassLowersRealizedRate) {
  NoisyOracle o(0.5, 5, 3, true);
  int flips = 0;
  for (SampleId i = 0; i < 100000; ++i) {
    if (o.label(sample(i, 0)) != 0) ++flips;
  }
  EXPECT_NEAR(flips / 100000.0, 0.5 * 4.0 / 5.0, 0.01);
}

TEST(Oracle, CommitsOnFirstQuery) {
  NoisyOracle o(0.6, 10, 7);
  const SampleRecord s = sample(12, 4);
  const std::uint32_t a = o.label(s);
  for (int t = 0; t < 20; ++t) EXPECT_EQ(o.label(s), a);
  EXPECT_EQ(o.flip_log().size(), 1u);
  EXPECT_EQ(o.flip_log()[0].id, 12u);
  EXPECT_EQ(o.flip_log()[0].clean, 4u);
  EXPECT_EQ(o.flip_log()[0].issued, a);
}

TEST(Oracle, PureFunctionOfSeedAndId) {
  NoisyOracle a(0.6, 10, 7);
  NoisyOracle b(0.6, 10, 7);
  for (SampleId i = 0; i < 200; ++i) a.label(sample(i, i % 10));
  for (SampleId i = 200; i-- > 0;) {
    EXPECT_EQ(b.label(sample(i, i % 10)), a.label(sample(i, i % 10)));
  }
  NoisyOracle c(0.6, 10, 8);
  int differ = 0;
  for (SampleId i = 0; i < 200; ++i) differ += c.label(sample(i, i % 10)) != a.label(sample(i, i % 10));
  EXPECT_GT(differ, 0);
}

TEST(Oracle, OneHot) {
  NoisyOracle o(0.0, 10, 1);
  const ProbVec p = o.label_as_onehot(sample(0, 3));
  ProbVec expect = ProbVec::Zero(10);
  expect(3) = 1.0;
  EXPECT_EQ(p, expect);
  NoisyOracle two(0.0, 2, 1);
  EXPECT_EQ(two.label_as_onehot(sample(1, 0)), (ProbVec(2) << 1.0, 0.0).finished());
  NoisyOracle noisy(0.7, 6, 2);
  for (SampleId i = 0; i < 100; ++i) {
    EXPECT_DOUBLE_EQ(noisy.label_as_onehot(sample(i, i % 6)).sum(), 1.0);
  }
}

TEST(Oracle, RejectsBadArguments) {
  EXPECT_THROW(NoisyOracle(1.5, 10, 1), Error);
  EXPECT_THROW(NoisyOracle(-0.1, 10, 1), Error);
  EXPECT_THROW(NoisyOracle(0.1, 1, 1), Error);
  NoisyOracle o(0.1, 3, 1);
  EXPECT_THROW(o.label(sample(0, 3)), Error);
}

TEST(Oracle, FlipLogCsv) {
  NoisyOracle o(0.0, 3, 1);
  o.label(sample(5, 2));
  o.label(sample(1, 0));
  std::ostringstream out;
  o.write_flip_log(out);
  EXPECT_EQ(out.str(), "id,clean,issued\n5,2,2\n1,0,0\n");
  const auto path = std::filesystem::temp_directory_path() / "alnoise_flip_log.csv";
  o.write_flip_log(path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), out.str());
}

}  // namespace
}  // namespace aln
