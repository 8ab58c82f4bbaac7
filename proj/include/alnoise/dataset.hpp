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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aln {

/// m x e matrix of final-block per-head attention vectors, stored row-major in
/// single precision to match the on-disk layout.
using AttentionMap = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureVec = Eigen::VectorXf;

using SampleId = std::uint64_t;

struct SampleRecord {
  SampleId id = 0;
  FeatureVec features;
  AttentionMap attention;
  std::uint32_t true_label = 0;
  /// Absent for unlabeled samples.
  std::optional<Eigen::VectorXf> label_dist;
};

struct DatasetBundle {
  std::uint32_t num_classes = 0;
  std::uint32_t heads = 0;      // m
  std::uint32_t embed_dim = 0;  // e
  std::uint32_t feature_dim = 0;  // d
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
  std::vector<SampleRecord> test;
  std::string manifest;
};

inline constexpr char kBundleMagic[4] = {'A', 'L', 'N', 'B'};
inline constexpr std::uint32_t kBundleVersion = 1;

/// Checks every bundle invariant; throws aln::Error on the first violation.
void validate_bundle(const DatasetBundle& bundle);

/// Sidecar path holding the free-form manifest: "d.alnb" -> "d.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& bundle_path);

DatasetBundle load_bundle(const std::filesystem::path& path);
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& path);

/// Serialized container bytes (without the manifest sidecar).
std::vector<std::uint8_t> encode_bundle(const DatasetBundle& bundle);
DatasetBundle decode_bundle(const std::vector<std::uint8_t>& bytes);

struct SyntheticConfig {
  std::uint32_t num_classes = 10;
  std::uint32_t n_train = 5000;
  std::uint32_t n_val = 1000;
  std::uint32_t n_test = 1000;
  std::uint32_t heads = 4;
  std::uint32_t embed_dim = 32;
  std::uint32_t feature_dim = 16;
  double cluster_sep = 4.0;
  double attention_noise = 0.5;
  std::uint64_t seed = 7;
};

/// Per class: features from a unit isotropic Gaussian around a class mean
/// (means pairwise at least cluster_sep apart) and attention maps equal to a
/// fixed class template plus N(0, attention_noise^2) noise.
DatasetBundle make_synthetic(const SyntheticConfig& cfg);

/// Uniform draw of k0 train ids without replacement, redrawn until every class
/// appears. Returned ids are sorted ascending.
std::vector<SampleId> draw_clean_seed(const DatasetBundle& bundle, std::size_t k0,
                                      std::uint64_t seed, int max_retries = 64);

}  // namespace aln
