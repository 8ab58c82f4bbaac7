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

#include "alnoise/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <unordered_set>

#include "json.hpp"

#include "alnoise/error.hpp"

namespace aln {

namespace {

// Little-endian writer/reader independent of host byte order.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::kTruncated, "unexpected end of payload");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

void write_split(ByteWriter& w, const std::vector<SampleRecord>& split) {
  for (const auto& s : split) {
    w.u64(s.id);
    w.u32(s.true_label);
    for (Eigen::Index i = 0; i < s.features.size(); ++i) w.f32(s.features(i));
    // AttentionMap is row-major, so data() is already in file order.
    for (Eigen::Index i = 0; i < s.attention.size(); ++i) w.f32(s.attention.data()[i]);
    w.u8(s.label_dist ? 1 : 0);
    if (s.label_dist) {
      for (Eigen::Index i = 0; i < s.label_dist->size(); ++i) w.f32((*s.label_dist)(i));
    }
  }
}

std::vector<SampleRecord> read_split(ByteReader& r, std::uint32_t n, const DatasetBundle& b) {
  std::vector<SampleRecord> split;
  split.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    SampleRecord s;
    s.id = r.u64();
    s.true_label = r.u32();
    s.features.resize(b.feature_dim);
    for (std::uint32_t i = 0; i < b.feature_dim; ++i) s.features(i) = r.f32();
    s.attention.resize(b.heads, b.embed_dim);
    for (Eigen::Index i = 0; i < s.attention.size(); ++i) s.attention.data()[i] = r.f32();
    const std::uint8_t has = r.u8();
    if (has > 1) throw Error(ErrorCode::kInvalidArgument, "bad has_label_dist flag");
    if (has == 1) {
      Eigen::VectorXf dist(b.num_classes);
      for (std::uint32_t i = 0; i < b.num_classes; ++i) dist(i) = r.f32();
      s.label_dist = std::move(dist);
    }
    split.push_back(std::move(s));
  }
  return split;
}

void validate_split(const std::vector<SampleRecord>& split, const DatasetBundle& b,
                    std::unordered_set<SampleId>& seen) {
  if (split.empty()) throw Error(ErrorCode::kEmptySplit, "empty split");
  for (const auto& s : split) {
    if (!seen.insert(s.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate sample id " + std::to_string(s.id));
    }
    if (s.true_label >= b.num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label out of range at sample " + std::to_string(s.id));
    }
    if (s.features.size() != b.feature_dim || s.attention.rows() != b.heads ||
        s.attention.cols() != b.embed_dim) {
      throw Error(ErrorCode::kShapeMismatch, "shape mismatch at sample " + std::to_string(s.id));
    }
    if (!s.features.allFinite() || !s.attention.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "non-finite value at sample " + std::to_string(s.id));
    }
    if (s.label_dist) {
      const auto& p = *s.label_dist;
      if (p.size() != b.num_classes || !p.allFinite()) {
        throw Error(ErrorCode::kInvalidProbVec,
                    "invalid label distribution at sample " + std::to_string(s.id));
      }
      // Stored in single precision, so the sum tolerance is float-scale.
      const double sum = p.cast<double>().sum();
      if ((p.array() < 0.0f).any() || (p.array() > 1.0f).any() || std::abs(sum - 1.0) > 1e-5) {
        throw Error(ErrorCode::kInvalidProbVec,
                    "invalid label distribution at sample " + std::to_string(s.id));
      }
    }
  }
}

}  // namespace

void validate_bundle(const DatasetBundle& b) {
  if (b.num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 classes");
  if (b.heads < 1 || b.embed_dim < 1 || b.feature_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");
  }
  std::unordered_set<SampleId> seen;
  validate_split(b.train, b, seen);
  validate_split(b.val, b, seen);
  validate_split(b.test, b, seen);
  std::vector<bool> present(b.num_classes, false);
  for (const auto& s : b.train) present[s.true_label] = true;
  for (std::uint32_t c = 0; c < b.num_classes; ++c) {
    if (!present[c]) {
      throw Error(ErrorCode::kMissingClass, "class " + std::to_string(c) + " absent from train");
    }
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& bundle_path) {
  auto p = bundle_path;
  p.replace_extension(".manifest.json");
  return p;
}

std::vector<std::uint8_t> encode_bundle(const DatasetBundle& b) {
  validate_bundle(b);
  ByteWriter w;
  w.raw(kBundleMagic, 4);
  w.u32(kBundleVersion);
  w.u32(b.num_classes);
  w.u32(b.heads);
  w.u32(b.embed_dim);
  w.u32(b.feature_dim);
  w.u32(static_cast<std::uint32_t>(b.train.size()));
  w.u32(static_cast<std::uint32_t>(b.val.size()));
  w.u32(static_cast<std::uint32_t>(b.test.size()));
  write_split(w, b.train);
  write_split(w, b.val);
  write_split(w, b.test);
  return w.take();
}

DatasetBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kBundleMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "bad magic");
  }
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw Error(ErrorCode::kBadVersion, "unsupported version " + std::to_string(version));
  }
  DatasetBundle b;
  b.num_classes = r.u32();
  b.heads = r.u32();
  b.embed_dim = r.u32();
  b.feature_dim = r.u32();
  const std::uint32_t n_train = r.u32();
  const std::uint32_t n_val = r.u32();
  const std::uint32_t n_test = r.u32();
  // Reject absurd headers before allocating.
  const std::uint64_t per_sample_min =
      8 + 4 + 4ull * b.feature_dim + 4ull * b.heads * b.embed_dim + 1;
  if (per_sample_min * (static_cast<std::uint64_t>(n_train) + n_val + n_test) > r.remaining()) {
    throw Error(ErrorCode::kTruncated, "unexpected end of payload");
  }
  b.train = read_split(r, n_train, b);
  b.val = read_split(r, n_val, b);
  b.test = read_split(r, n_test, b);
  if (r.remaining() != 0) throw Error(ErrorCode::kInvalidArgument, "trailing bytes after payload");
  validate_bundle(b);
  return b;
}

DatasetBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  DatasetBundle b = decode_bundle(bytes);
  std::ifstream mf(manifest_path(path), std::ios::binary);
  if (mf) b.manifest.assign(std::istreambuf_iterator<char>(mf), std::istreambuf_iterator<char>());
  return b;
}

void save_bundle(const DatasetBundle& b, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(b);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
  std::ofstream mf(manifest_path(path), std::ios::binary | std::ios::trunc);
  if (!mf) throw Error(ErrorCode::kIo, "cannot write manifest for " + path.string());
  mf << b.manifest;
}

DatasetBundle make_synthetic(const SyntheticConfig& cfg) {
  const std::uint32_t C = cfg.num_classes;
  if (C < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 classes");
  if (cfg.n_train < C || cfg.n_val < C || cfg.n_test < C) {
    throw Error(ErrorCode::kInvalidArgument, "split sizes must be at least the class count");
  }
  if (cfg.heads < 1 || cfg.embed_dim < 1 || cfg.feature_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");
  }
  if (!(cfg.cluster_sep > 0.0) || !std::isfinite(cfg.cluster_sep)) {
    throw Error(ErrorCode::kInvalidArgument, "cluster_sep must be positive");
  }
  if (!(cfg.attention_noise >= 0.0) || !std::isfinite(cfg.attention_noise)) {
    throw Error(ErrorCode::kInvalidArgument, "attention_noise must be nonnegative");
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::uint32_t d = cfg.feature_dim;

  // Class means. With d >= C scaled basis vectors give exactly cluster_sep
  // pairwise; otherwise rejection-sample Gaussian points, widening on failure.
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(C, d);
  if (d >= C) {
    for (std::uint32_t c = 0; c < C; ++c) means(c, c) = cfg.cluster_sep / std::sqrt(2.0);
  } else {
    double scale = cfg.cluster_sep;
    for (int attempt = 0;; ++attempt) {
      for (std::uint32_t c = 0; c < C; ++c)
        for (std::uint32_t j = 0; j < d; ++j) means(c, j) = scale * normal(rng);
      bool ok = true;
      for (std::uint32_t a = 0; a < C && ok; ++a)
        for (std::uint32_t b = a + 1; b < C && ok; ++b)
          ok = (means.row(a) - means.row(b)).norm() >= cfg.cluster_sep;
      if (ok) break;
      if (attempt % 100 == 99) scale *= 1.1;
    }
  }

  std::vector<AttentionMap> templates(C, AttentionMap(cfg.heads, cfg.embed_dim));
  for (auto& t : templates)
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(normal(rng));

  DatasetBundle b;
  b.num_classes = C;
  b.heads = cfg.heads;
  b.embed_dim = cfg.embed_dim;
  b.feature_dim = d;

  SampleId next_id = 0;
  auto make_split = [&](std::uint32_t n) {
    std::vector<std::uint32_t> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = i % C;
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<SampleRecord> split(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto& s = split[i];
      s.id = next_id++;
      s.true_label = labels[i];
      s.features.resize(d);
      for (std::uint32_t j = 0; j < d; ++j) {
        s.features(j) = static_cast<float>(means(labels[i], j) + normal(rng));
      }
      s.attention = templates[labels[i]];
      if (cfg.attention_noise > 0.0) {
        for (Eigen::Index k = 0; k < s.attention.size(); ++k) {
          s.attention.data()[k] += static_cast<float>(cfg.attention_noise * normal(rng));
        }
      }
    }
    return split;
  };
  b.train = make_split(cfg.n_train);
  b.val = make_split(cfg.n_val);
  b.test = make_split(cfg.n_test);

  nlohmann::ordered_json manifest = {
      {"generator", "synthetic"},
      {"classes", C},
      {"n_train", cfg.n_train},
      {"n_val", cfg.n_val},
      {"n_test", cfg.n_test},
      {"heads", cfg.heads},
      {"embed_dim", cfg.embed_dim},
      {"feature_dim", d},
      {"cluster_sep", cfg.cluster_sep},
      {"attention_noise", cfg.attention_noise},
      {"seed", cfg.seed},
  };
  b.manifest = manifest.dump(2) + "\n";
  return b;
}

std::vector<SampleId> draw_clean_seed(const DatasetBundle& bundle, std::size_t k0,
                                      std::uint64_t seed, int max_retries) {
  const std::size_t n = bundle.train.size();
  if (k0 > n) throw Error(ErrorCode::kInvalidArgument, "clean seed larger than train split");
  if (k0 < bundle.num_classes) throw Error(ErrorCode::kCoverage, "cannot cover all classes");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k0 slots hold the draw.
    for (std::size_t i = 0; i < k0; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<bool> present(bundle.num_classes, false);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < k0; ++i) {
      const auto c = bundle.train[idx[i]].true_label;
      if (!present[c]) {
        present[c] = true;
        ++covered;
      }
    }
    if (covered == bundle.num_classes) {
      std::vector<SampleId> ids;
      ids.reserve(k0);
      for (std::size_t i = 0; i < k0; ++i) ids.push_back(bundle.train[idx[i]].id);
      std::sort(ids.begin(), ids.end());
      return ids;
    }
  }
  throw Error(ErrorCode::kCoverage, "cannot cover all classes");
}

}  // namespace aln
