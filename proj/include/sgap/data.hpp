#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sgap/error.hpp"
#include "sgap/model.hpp"
#include "sgap/rng.hpp"
#include "sgap/tensor.hpp"

namespace sgap {

struct Dataset {
  Tensor features;  // [N, d]
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string split;       // "train" or "test"
  std::string provenance;  // generator + seed, or file path + checksum

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return features.dim(1); }

  void validate() const {
    if (labels.empty()) throw DataError("dataset is empty");
    if (features.rank() != 2 || features.dim(0) != labels.size()) {
      throw DataError("dataset features " + shape_string(features.shape()) +
                      " do not match " + std::to_string(labels.size()) +
                      " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
        throw DataError("label " + std::to_string(labels[i]) + " at row " +
                        std::to_string(i) + " outside [0, " +
                        std::to_string(num_classes) + ")");
      }
    }
    if (!features.all_finite()) throw DataError("dataset has non-finite features");
  }
};

inline double eval_accuracy(const Model& model, const Dataset& data) {
  return eval_accuracy(model, data.features, data.labels);
}

enum class SyntheticKind { kGaussianBlobs, kSpirals };

inline std::string to_string(SyntheticKind kind) {
  return kind == SyntheticKind::kGaussianBlobs ? "blobs" : "spirals";
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kSpirals;
  std::size_t classes = 10;
  std::size_t samples = 5000;
  std::size_t dims = 16;
  // Blobs: distance between neighbouring unit-variance cluster centers.
  double separation = 10.0;
  // Spirals: arm turns over the unit radius, angular jitter (radians) and the
  // standard deviation of the d - 2 nuisance dimensions.
  double turns = 1.0;
  double angle_noise = 0.1;
  double extra_noise = 0.1;
};

namespace detail {

// K distinct centers with pairwise distance >= separation. Up to 2d classes
// sit on +-axes; more than that go on a circle in the first two dimensions.
inline std::vector<std::vector<double>> blob_centers(std::size_t classes,
                                                     std::size_t dims,
                                                     double separation) {
  std::vector<std::vector<double>> centers(classes,
                                           std::vector<double>(dims, 0.0));
  if (classes <= 2 * dims) {
    const double r = separation / std::sqrt(2.0);
    for (std::size_t k = 0; k < classes; ++k) {
      centers[k][k % dims] = (k < dims ? 1.0 : -1.0) * r;
    }
  } else {
    const double r =
        separation / (2.0 * std::sin(M_PI / static_cast<double>(classes)));
    for (std::size_t k = 0; k < classes; ++k) {
      const double a = 2.0 * M_PI * static_cast<double>(k) /
                       static_cast<double>(classes);
      centers[k][0] = r * std::cos(a);
      centers[k][1] = r * std::sin(a);
    }
  }
  return centers;
}

}  // namespace detail

// Deterministic given the seed. Row i has label i % K, so classes are
// balanced to within one sample.
inline Dataset generate_synthetic(const SyntheticSpec& spec,
                                  std::uint64_t seed) {
  const std::size_t K = spec.classes;
  const std::size_t N = spec.samples;
  const std::size_t d = spec.dims;
  if (K < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (N < K) throw ConfigError("synthetic data needs at least one sample per class");
  if (d < 2) throw ConfigError("synthetic data needs at least 2 dimensions");

  Rng rng(seed);
  Dataset out;
  out.features = Tensor({N, d});
  out.labels.resize(N);
  out.num_classes = K;

  if (spec.kind == SyntheticKind::kGaussianBlobs) {
    const auto centers = detail::blob_centers(K, d, spec.separation);
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t k = i % K;
      out.labels[i] = static_cast<int>(k);
      for (std::size_t j = 0; j < d; ++j) {
        out.features.at(i, j) =
            static_cast<float>(centers[k][j] + rng.normal());
      }
    }
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t k = i % K;
      out.labels[i] = static_cast<int>(k);
      const double t = rng.uniform_double();
      const double radius = 0.1 + 0.9 * t;
      const double angle = 2.0 * M_PI * static_cast<double>(k) /
                               static_cast<double>(K) +
                           2.0 * M_PI * spec.turns * t +
                           spec.angle_noise * rng.normal();
      out.features.at(i, 0) = static_cast<float>(radius * std::cos(angle));
      out.features.at(i, 1) = static_cast<float>(radius * std::sin(angle));
      for (std::size_t j = 2; j < d; ++j) {
        out.features.at(i, j) = static_cast<float>(spec.extra_noise * rng.normal());
      }
    }
  }
  out.provenance = to_string(spec.kind) + "(k=" + std::to_string(K) +
                   ",n=" + std::to_string(N) + ",d=" + std::to_string(d) +
                   ",seed=" + std::to_string(seed) + ")";
  return out;
}

inline void write_csv(const Dataset& data, std::ostream& os) {
  const std::size_t d = data.dims();
  for (std::size_t j = 0; j < d; ++j) os << 'f' << j << ',';
  os << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", data.features.at(i, j));
      os << buf << ',';
    }
    os << data.labels[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches: 10000 records of 1 label byte followed by 3072
// pixel bytes (R, G, B planes of 32x32, row-major within a plane).

namespace cifar {
inline constexpr std::size_t kRecordBytes = 3073;
inline constexpr std::size_t kPixelBytes = 3072;
inline constexpr std::size_t kRecordsPerFile = 10000;
inline constexpr std::size_t kFileBytes = kRecordBytes * kRecordsPerFile;
inline constexpr std::size_t kClasses = 10;
inline constexpr std::size_t kPlane = 1024;
}  // namespace cifar

// Parses records from an in-memory batch. The byte count must equal
// records * 3073 exactly.
inline Dataset parse_cifar10_batch(std::span<const std::uint8_t> bytes,
                                   std::size_t records,
                                   const std::string& source = "<memory>") {
  const std::size_t expected = records * cifar::kRecordBytes;
  if (bytes.size() != expected) {
    throw DataError(source + ": expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  Dataset out;
  out.num_classes = cifar::kClasses;
  out.features = Tensor({records, cifar::kPixelBytes});
  out.labels.resize(records);
  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t offset = r * cifar::kRecordBytes;
    const std::uint8_t label = bytes[offset];
    if (label >= cifar::kClasses) {
      throw DataError(source + ": label byte " + std::to_string(label) +
                      " > 9 at byte offset " + std::to_string(offset));
    }
    out.labels[r] = label;
    auto row = out.features.row(r);
    for (std::size_t p = 0; p < cifar::kPixelBytes; ++p) {
      row[p] = static_cast<float>(bytes[offset + 1 + p]) / 255.0f;
    }
  }
  for (std::uint8_t b : bytes) {
    checksum ^= b;
    checksum *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(checksum));
  out.provenance = source + "#fnv1a64=" + hex;
  return out;
}

inline Dataset load_cifar10_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() != cifar::kFileBytes) {
    throw DataError(path.string() + ": expected " +
                    std::to_string(cifar::kFileBytes) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  return parse_cifar10_batch(bytes, cifar::kRecordsPerFile, path.string());
}

struct CifarSplits {
  Dataset train;
  Dataset test;
};

// Per-channel standardization using statistics of `reference`.
inline void standardize_channels(const Dataset& reference,
                                 std::span<Dataset* const> targets) {
  double mean[3] = {0, 0, 0};
  double sq[3] = {0, 0, 0};
  const std::size_t n = reference.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = reference.features.row(i);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < cifar::kPlane; ++p) {
        const double x = row[c * cifar::kPlane + p];
        mean[c] += x;
        sq[c] += x * x;
      }
    }
  }
  float m[3], s[3];
  const double count = static_cast<double>(n * cifar::kPlane);
  for (std::size_t c = 0; c < 3; ++c) {
    const double mu = mean[c] / count;
    const double var = std::max(0.0, sq[c] / count - mu * mu);
    m[c] = static_cast<float>(mu);
    s[c] = static_cast<float>(var > 0.0 ? std::sqrt(var) : 1.0);
  }
  for (Dataset* ds : targets) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      auto row = ds->features.row(i);
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t p = 0; p < cifar::kPlane; ++p) {
          float& x = row[c * cifar::kPlane + p];
          x = (x - m[c]) / s[c];
        }
      }
    }
  }
}

// Reads data_batch_1..5.bin and test_batch.bin from `dir`.
inline CifarSplits load_cifar10(const std::filesystem::path& dir,
                                bool standardize = false) {
  CifarSplits out;
  std::vector<float> features;
  std::vector<int> labels;
  std::string provenance;
  for (int b = 1; b <= 5; ++b) {
    const auto path = dir / ("data_batch_" + std::to_string(b) + ".bin");
    Dataset part = load_cifar10_file(path);
    features.insert(features.end(), part.features.data().begin(),
                    part.features.data().end());
    labels.insert(labels.end(), part.labels.begin(), part.labels.end());
    provenance += (provenance.empty() ? "" : ";") + part.provenance;
  }
  const std::size_t n = labels.size();
  out.train.features = Tensor({n, cifar::kPixelBytes}, std::move(features));
  out.train.labels = std::move(labels);
  out.train.num_classes = cifar::kClasses;
  out.train.split = "train";
  out.train.provenance = provenance;

  out.test = load_cifar10_file(dir / "test_batch.bin");
  out.test.split = "test";

  if (standardize) {
    Dataset* targets[] = {&out.train, &out.test};
    standardize_channels(out.train, targets);
  }
  return out;
}

}  // namespace sgap
