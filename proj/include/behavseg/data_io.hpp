/* Copyright 2026 The behavseg Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace behavseg::data {

using Matrix = Eigen::MatrixXd;
using Labels = Eigen::VectorXi;
using Index = Eigen::Index;

// Frames without an observed class carry this label.
inline constexpr int kUnlabeled = -1;

// One recording: a [T x D] observation matrix with per-frame labels.
struct FeatureSequence {
  std::string id;
  Matrix features;
  double sample_rate_hz = 1.0;
  Labels labels;

  Index length() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  Index labeled_count() const;
  // Checks shape, finiteness and the label range. `n_classes` <= 0 only
  // checks that labels are >= -1.
  void validate(int n_classes = 0) const;
};

struct DatasetSplit {
  std::vector<FeatureSequence> train;
  std::vector<FeatureSequence> test;
  int n_classes = 0;

  void validate() const;
};

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;

  Matrix apply(const Matrix& x) const;
  Matrix inverse(const Matrix& x) const;
};

inline constexpr double kStdFloor = 1e-8;

Matrix read_feature_csv(const std::filesystem::path& path, bool header = false);
Labels read_label_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
void write_label_csv(const std::filesystem::path& path, const Labels& labels);

struct LoadOptions {
  bool header = false;
  int n_classes = 0;
  double sample_rate_hz = 1.0;
  std::string id;
};

// A missing labels file means every frame is unlabeled.
FeatureSequence load_sequence(
    const std::filesystem::path& features_path,
    const std::optional<std::filesystem::path>& labels_path,
    const LoadOptions& options = {});

// [x_t, x_t - x_{t-1}] with a zero velocity at t = 0.
Matrix position_velocity(const Matrix& x);

Standardizer fit_standardizer(std::span<const FeatureSequence> train);
Matrix apply_standardizer(const Standardizer& s, const Matrix& x);

// Smallest number of principal components whose cumulative explained variance
// ratio reaches `variance_threshold`. Returns 1 for zero-variance input.
int select_latent_dim(const Matrix& train_features,
                      double variance_threshold = 0.95);

// Keeps labels on `n_videos` randomly chosen sequences and clears the rest.
std::vector<FeatureSequence> subsample_labeled_videos(
    std::vector<FeatureSequence> train, int n_videos, std::uint64_t seed);

// Keeps each observed label independently with probability `fraction`.
std::vector<FeatureSequence> subsample_labeled_frames(
    std::vector<FeatureSequence> train, double fraction, std::uint64_t seed);

Matrix concat_features(std::span<const FeatureSequence> seqs);

enum FrameKind : int { kPadded = 0, kUnlabeledFrame = 1, kLabeledFrame = 2 };

struct WindowRef {
  std::size_t sequence = 0;
  Index start = 0;
  Index valid = 0;  // number of real frames; the rest are padding
};

struct Batch {
  std::vector<Matrix> features;  // B entries, each [window x D]
  Eigen::MatrixXi labels;        // [B x window]; -1 on unlabeled and padding
  Eigen::MatrixXi mask;          // [B x window] of FrameKind
  std::vector<WindowRef> windows;

  Index size() const { return static_cast<Index>(features.size()); }
};

// Tiles every sequence into windows starting at multiples of `window`, pads the
// last partial window, shuffles all windows with `seed` and groups them into
// batches of `batch_size` (the final batch may be smaller).
std::vector<Batch> make_batches(std::span<const FeatureSequence> train,
                                int batch_size, int window, std::uint64_t seed);

// Dataset manifest (key-value text):
//   n_classes = 3
//   sample_rate_hz = 30          (default for all sequences)
//   header = false               (feature CSVs carry a header row)
//   sequence.<id>.features = path
//   sequence.<id>.labels = path  (optional)
//   sequence.<id>.split = train | test
//   sequence.<id>.sample_rate_hz = 30  (optional)
// Relative paths resolve against the manifest's directory.
DatasetSplit load_manifest(const std::filesystem::path& path,
                           std::optional<bool> header = std::nullopt);

}  // namespace behavseg::data
