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

#include "behavseg/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "behavseg/config.hpp"
#include "behavseg/random.hpp"

namespace behavseg::data {

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view cell, const std::filesystem::path& path,
                  std::size_t row, std::size_t col) {
  cell = trim_view(cell);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw std::invalid_argument(path.string() + ": row " + std::to_string(row) +
                                ", column " + std::to_string(col) +
                                ": non-numeric cell '" + std::string(cell) + "'");
  }
  return v;
}

void write_double(std::ostream& out, double v) { out << format_double(v); }

}  // namespace

Index FeatureSequence::labeled_count() const {
  return (labels.array() != kUnlabeled).count();
}

void FeatureSequence::validate(int n_classes) const {
  if (features.rows() < 1 || features.cols() < 1) {
    throw std::invalid_argument("sequence '" + id + "': empty feature matrix");
  }
  if (!features.allFinite()) {
    throw std::invalid_argument("sequence '" + id + "': non-finite feature value");
  }
  if (labels.size() != features.rows()) {
    throw std::invalid_argument("sequence '" + id + "': " +
                                std::to_string(labels.size()) + " labels for " +
                                std::to_string(features.rows()) + " frames");
  }
  if (!(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("sequence '" + id + "': sample rate must be > 0");
  }
  for (Index t = 0; t < labels.size(); ++t) {
    const int y = labels[t];
    if (y < kUnlabeled || (n_classes > 0 && y >= n_classes)) {
      throw std::invalid_argument("sequence '" + id + "': label " +
                                  std::to_string(y) + " at frame " +
                                  std::to_string(t) + " outside {-1, 0.." +
                                  std::to_string(n_classes - 1) + "}");
    }
  }
}

void DatasetSplit::validate() const {
  if (n_classes < 2) throw std::invalid_argument("dataset needs n_classes >= 2");
  std::set<std::string> ids;
  for (const auto& s : train) {
    s.validate(n_classes);
    ids.insert(s.id);
  }
  for (const auto& s : test) {
    s.validate(n_classes);
    if (ids.count(s.id)) {
      throw std::invalid_argument("sequence '" + s.id + "' is in both splits");
    }
  }
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    throw std::invalid_argument("standardizer: feature dimension mismatch");
  }
  return ((x.rowwise() - mean).array().rowwise() / std.array()).matrix();
}

Matrix Standardizer::inverse(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    throw std::invalid_argument("standardizer: feature dimension mismatch");
  }
  return ((x.array().rowwise() * std.array()).matrix().rowwise() + mean);
}

Matrix read_feature_csv(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  std::vector<double> values;
  std::size_t ncols = 0, nrows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (header && lineno == 1) continue;
    if (trim_view(line).empty()) continue;
    std::size_t col = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_real(rest.substr(0, comma), path, lineno, col + 1));
      ++col;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (nrows == 0) {
      ncols = col;
    } else if (col != ncols) {
      throw std::invalid_argument(path.string() + ": row " +
                                  std::to_string(lineno) + " has " +
                                  std::to_string(col) + " columns, expected " +
                                  std::to_string(ncols));
    }
    ++nrows;
  }
  if (nrows == 0) throw std::invalid_argument(path.string() + ": no data rows");
  Matrix out(nrows, ncols);
  for (std::size_t i = 0; i < nrows; ++i)
    for (std::size_t j = 0; j < ncols; ++j) out(i, j) = values[i * ncols + j];
  return out;
}

Labels read_label_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file " + path.string());
  std::vector<int> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cell = trim_view(line);
    if (cell.empty()) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw std::invalid_argument(path.string() + ": row " +
                                  std::to_string(lineno) +
                                  ": non-integer label '" + std::string(cell) +
                                  "'");
    }
    values.push_back(v);
  }
  return Eigen::Map<Labels>(values.data(), static_cast<Index>(values.size()));
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      write_double(out, m(i, j));
    }
    out << '\n';
  }
}

void write_label_csv(const std::filesystem::path& path, const Labels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Index i = 0; i < labels.size(); ++i) out << labels[i] << '\n';
}

FeatureSequence load_sequence(
    const std::filesystem::path& features_path,
    const std::optional<std::filesystem::path>& labels_path,
    const LoadOptions& options) {
  FeatureSequence seq;
  seq.id = options.id.empty() ? features_path.stem().string() : options.id;
  seq.sample_rate_hz = options.sample_rate_hz;
  seq.features = read_feature_csv(features_path, options.header);
  if (labels_path) {
    seq.labels = read_label_csv(*labels_path);
    if (seq.labels.size() != seq.features.rows()) {
      throw std::invalid_argument(
          "row-count mismatch: " + labels_path->string() + " has " +
          std::to_string(seq.labels.size()) + " rows, " +
          features_path.string() + " has " +
          std::to_string(seq.features.rows()));
    }
  } else {
    seq.labels = Labels::Constant(seq.features.rows(), kUnlabeled);
  }
  seq.validate(options.n_classes);
  return seq;
}

Matrix position_velocity(const Matrix& x) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw std::invalid_argument("position_velocity: empty input");
  }
  const Index T = x.rows(), D = x.cols();
  Matrix out(T, 2 * D);
  out.leftCols(D) = x;
  out.row(0).tail(D).setZero();
  if (T > 1) {
    out.bottomRightCorner(T - 1, D) = x.bottomRows(T - 1) - x.topRows(T - 1);
  }
  return out;
}

Standardizer fit_standardizer(std::span<const FeatureSequence> train) {
  Index frames = 0;
  Index dim = -1;
  for (const auto& s : train) {
    if (dim >= 0 && s.dim() != dim) {
      throw std::invalid_argument("fit_standardizer: inconsistent feature dims");
    }
    dim = s.dim();
    frames += s.length();
  }
  if (frames == 0) throw std::invalid_argument("fit_standardizer: no training frames");
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(dim);
  for (const auto& s : train) mean += s.features.colwise().sum();
  mean /= static_cast<double>(frames);
  Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(dim);
  for (const auto& s : train)
    var += (s.features.rowwise() - mean).array().square().colwise().sum().matrix();
  var /= static_cast<double>(frames);
  Standardizer out;
  out.mean = mean;
  out.std = var.array().sqrt().max(kStdFloor).matrix();
  return out;
}

Matrix apply_standardizer(const Standardizer& s, const Matrix& x) {
  return s.apply(x);
}

int select_latent_dim(const Matrix& train_features, double variance_threshold) {
  if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
    throw std::invalid_argument("select_latent_dim: threshold must be in (0, 1]");
  }
  const Index D = train_features.cols();
  if (train_features.rows() < 1 || D < 1) {
    throw std::invalid_argument("select_latent_dim: empty input");
  }
  Matrix centered = train_features.rowwise() - train_features.colwise().mean();
  Matrix cov = centered.transpose() * centered /
               static_cast<double>(train_features.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = eig.eigenvalues().reverse().cwiseMax(0.0);
  const double total = ev.sum();
  if (!(total > 0.0)) return 1;
  double cum = 0.0;
  for (Index i = 0; i < D; ++i) {
    cum += ev[i];
    if (cum / total >= variance_threshold - 1e-12) return static_cast<int>(i + 1);
  }
  return static_cast<int>(D);
}

std::vector<FeatureSequence> subsample_labeled_videos(
    std::vector<FeatureSequence> train, int n_videos, std::uint64_t seed) {
  if (n_videos < 1 || n_videos > static_cast<int>(train.size())) {
    throw std::invalid_argument("subsample_labeled_videos: n_videos=" +
                                std::to_string(n_videos) + " outside [1, " +
                                std::to_string(train.size()) + "]");
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x5ab5ULL}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> keep(train.size(), false);
  for (int i = 0; i < n_videos; ++i) keep[order[i]] = true;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!keep[i]) train[i].labels.setConstant(kUnlabeled);
  }
  return train;
}

std::vector<FeatureSequence> subsample_labeled_frames(
    std::vector<FeatureSequence> train, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("subsample_labeled_frames: fraction outside [0, 1]");
  }
  Rng rng(derive_seed(seed, {0xf4a3ULL}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto& s : train) {
    for (Index t = 0; t < s.labels.size(); ++t) {
      const bool keep = unif(rng) < fraction;
      if (!keep) s.labels[t] = kUnlabeled;
    }
  }
  return train;
}

Matrix concat_features(std::span<const FeatureSequence> seqs) {
  Index rows = 0;
  for (const auto& s : seqs) rows += s.length();
  if (rows == 0) return Matrix();
  Matrix out(rows, seqs.front().dim());
  Index off = 0;
  for (const auto& s : seqs) {
    out.middleRows(off, s.length()) = s.features;
    off += s.length();
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const FeatureSequence> train,
                                int batch_size, int window, std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("make_batches: empty training set");
  if (batch_size < 1 || window < 1) {
    throw std::invalid_argument("make_batches: batch_size and window must be >= 1");
  }
  std::vector<WindowRef> refs;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Index T = train[i].length();
    for (Index start = 0; start < T; start += window) {
      refs.push_back({i, start, std::min<Index>(window, T - start)});
    }
  }
  Rng rng(derive_seed(seed, {0xba7cULL}));
  std::shuffle(refs.begin(), refs.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t first = 0; first < refs.size(); first += batch_size) {
    const std::size_t last = std::min(refs.size(), first + batch_size);
    const Index B = static_cast<Index>(last - first);
    Batch batch;
    batch.labels = Eigen::MatrixXi::Constant(B, window, kUnlabeled);
    batch.mask = Eigen::MatrixXi::Constant(B, window, kPadded);
    for (Index b = 0; b < B; ++b) {
      const WindowRef& ref = refs[first + b];
      const FeatureSequence& seq = train[ref.sequence];
      Matrix f = Matrix::Zero(window, seq.dim());
      f.topRows(ref.valid) = seq.features.middleRows(ref.start, ref.valid);
      for (Index t = 0; t < ref.valid; ++t) {
        const int y = seq.labels[ref.start + t];
        batch.labels(b, t) = y;
        batch.mask(b, t) = y == kUnlabeled ? kUnlabeledFrame : kLabeledFrame;
      }
      batch.features.push_back(std::move(f));
      batch.windows.push_back(ref);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

DatasetSplit load_manifest(const std::filesystem::path& path,
                           std::optional<bool> header) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("manifest not found: " + path.string());
  }
  const KeyValueConfig cfg = KeyValueConfig::load(path);
  const auto base = path.parent_path();
  DatasetSplit split;
  split.n_classes = static_cast<int>(cfg.get_int("n_classes"));
  const double default_rate = cfg.get_double_or("sample_rate_hz", 1.0);
  const bool use_header = header.value_or(cfg.get_bool_or("header", false));

  std::set<std::string> ids;
  for (const auto& [key, value] : cfg.entries()) {
    if (key == "n_classes" || key == "sample_rate_hz" || key == "header") continue;
    const std::string prefix = "sequence.";
    const auto dot = key.rfind('.');
    if (key.compare(0, prefix.size(), prefix) != 0 || dot <= prefix.size()) {
      throw std::invalid_argument(path.string() + ": unknown key '" + key + "'");
    }
    const std::string field = key.substr(dot + 1);
    if (field != "features" && field != "labels" && field != "split" &&
        field != "sample_rate_hz") {
      throw std::invalid_argument(path.string() + ": unknown key '" + key + "'");
    }
    ids.insert(key.substr(prefix.size(), dot - prefix.size()));
  }

  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  for (const auto& id : ids) {
    const std::string prefix = "sequence." + id + ".";
    LoadOptions opts;
    opts.header = use_header;
    opts.n_classes = split.n_classes;
    opts.id = id;
    opts.sample_rate_hz = cfg.get_double_or(prefix + "sample_rate_hz", default_rate);
    std::optional<std::filesystem::path> labels;
    if (cfg.contains(prefix + "labels")) labels = resolve(cfg.get(prefix + "labels"));
    auto seq = load_sequence(resolve(cfg.get(prefix + "features")), labels, opts);
    const std::string which = cfg.get_or(prefix + "split", "train");
    if (which == "train") {
      split.train.push_back(std::move(seq));
    } else if (which == "test") {
      split.test.push_back(std::move(seq));
    } else {
      throw std::invalid_argument(path.string() + ": sequence '" + id +
                                  "' has unknown split '" + which + "'");
    }
  }
  split.validate();
  return split;
}

}  // namespace behavseg::data
