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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <Eigen/Eigenvalues>

#include "behavseg/data_io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace behavseg::data;
using testutil::random_matrix;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("behavseg_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

FeatureSequence make_seq(const std::string& id, Index T, Index D, std::uint64_t seed) {
  FeatureSequence s;
  s.id = id;
  s.features = random_matrix(T, D, seed);
  s.labels = Labels::Constant(T, 0);
  return s;
}

}  // namespace

TEST_CASE("load_sequence without labels marks every frame unlabeled") {
  const auto dir = scratch("nolabels");
  write(dir / "f.csv", "1,2\n3,4\n5,6\n");
  const auto s = load_sequence(dir / "f.csv", std::nullopt);
  CHECK(s.length() == 3);
  CHECK(s.dim() == 2);
  CHECK(s.labels == Labels::Constant(3, -1));
  CHECK(s.features(2, 1) == 6.0);
}

TEST_CASE("load_sequence keeps labels verbatim and checks row counts") {
  const auto dir = scratch("labels");
  write(dir / "f.csv", "1,2\n3,4\n5,6\n");
  write(dir / "l.csv", "0\n1\n-1\n");
  write(dir / "l4.csv", "0\n1\n-1\n0\n");
  const auto s = load_sequence(dir / "f.csv", dir / "l.csv");
  CHECK(s.labels == (Labels(3) << 0, 1, -1).finished());
  CHECK_THROWS(load_sequence(dir / "f.csv", dir / "l4.csv"));
}

TEST_CASE("malformed and out-of-range inputs are rejected") {
  const auto dir = scratch("bad");
  write(dir / "nan.csv", "1,abc\n");
  write(dir / "ragged.csv", "1,2\n3\n");
  write(dir / "f.csv", "1\n2\n");
  write(dir / "l.csv", "0\n7\n");
  write(dir / "hdr.csv", "a,b\n1,2\n");
  CHECK_THROWS(read_feature_csv(dir / "nan.csv"));
  CHECK_THROWS(read_feature_csv(dir / "ragged.csv"));
  LoadOptions opts;
  opts.n_classes = 3;
  CHECK_THROWS(load_sequence(dir / "f.csv", dir / "l.csv", opts));
  CHECK(read_feature_csv(dir / "hdr.csv", true).rows() == 1);
  CHECK_THROWS(read_feature_csv(dir / "missing.csv"));
}

TEST_CASE("matrix CSV writing round-trips exactly") {
  const auto dir = scratch("roundtrip");
  const Matrix m = random_matrix(7, 3, 5, 1e3);
  write_matrix_csv(dir / "m.csv", m);
  CHECK(read_feature_csv(dir / "m.csv") == m);
  const Labels l = (Labels(4) << 2, -1, 0, 1).finished();
  write_label_csv(dir / "l.csv", l);
  CHECK(read_label_csv(dir / "l.csv") == l);
}

TEST_CASE("position_velocity appends first differences") {
  Matrix x(3, 1);
  x << 1, 3, 6;
  Matrix expect(3, 2);
  expect << 1, 0, 3, 2, 6, 3;
  CHECK(position_velocity(x) == expect);
  CHECK(position_velocity(Matrix::Constant(5, 2, 4.0)).rightCols(2).isZero());

  const Matrix r = random_matrix(20, 4, 3);
  const Matrix pv = position_velocity(r);
  CHECK(pv.leftCols(4) == r);
  for (Index t = 0; t < 20; ++t) {
    for (Index j = 0; j < 4; ++j) {
      const double v = t == 0 ? 0.0 : r(t, j) - r(t - 1, j);
      CHECK(pv(t, 4 + j) == v);
    }
  }
}

TEST_CASE("standardizer uses population statistics") {
  FeatureSequence s;
  s.features = (Matrix(2, 1) << 0, 2).finished();
  s.labels = Labels::Constant(2, -1);
  std::vector<FeatureSequence> train{s};
  const auto st = fit_standardizer(train);
  CHECK(st.mean(0) == 1.0);
  CHECK(st.std(0) == 1.0);
  CHECK(apply_standardizer(st, s.features) == (Matrix(2, 1) << -1, 1).finished());
}

TEST_CASE("standardized training data has zero mean and unit std") {
  std::vector<FeatureSequence> train{make_seq("a", 50, 3, 1), make_seq("b", 70, 3, 2)};
  for (auto& s : train) s.features = (s.features * 5.0).array() + 2.0;
  const auto st = fit_standardizer(train);
  const Matrix z = st.apply(concat_features(train));
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::RowVectorXd var =
      (z.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(z.rows());
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK((st.inverse(z) - concat_features(train)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((st.apply(st.inverse(z)) - z).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant columns are floored and map to zero") {
  FeatureSequence s = make_seq("c", 10, 2, 4);
  s.features.col(1).setConstant(3.0);
  std::vector<FeatureSequence> train{s};
  const auto st = fit_standardizer(train);
  CHECK(st.std(1) == kStdFloor);
  CHECK(st.apply(s.features).col(1).isZero());
  CHECK_THROWS(fit_standardizer(std::vector<FeatureSequence>{}));
}

TEST_CASE("select_latent_dim follows the explained-variance rule") {
  // Independent axes with variances 0.9, 0.06, 0.04 after centering.
  Matrix x(6, 3);
  const double a = std::sqrt(0.9 * 3), b = std::sqrt(0.06 * 3), c = std::sqrt(0.04 * 3);
  x << a, 0, 0, -a, 0, 0, 0, b, 0, 0, -b, 0, 0, 0, c, 0, 0, -c;
  CHECK(select_latent_dim(x, 0.95) == 2);
  CHECK(select_latent_dim(x, 0.9) == 1);
  CHECK(select_latent_dim(x, 1.0) == 3);

  Matrix iso(8, 4);
  iso << Matrix::Identity(4, 4), -Matrix::Identity(4, 4);
  CHECK(select_latent_dim(iso, 0.95) == 4);
  CHECK(select_latent_dim(Matrix::Zero(5, 3)) == 1);
}

TEST_CASE("low-rank data recovers its rank and matches an eigen oracle") {
  const Matrix factors = random_matrix(2000, 3, 7);
  const Matrix loading = random_matrix(3, 10, 8);
  const Matrix x = factors * loading + random_matrix(2000, 10, 9, 1e-3);
  CHECK(select_latent_dim(x, 0.95) == 3);

  const Matrix centered = x.rowwise() - x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered.transpose() * centered);
  const Eigen::VectorXd ev = eig.eigenvalues().reverse();
  int prev = 0;
  for (double thr : {0.5, 0.8, 0.9, 0.95, 0.99, 0.999999, 1.0}) {
    int oracle = 1;
    double cum = ev(0);
    while (cum < thr * ev.sum() - 1e-12 * ev.sum()) cum += ev(oracle++);
    const int got = select_latent_dim(x, thr);
    CHECK(got == oracle);
    CHECK(got >= prev);
    prev = got;
  }
}

TEST_CASE("subsample_labeled_videos keeps labels on chosen videos only") {
  std::vector<FeatureSequence> train;
  for (int i = 0; i < 5; ++i) train.push_back(make_seq("v" + std::to_string(i), 20, 2, i));
  const auto all = subsample_labeled_videos(train, 5, 3);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(all[i].labels == train[i].labels);
  CHECK_THROWS(subsample_labeled_videos(train, 0, 3));
  CHECK_THROWS(subsample_labeled_videos(train, 6, 3));

  const auto a = subsample_labeled_videos(train, 2, 11);
  const auto b = subsample_labeled_videos(train, 2, 11);
  int labeled = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].labels == b[i].labels);
    CHECK(a[i].features == train[i].features);
    if (a[i].labeled_count() > 0) ++labeled;
    else CHECK(a[i].labels == Labels::Constant(20, -1));
  }
  CHECK(labeled == 2);

  std::set<std::size_t> covered;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = subsample_labeled_videos(train, 2, seed);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i].labeled_count() > 0) covered.insert(i);
  }
  CHECK(covered.size() == 5);
}

TEST_CASE("subsample_labeled_frames keeps roughly the requested fraction") {
  std::vector<FeatureSequence> train{make_seq("a", 20000, 1, 1)};
  const auto s = subsample_labeled_frames(train, 0.02, 4);
  const double kept = static_cast<double>(s[0].labeled_count()) / 20000.0;
  CHECK(std::abs(kept - 0.02) < 3.0 * std::sqrt(0.02 * 0.98 / 20000.0));
  CHECK(subsample_labeled_frames(train, 1.0, 4)[0].labels == train[0].labels);
  CHECK(subsample_labeled_frames(train, 0.0, 4)[0].labeled_count() == 0);
  CHECK_THROWS(subsample_labeled_frames(train, 1.5, 4));
}

TEST_CASE("make_batches tiles exactly") {
  std::vector<FeatureSequence> one{make_seq("a", 2000, 2, 1)};
  const auto b = make_batches(one, 8, 1000, 0);
  REQUIRE(b.size() == 1);
  CHECK(b[0].size() == 2);
  for (const auto& w : b[0].windows) CHECK(w.valid == 1000);
}

TEST_CASE("short sequences are padded and masked") {
  std::vector<FeatureSequence> one{make_seq("a", 600, 2, 1)};
  one[0].labels.head(100).setConstant(-1);
  const auto b = make_batches(one, 8, 1000, 0);
  REQUIRE(b.size() == 1);
  CHECK(b[0].windows[0].valid == 600);
  CHECK(b[0].features[0].rows() == 1000);
  CHECK(b[0].features[0].bottomRows(400).isZero());
  for (Index t = 0; t < 1000; ++t) {
    const int expect = t >= 600 ? kPadded : t < 100 ? kUnlabeledFrame : kLabeledFrame;
    CHECK(b[0].mask(0, t) == expect);
    if (t >= 600) CHECK(b[0].labels(0, t) == -1);
  }
}

TEST_CASE("an epoch covers every frame exactly once") {
  std::vector<FeatureSequence> train;
  for (int i = 0; i < 10; ++i) train.push_back(make_seq("s" + std::to_string(i), 1000, 1, i));
  const auto batches = make_batches(train, 8, 1000, 17);
  CHECK(batches.size() == 2);
  std::vector<std::vector<int>> seen(10, std::vector<int>(1000, 0));
  for (const auto& b : batches) {
    for (Index i = 0; i < b.size(); ++i) {
      const auto& w = b.windows[static_cast<std::size_t>(i)];
      for (Index t = 0; t < w.valid; ++t) {
        ++seen[w.sequence][static_cast<std::size_t>(w.start + t)];
        CHECK(b.features[static_cast<std::size_t>(i)](t, 0) ==
              train[w.sequence].features(w.start + t, 0));
      }
    }
  }
  for (const auto& s : seen)
    for (int c : s) CHECK(c == 1);

  const auto again = make_batches(train, 8, 1000, 17);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    CHECK(again[i].labels == batches[i].labels);
    for (std::size_t j = 0; j < batches[i].features.size(); ++j)
      CHECK(again[i].features[j] == batches[i].features[j]);
  }
  CHECK_THROWS(make_batches(std::vector<FeatureSequence>{}, 8, 1000, 0));
}

TEST_CASE("manifest loading resolves paths and reports missing files") {
  const auto dir = scratch("manifest");
  write(dir / "a.csv", "1,2\n3,4\n");
  write(dir / "a.lab", "0\n1\n");
  write(dir / "b.csv", "5,6\n");
  write(dir / "m.cfg",
        "n_classes = 2\n"
        "sequence.a.features = a.csv\n"
        "sequence.a.labels = a.lab\n"
        "sequence.a.split = train\n"
        "sequence.b.features = b.csv\n"
        "sequence.b.split = test\n");
  const auto ds = load_manifest(dir / "m.cfg");
  CHECK(ds.n_classes == 2);
  REQUIRE(ds.train.size() == 1);
  REQUIRE(ds.test.size() == 1);
  CHECK(ds.train[0].labels == (Labels(2) << 0, 1).finished());
  CHECK(ds.test[0].labels == Labels::Constant(1, -1));

  write(dir / "bad.cfg", "n_classes = 2\nsequence.a.colour = red\n");
  CHECK_THROWS(load_manifest(dir / "bad.cfg"));
  try {
    load_manifest(dir / "absent.cfg");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("absent.cfg") != std::string::npos);
  }
}
