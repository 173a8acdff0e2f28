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

#include "behavseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "behavseg/config.hpp"
#include "behavseg/random.hpp"

namespace behavseg::metrics {

namespace {

using Index = Eigen::Index;

void check_pair(const Labels& pred, const Labels& truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("prediction and truth lengths differ");
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

double entropy_of_counts(const std::map<int, double>& counts, double total) {
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

// H(A | B) from a joint count table keyed by (a, b).
double conditional_entropy(const std::map<std::pair<int, int>, double>& joint,
                           const std::map<int, double>& b_counts, double total) {
  double h = 0.0;
  for (const auto& [ab, c] : joint) {
    if (c > 0.0) h -= (c / total) * std::log(c / b_counts.at(ab.second));
  }
  return h;
}

}  // namespace

F1Scores f1_scores(const Labels& pred, const Labels& truth, int n_classes) {
  check_pair(pred, truth);
  const Eigen::MatrixXi cm = confusion(pred, truth, n_classes);
  if (cm.sum() == 0) throw std::invalid_argument("f1_scores: no labeled frames");
  F1Scores out;
  out.per_class = Eigen::VectorXd::Zero(n_classes);
  double total = 0.0;
  int counted = 0;
  for (int k = 0; k < n_classes; ++k) {
    const double tp = cm(k, k);
    const double fp = cm.col(k).sum() - tp;
    const double fn = cm.row(k).sum() - tp;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.per_class[k] =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    if (cm.row(k).sum() > 0) {
      total += out.per_class[k];
      ++counted;
    }
  }
  out.macro = total / counted;
  return out;
}

Eigen::MatrixXi confusion(const Labels& pred, const Labels& truth, int n_classes) {
  check_pair(pred, truth);
  if (n_classes < 1) throw std::invalid_argument("confusion: n_classes must be >= 1");
  Eigen::MatrixXi cm = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (Index t = 0; t < truth.size(); ++t) {
    if (truth[t] == -1) continue;
    if (truth[t] < 0 || truth[t] >= n_classes || pred[t] < 0 || pred[t] >= n_classes) {
      throw std::invalid_argument("confusion: label out of range at frame " +
                                  std::to_string(t));
    }
    cm(truth[t], pred[t]) += 1;
  }
  return cm;
}

Matrix normalize_rows(const Eigen::MatrixXi& cm) {
  Matrix out = cm.cast<double>();
  for (Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0) out.row(i) /= s;
  }
  return out;
}

double entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Index k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
  return h;
}

EntropySummary prediction_entropy(const Matrix& probs, const Labels& pred,
                                  const Labels& truth) {
  check_pair(pred, truth);
  if (probs.rows() != pred.size()) {
    throw std::invalid_argument("prediction_entropy: probs rows differ from labels");
  }
  const Index K = probs.cols();
  Eigen::VectorXd tp_sum = Eigen::VectorXd::Zero(K), fp_sum = Eigen::VectorXd::Zero(K);
  Eigen::VectorXi tp_n = Eigen::VectorXi::Zero(K), fp_n = Eigen::VectorXi::Zero(K);
  for (Index t = 0; t < pred.size(); ++t) {
    const int k = pred[t];
    if (truth[t] == -1 || k < 0 || k >= K) continue;
    const double h = entropy(probs.row(t).transpose());
    if (truth[t] == k) {
      tp_sum[k] += h;
      ++tp_n[k];
    } else {
      fp_sum[k] += h;
      ++fp_n[k];
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EntropySummary out;
  out.true_positive.resize(K);
  out.false_positive.resize(K);
  for (Index k = 0; k < K; ++k) {
    out.true_positive[k] = tp_n[k] ? tp_sum[k] / tp_n[k] : nan;
    out.false_positive[k] = fp_n[k] ? fp_sum[k] / fp_n[k] : nan;
  }
  return out;
}

EvalReport evaluate(const Matrix& probs, const Labels& pred, const Labels& truth,
                    int n_classes) {
  EvalReport r;
  r.n_classes = n_classes;
  const F1Scores f1 = f1_scores(pred, truth, n_classes);
  r.per_class_f1 = f1.per_class;
  r.macro_f1 = f1.macro;
  r.confusion = confusion(pred, truth, n_classes);
  r.support = r.confusion.rowwise().sum();
  const EntropySummary h = prediction_entropy(probs, pred, truth);
  r.entropy_tp = h.true_positive;
  r.entropy_fp = h.false_positive;
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "macro_f1 = " << fmt(macro_f1) << '\n';
  out << "n_classes = " << n_classes << '\n';
  for (int k = 0; k < n_classes; ++k) {
    const std::string p = "class." + std::to_string(k) + ".";
    out << p << "entropy_fp = " << fmt(entropy_fp[k]) << '\n';
    out << p << "entropy_tp = " << fmt(entropy_tp[k]) << '\n';
    out << p << "f1 = " << fmt(per_class_f1[k]) << '\n';
    out << p << "support = " << support[k] << '\n';
  }
  return out.str();
}

std::string EvalReport::confusion_csv() const {
  std::ostringstream out;
  for (Index i = 0; i < confusion.rows(); ++i) {
    for (Index j = 0; j < confusion.cols(); ++j) {
      if (j) out << ',';
      out << confusion(i, j);
    }
    out << '\n';
  }
  return out.str();
}

KMeansResult kmeans(const Matrix& points, int n_clusters, std::uint64_t seed,
                    int max_iterations) {
  const Index N = points.rows();
  if (n_clusters < 1) throw std::invalid_argument("kmeans: n_clusters must be >= 1");
  if (N < n_clusters) {
    throw std::invalid_argument("kmeans: " + std::to_string(N) + " points for " +
                                std::to_string(n_clusters) + " clusters");
  }
  Rng rng(derive_seed(seed, {0x6b6d}));
  Matrix centroids(n_clusters, points.cols());

  // k-means++ seeding.
  std::uniform_int_distribution<Index> pick(0, N - 1);
  centroids.row(0) = points.row(pick(rng));
  Eigen::VectorXd d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < n_clusters; ++c) {
    const double total = d2.sum();
    Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, total);
      const double u = unif(rng);
      double cum = 0.0;
      chosen = N - 1;
      for (Index i = 0; i < N; ++i) {
        cum += d2[i];
        if (u < cum) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  KMeansResult out;
  out.assignments = Labels::Constant(N, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Index i = 0; i < N; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_clusters; ++c) {
        const double d = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignments[i] != best) {
        out.assignments[i] = static_cast<int>(best);
        changed = true;
      }
    }
    out.iterations = iter + 1;
    if (!changed) break;
    Matrix sums = Matrix::Zero(n_clusters, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(n_clusters);
    for (Index i = 0; i < N; ++i) {
      sums.row(out.assignments[i]) += points.row(i);
      ++counts[out.assignments[i]];
    }
    for (int c = 0; c < n_clusters; ++c)
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / counts[c];
  }
  out.centroids = centroids;
  out.inertia = 0.0;
  for (Index i = 0; i < N; ++i)
    out.inertia += (points.row(i) - centroids.row(out.assignments[i])).squaredNorm();
  return out;
}

ClusterScores cluster_scores(const Labels& assignments, const Labels& labels) {
  if (assignments.size() != labels.size()) {
    throw std::invalid_argument("cluster_scores: length mismatch");
  }
  const Index N = labels.size();
  if (N == 0) throw std::invalid_argument("cluster_scores: empty input");
  std::map<int, double> class_counts, cluster_counts;
  std::map<std::pair<int, int>, double> class_given_cluster, cluster_given_class;
  for (Index i = 0; i < N; ++i) {
    if (labels[i] < 0) throw std::invalid_argument("cluster_scores: unlabeled frame present");
    class_counts[labels[i]] += 1;
    cluster_counts[assignments[i]] += 1;
    class_given_cluster[{labels[i], assignments[i]}] += 1;
    cluster_given_class[{assignments[i], labels[i]}] += 1;
  }
  const double n = static_cast<double>(N);
  const double h_c = entropy_of_counts(class_counts, n);
  const double h_k = entropy_of_counts(cluster_counts, n);
  ClusterScores s;
  s.homogeneity = h_c == 0.0 ? 1.0
                             : 1.0 - conditional_entropy(class_given_cluster,
                                                         cluster_counts, n) / h_c;
  s.completeness = h_k == 0.0 ? 1.0
                              : 1.0 - conditional_entropy(cluster_given_class,
                                                          class_counts, n) / h_k;
  const double denom = s.homogeneity + s.completeness;
  s.v_measure = denom > 0.0 ? 2.0 * s.homogeneity * s.completeness / denom : 0.0;
  return s;
}

double homogeneity(const Labels& a, const Labels& l) { return cluster_scores(a, l).homogeneity; }
double completeness(const Labels& a, const Labels& l) { return cluster_scores(a, l).completeness; }
double v_measure(const Labels& a, const Labels& l) { return cluster_scores(a, l).v_measure; }

std::string ClusterReport::to_csv() const {
  std::ostringstream out;
  out << "n_clusters,homogeneity,completeness,v_measure\n";
  for (std::size_t i = 0; i < n_clusters.size(); ++i) {
    out << n_clusters[i] << ',' << fmt(homogeneity[i]) << ',' << fmt(completeness[i])
        << ',' << fmt(v_measure[i]) << '\n';
  }
  return out.str();
}

ClusterReport cluster_sweep(const Matrix& latents, const Labels& labels,
                            std::vector<int> grid, std::uint64_t seed, int n_classes) {
  if (latents.rows() != labels.size()) {
    throw std::invalid_argument("cluster_sweep: latents and labels differ in length");
  }
  std::vector<Index> keep;
  for (Index i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) keep.push_back(i);
  if (keep.empty()) throw std::invalid_argument("cluster_sweep: no labeled frames");
  Matrix pts(static_cast<Index>(keep.size()), latents.cols());
  Labels lab(static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    pts.row(static_cast<Index>(i)) = latents.row(keep[i]);
    lab[static_cast<Index>(i)] = labels[keep[i]];
  }
  if (grid.empty()) {
    const int K = n_classes > 0 ? n_classes : lab.maxCoeff() + 1;
    grid = {K, 2 * K, 4 * K, 8 * K};
  }
  ClusterReport report;
  report.seed = seed;
  for (int c : grid) {
    const KMeansResult km = kmeans(pts, c, seed);
    const ClusterScores s = cluster_scores(km.assignments, lab);
    report.n_clusters.push_back(c);
    report.homogeneity.push_back(s.homogeneity);
    report.completeness.push_back(s.completeness);
    report.v_measure.push_back(s.v_measure);
  }
  return report;
}

}  // namespace behavseg::metrics
