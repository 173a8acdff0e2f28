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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace behavseg::metrics {

using Labels = Eigen::VectorXi;
using Matrix = Eigen::MatrixXd;

struct F1Scores {
  Eigen::VectorXd per_class;  // [K]; 0 where precision + recall == 0
  double macro = 0.0;         // mean over classes with nonzero support
};

// Frames whose true label is -1 are skipped. Throws when no frame is labeled.
F1Scores f1_scores(const Labels& pred, const Labels& truth, int n_classes);

// Rows are true classes, columns are predicted classes.
Eigen::MatrixXi confusion(const Labels& pred, const Labels& truth, int n_classes);
Matrix normalize_rows(const Eigen::MatrixXi& confusion);

double entropy(const Eigen::VectorXd& p);  // nats

struct EntropySummary {
  Eigen::VectorXd true_positive;   // [K]; NaN where no frame qualifies
  Eigen::VectorXd false_positive;  // [K]; NaN where no frame qualifies
};
EntropySummary prediction_entropy(const Matrix& probs, const Labels& pred,
                                  const Labels& truth);

struct EvalReport {
  int n_classes = 0;
  Eigen::VectorXd per_class_f1;
  double macro_f1 = 0.0;
  Eigen::MatrixXi confusion;
  Eigen::VectorXd entropy_tp;
  Eigen::VectorXd entropy_fp;
  Eigen::VectorXi support;

  // Canonical key-value text.
  std::string to_text() const;
  std::string confusion_csv() const;
};

EvalReport evaluate(const Matrix& probs, const Labels& pred, const Labels& truth,
                    int n_classes);

struct KMeansResult {
  Labels assignments;
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;
};

// Lloyd iterations from a k-means++ start; stops when assignments repeat or
// after `max_iterations`.
KMeansResult kmeans(const Matrix& points, int n_clusters, std::uint64_t seed,
                    int max_iterations = 300);

struct ClusterScores {
  double homogeneity = 1.0;
  double completeness = 1.0;
  double v_measure = 1.0;
};

// Natural-log entropies. Inputs must not contain unlabeled (-1) frames.
ClusterScores cluster_scores(const Labels& assignments, const Labels& labels);
double homogeneity(const Labels& assignments, const Labels& labels);
double completeness(const Labels& assignments, const Labels& labels);
double v_measure(const Labels& assignments, const Labels& labels);

struct ClusterReport {
  std::vector<int> n_clusters;
  std::vector<double> homogeneity;
  std::vector<double> completeness;
  std::vector<double> v_measure;
  std::uint64_t seed = 0;

  std::string to_csv() const;
};

// Default grid is {K, 2K, 4K, 8K}. Frames labeled -1 are dropped first.
ClusterReport cluster_sweep(const Matrix& latents, const Labels& labels,
                            std::vector<int> n_clusters_grid, std::uint64_t seed,
                            int n_classes = 0);

}  // namespace behavseg::metrics
