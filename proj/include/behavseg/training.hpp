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
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "behavseg/checkpoint.hpp"
#include "behavseg/data_io.hpp"
#include "behavseg/metrics.hpp"
#include "behavseg/model.hpp"

namespace behavseg::training {

// Adam with bias correction. Moment buffers follow the parameter order of the
// list passed to the first step().
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  // Parameters whose gradient buffer was never allocated are treated as
  // having zero gradient.
  void step(const ad::ParamList& params);
  long long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<data::Matrix> m_, v_;
};

// Raised when a loss component stops being finite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& term, int epoch);
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

// Called after every epoch with the record just appended.
using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  Model model;
  History history;
};

// Fits the model in `config.variant` to `dataset.train`. Label subsampling is
// not applied here; see subsample_labels().
TrainResult train(const TrainConfig& config, const data::DatasetSplit& dataset,
                  const EpochCallback& on_epoch = {});

// Applies labels.videos and labels.fraction from the config.
std::vector<data::FeatureSequence> subsample_labels(
    const TrainConfig& config, std::vector<data::FeatureSequence> train,
    std::uint64_t seed);

struct Prediction {
  data::Labels labels;  // [T]
  data::Matrix probs;   // [T x K]
};

// Eval-mode classification of a full raw sequence.
Prediction predict(const Model& model, const data::Matrix& raw);

// Backbone features h [T x n_filters] for the supervised TCN; the posterior
// mean of z under the argmax class [T x L] for the generative variants.
data::Matrix extract_latents(const Model& model, const data::Matrix& raw);

// Predicts every sequence and pools frames into one report.
metrics::EvalReport evaluate_model(const Model& model,
                                   const std::vector<data::FeatureSequence>& sequences);

struct ScoreSummary {
  std::vector<double> scores;
  double mean = 0.0;
  double std = 0.0;  // population
};
ScoreSummary summarize_scores(std::vector<double> scores);

// Trains `n_seeds` models whose seeds (and label subsamples) derive from
// config.seed, and summarizes their test macro-F1.
ScoreSummary run_experiment(const TrainConfig& config, const data::DatasetSplit& dataset,
                            int n_seeds = 5);

}  // namespace behavseg::training
