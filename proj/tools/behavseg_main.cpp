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

#include <iostream>

#include <CLI11.hpp>

#include "behavseg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"behavseg: semi-supervised behavioral segmentation"};
  app.require_subcommand(1);
  behavseg::cli::CommandSpec spec;
  std::string config, manifest, checkpoint, features, out = ".";
  long long seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Key-value config file");
    sub->add_option("--override", spec.overrides, "key=value, repeatable")->take_all();
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Seed (overrides the config)");
    sub->add_flag("--header", spec.header, "Feature CSVs have a header row");
  };

  auto* simulate = app.add_subcommand("simulate", "Sample synthetic sequences");
  add_common(simulate);

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train);
  train->add_option("--manifest", manifest, "Dataset manifest")->required();

  auto* predict = app.add_subcommand("predict", "Per-frame probabilities and labels");
  add_common(predict);
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--features", features, "Feature CSV")->required();

  auto* latents = app.add_subcommand("latents", "Encoder latents per frame");
  add_common(latents);
  latents->add_option("--checkpoint", checkpoint)->required();
  latents->add_option("--features", features, "Feature CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "F1, confusion and entropy report");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--manifest", manifest)->required();
  evaluate->add_option("--split", spec.split, "train or test");

  auto* cluster = app.add_subcommand("cluster-eval", "k-means cluster quality of latents");
  add_common(cluster);
  cluster->add_option("--checkpoint", checkpoint)->required();
  cluster->add_option("--manifest", manifest)->required();
  cluster->add_option("--split", spec.split, "train or test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  spec.subcommand = app.get_subcommands().front()->get_name();
  if (!config.empty()) spec.config = config;
  if (!manifest.empty()) spec.manifest = manifest;
  if (!checkpoint.empty()) spec.checkpoint = checkpoint;
  if (!features.empty()) spec.features = features;
  if (seed >= 0) spec.seed = seed;
  spec.out = out;
  return behavseg::cli::run_command(spec, std::cerr);
}
