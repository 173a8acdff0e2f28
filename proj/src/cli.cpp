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

#include "behavseg/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>

#include "behavseg/checkpoint.hpp"
#include "behavseg/config.hpp"
#include "behavseg/data_io.hpp"
#include "behavseg/generative.hpp"
#include "behavseg/metrics.hpp"
#include "behavseg/training.hpp"

namespace behavseg::cli {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kSimulateKeys = {
    "seed",          "sim.n_states",     "sim.latent_dim",        "sim.obs_dim",
    "sim.kind",      "sim.self_transition", "sim.dynamics_noise_std",
    "sim.emission_noise_std", "sim.radius", "sim.rotation",       "sim.length",
    "sim.n_sequences", "sim.n_test",     "sim.sample_rate_hz",    "sim.params",
    "sim.stationary_std"};

const std::set<std::string> kClusterKeys = {"seed", "cluster.grid"};

KeyValueConfig effective_config(const CommandSpec& spec, const std::set<std::string>& allowed) {
  KeyValueConfig cfg = spec.config ? KeyValueConfig::load(*spec.config) : KeyValueConfig{};
  cfg.reject_unknown(allowed);
  for (const auto& o : spec.overrides) cfg.apply_override(o, allowed);
  if (spec.seed) {
    if (*spec.seed < 0) throw std::invalid_argument("--seed must be non-negative");
    cfg.set("seed", *spec.seed);
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Echoes the effective config and records seed plus output hashes.
void write_provenance(const CommandSpec& spec, const KeyValueConfig& cfg,
                      const std::vector<fs::path>& outputs) {
  cfg.save(spec.out / "config.cfg");
  KeyValueConfig run;
  run.set("command", spec.subcommand);
  run.set("seed", cfg.get_or("seed", "0"));
  if (spec.manifest) run.set("input.manifest", spec.manifest->string());
  if (spec.checkpoint) {
    run.set("input.checkpoint", spec.checkpoint->string());
    run.set("input.checkpoint.fnv1a", file_hash(*spec.checkpoint));
  }
  if (spec.features) run.set("input.features", spec.features->string());
  for (const auto& p : outputs) run.set("output." + p.filename().string() + ".fnv1a", file_hash(p));
  run.save(spec.out / "run.cfg");
}

const fs::path& require(const std::optional<fs::path>& p, const char* flag) {
  if (!p) throw std::invalid_argument(std::string("missing required option ") + flag);
  return *p;
}

std::string seq_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "seq%03d", i);
  return buf;
}

const std::vector<data::FeatureSequence>& pick_split(const data::DatasetSplit& ds,
                                                     const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "test") return ds.test;
  throw std::invalid_argument("--split must be train or test, got '" + split + "'");
}

data::DatasetSplit load_dataset(const CommandSpec& spec) {
  const fs::path& manifest = require(spec.manifest, "--manifest");
  if (!fs::exists(manifest)) throw std::runtime_error("manifest not found: " + manifest.string());
  return data::load_manifest(manifest, spec.header ? std::optional<bool>(true) : std::nullopt);
}

int cmd_simulate(const CommandSpec& spec) {
  const KeyValueConfig cfg = effective_config(spec, kSimulateKeys);
  const auto seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 0));
  const int length = static_cast<int>(cfg.get_int_or("sim.length", 5000));
  const int n_seq = static_cast<int>(cfg.get_int_or("sim.n_sequences", 1));
  const int n_test = static_cast<int>(cfg.get_int_or("sim.n_test", 0));
  if (length < 1) throw std::invalid_argument("sim.length must be >= 1");
  if (n_seq < 1) throw std::invalid_argument("sim.n_sequences must be >= 1");
  if (n_test < 0 || n_test > n_seq) throw std::invalid_argument("sim.n_test must be in [0, sim.n_sequences]");

  gen::SLDSParams params;
  if (cfg.contains("sim.params")) {
    fs::path p = cfg.get("sim.params");
    if (p.is_relative() && spec.config) p = spec.config->parent_path() / p;
    params = training::slds_from_archive(training::TensorArchive::load(p));
  } else {
    gen::SyntheticOptions o;
    o.n_states = static_cast<int>(cfg.get_int_or("sim.n_states", o.n_states));
    o.latent_dim = static_cast<int>(cfg.get_int_or("sim.latent_dim", o.latent_dim));
    o.obs_dim = static_cast<int>(cfg.get_int_or("sim.obs_dim", o.obs_dim));
    const std::string kind = cfg.get_or("sim.kind", "separated");
    if (kind == "separated") {
      o.kind = gen::SyntheticKind::separated;
    } else if (kind == "dynamics_only") {
      o.kind = gen::SyntheticKind::dynamics_only;
    } else {
      throw std::invalid_argument("sim.kind must be separated or dynamics_only");
    }
    o.self_transition = cfg.get_double_or("sim.self_transition", o.self_transition);
    o.dynamics_noise_std = cfg.get_double_or("sim.dynamics_noise_std", o.dynamics_noise_std);
    o.emission_noise_std = cfg.get_double_or("sim.emission_noise_std", o.emission_noise_std);
    o.fixed_point_radius = cfg.get_double_or("sim.radius", o.fixed_point_radius);
    o.rotation = cfg.get_double_or("sim.rotation", o.rotation);
    o.stationary_std = cfg.get_double_or("sim.stationary_std", o.stationary_std);
    params = gen::make_synthetic_slds(o, derive_seed(seed, {0x9a}));
  }
  params.validate();

  fs::create_directories(spec.out);
  std::vector<fs::path> outputs;
  KeyValueConfig manifest;
  manifest.set("n_classes", params.n_states);
  manifest.set("sample_rate_hz", cfg.get_double_or("sim.sample_rate_hz", 30.0));
  for (int i = 0; i < n_seq; ++i) {
    const std::string name = seq_name(i);
    const auto traj = gen::sample_sequence(params, length, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const fs::path f = spec.out / (name + ".features.csv");
    const fs::path l = spec.out / (name + ".labels.csv");
    const fs::path z = spec.out / (name + ".latents.csv");
    data::write_matrix_csv(f, traj.x);
    data::write_label_csv(l, traj.y);
    data::write_matrix_csv(z, traj.z);
    outputs.insert(outputs.end(), {f, l, z});
    manifest.set("sequence." + name + ".features", f.filename().string());
    manifest.set("sequence." + name + ".labels", l.filename().string());
    manifest.set("sequence." + name + ".split", i >= n_seq - n_test ? "test" : "train");
  }
  const fs::path params_path = spec.out / "params.ckpt";
  training::slds_to_archive(params).save(params_path);
  const fs::path manifest_path = spec.out / "manifest.cfg";
  manifest.save(manifest_path);
  outputs.push_back(params_path);
  outputs.push_back(manifest_path);
  write_provenance(spec, cfg, outputs);
  return 0;
}

int cmd_train(const CommandSpec& spec, std::ostream& log) {
  KeyValueConfig cfg = effective_config(spec, training::TrainConfig::keys());
  const training::TrainConfig config = training::TrainConfig::from_config(cfg);
  data::DatasetSplit ds = load_dataset(spec);
  ds.train = training::subsample_labels(config, std::move(ds.train), config.seed);

  fs::create_directories(spec.out);
  const auto result = training::train(config, ds, [&log](const training::EpochRecord& r) {
    log << "epoch " << r.epoch << " loss " << format_double(r.loss) << '\n';
  });
  const fs::path ckpt = spec.out / "model.ckpt";
  const fs::path hist = spec.out / "history.csv";
  training::save_checkpoint(ckpt, result.model, result.history);
  write_text(hist, training::history_csv(result.history));
  write_provenance(spec, config.to_config(), {ckpt, hist});
  return 0;
}

int cmd_predict(const CommandSpec& spec, bool latents) {
  const KeyValueConfig cfg = effective_config(spec, {"seed"});
  const auto ck = training::load_checkpoint(require(spec.checkpoint, "--checkpoint"));
  const data::Matrix raw = data::read_feature_csv(require(spec.features, "--features"), spec.header);
  fs::create_directories(spec.out);
  std::vector<fs::path> outputs;
  if (latents) {
    const fs::path p = spec.out / "latents.csv";
    data::write_matrix_csv(p, training::extract_latents(ck.model, raw));
    outputs.push_back(p);
  } else {
    const auto pred = training::predict(ck.model, raw);
    const fs::path probs = spec.out / "probs.csv";
    const fs::path labels = spec.out / "labels.csv";
    data::write_matrix_csv(probs, pred.probs);
    data::write_label_csv(labels, pred.labels);
    outputs = {probs, labels};
  }
  write_provenance(spec, cfg, outputs);
  return 0;
}

int cmd_evaluate(const CommandSpec& spec) {
  const KeyValueConfig cfg = effective_config(spec, {"seed"});
  const auto ck = training::load_checkpoint(require(spec.checkpoint, "--checkpoint"));
  const data::DatasetSplit ds = load_dataset(spec);
  if (ds.n_classes != ck.model.n_classes) {
    throw std::invalid_argument("class count mismatch: checkpoint has " +
                                std::to_string(ck.model.n_classes) + ", manifest has " +
                                std::to_string(ds.n_classes));
  }
  const auto& seqs = pick_split(ds, spec.split);
  if (seqs.empty()) throw std::invalid_argument("split '" + spec.split + "' has no sequences");
  const auto report = training::evaluate_model(ck.model, seqs);
  fs::create_directories(spec.out);
  const fs::path text = spec.out / "report.txt";
  const fs::path cm = spec.out / "confusion.csv";
  write_text(text, report.to_text());
  write_text(cm, report.confusion_csv());
  write_provenance(spec, cfg, {text, cm});
  return 0;
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      grid.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("cluster.grid: bad entry '" + item + "'");
    }
  }
  return grid;
}

int cmd_cluster_eval(const CommandSpec& spec) {
  const KeyValueConfig cfg = effective_config(spec, kClusterKeys);
  const auto ck = training::load_checkpoint(require(spec.checkpoint, "--checkpoint"));
  const data::DatasetSplit ds = load_dataset(spec);
  const auto& seqs = pick_split(ds, spec.split);
  if (seqs.empty()) throw std::invalid_argument("split '" + spec.split + "' has no sequences");

  std::vector<data::Matrix> parts;
  data::Index total = 0;
  for (const auto& s : seqs) {
    parts.push_back(training::extract_latents(ck.model, s.features));
    total += s.length();
  }
  data::Matrix latents(total, parts.front().cols());
  data::Labels labels(total);
  data::Index offset = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    latents.middleRows(offset, seqs[i].length()) = parts[i];
    labels.segment(offset, seqs[i].length()) =
        seqs[i].labels.size() ? seqs[i].labels
                              : data::Labels::Constant(seqs[i].length(), data::kUnlabeled);
    offset += seqs[i].length();
  }
  const auto grid = cfg.contains("cluster.grid") ? parse_grid(cfg.get("cluster.grid"))
                                                 : std::vector<int>{};
  const auto report = metrics::cluster_sweep(
      latents, labels, grid, static_cast<std::uint64_t>(cfg.get_int_or("seed", 0)),
      ck.model.n_classes);
  fs::create_directories(spec.out);
  const fs::path csv = spec.out / "cluster.csv";
  write_text(csv, report.to_csv());
  write_provenance(spec, cfg, {csv});
  return 0;
}

}  // namespace

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run_command(const CommandSpec& spec, std::ostream& log) {
  try {
    if (spec.subcommand == "simulate") return cmd_simulate(spec);
    if (spec.subcommand == "train") return cmd_train(spec, log);
    if (spec.subcommand == "predict") return cmd_predict(spec, false);
    if (spec.subcommand == "latents") return cmd_predict(spec, true);
    if (spec.subcommand == "evaluate") return cmd_evaluate(spec);
    if (spec.subcommand == "cluster-eval") return cmd_cluster_eval(spec);
    log << "error: unknown subcommand '" << spec.subcommand << "'\n";
    return 2;
  } catch (const training::NonFiniteLoss& e) {
    log << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace behavseg::cli
