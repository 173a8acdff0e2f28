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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "behavseg/checkpoint.hpp"
#include "behavseg/model.hpp"

namespace fs = std::filesystem;
using namespace behavseg;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("behavseg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(BEHAVSEG_CLI_PATH) + " " + args + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<long>(std::count(s.begin(), s.end(), '\n'));
}

// Small separated-dynamics dataset with one held-out sequence.
fs::path small_dataset(const std::string& name, const std::string& extra = "") {
  const fs::path d = scratch(name);
  const Run r = cli("simulate --seed 3 --out " + (d / "data").string() +
                        " --override sim.length=400 --override sim.n_sequences=3"
                        " --override sim.n_test=1 " + extra,
                    d);
  REQUIRE(r.code == 0);
  return d;
}

}  // namespace

TEST_CASE("simulate writes the requested files deterministically") {
  const fs::path d = scratch("simulate");
  const std::string args = " --override sim.n_states=3 --override sim.length=5000 --seed 7";
  REQUIRE(cli("simulate --out " + (d / "a").string() + args, d).code == 0);
  REQUIRE(cli("simulate --out " + (d / "b").string() + args, d).code == 0);
  for (const char* f : {"seq000.features.csv", "seq000.labels.csv", "seq000.latents.csv"}) {
    CHECK(count_lines(d / "a" / f) == 5000);
    CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
  }
  CHECK(slurp(d / "a" / "params.ckpt") == slurp(d / "b" / "params.ckpt"));
  CHECK(fs::exists(d / "a" / "manifest.cfg"));
  CHECK(fs::exists(d / "a" / "config.cfg"));
  CHECK(slurp(d / "a" / "run.cfg").find("seed = 7") != std::string::npos);

  // Re-simulating from the written parameters reproduces the observations.
  REQUIRE(cli("simulate --out " + (d / "c").string() + args +
                  " --override sim.params=" + (d / "a" / "params.ckpt").string(),
              d).code == 0);
  CHECK(slurp(d / "c" / "seq000.features.csv") == slurp(d / "a" / "seq000.features.csv"));
  CHECK(slurp(d / "c" / "seq000.labels.csv") == slurp(d / "a" / "seq000.labels.csv"));
}

TEST_CASE("unknown keys and subcommands are rejected") {
  const fs::path d = scratch("reject");
  const Run bad = cli("simulate --out " + (d / "x").string() + " --override sim.bogus=1", d);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("sim.bogus") != std::string::npos);
  CHECK(cli("frobnicate", d).code == 2);
}

TEST_CASE("train smoke run and zero learning rate") {
  const fs::path d = small_dataset("train");
  const std::string base = "train --manifest " + (d / "data" / "manifest.cfg").string() +
                           " --override n_epochs=2 --override window=200"
                           " --override tcn.n_filters=8 --seed 5";
  const Run r = cli(base + " --out " + (d / "m").string(), d);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(d / "m" / "model.ckpt"));
  CHECK(count_lines(d / "m" / "history.csv") == 3);
  CHECK(r.err.find("epoch 1 loss") != std::string::npos);
  const std::string cfg = slurp(d / "m" / "config.cfg");
  CHECK(cfg.find("n_epochs = 2") != std::string::npos);
  CHECK(cfg.find("seed = 5") != std::string::npos);

  REQUIRE(cli(base + " --override learning_rate=0 --out " + (d / "z").string(), d).code == 0);
  const auto ck = training::load_checkpoint(d / "z" / "model.ckpt");
  const auto fresh = training::Model::init(ck.model.config, ck.model.n_classes,
                                           ck.model.raw_dim, ck.model.latent_dim,
                                           ck.model.standardizer);
  const auto got = ck.model.parameters();
  const auto want = fresh.parameters();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].second.value() == want[i].second.value());
}

TEST_CASE("missing inputs produce a nonzero exit naming the path") {
  const fs::path d = scratch("missing");
  const std::string ghost = (d / "no_such_manifest.cfg").string();
  const Run r = cli("train --manifest " + ghost + " --out " + (d / "o").string(), d);
  CHECK(r.code != 0);
  CHECK(r.err.find(ghost) != std::string::npos);
  const Run c = cli("predict --checkpoint " + (d / "none.ckpt").string() + " --features " +
                        ghost + " --out " + (d / "p").string(),
                    d);
  CHECK(c.code != 0);
  CHECK(c.err.find("none.ckpt") != std::string::npos);
}

TEST_CASE("a diverging run exits with the non-finite code") {
  const fs::path d = small_dataset("nan");
  const Run r = cli("train --manifest " + (d / "data" / "manifest.cfg").string() +
                        " --override model_variant=s3lds --override learning_rate=1e6"
                        " --override n_epochs=30 --override window=200 --override tcn.n_filters=8"
                        " --out " + (d / "m").string(),
                    d);
  CHECK(r.code == 3);
  CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("evaluate, predict and cluster-eval") {
  const fs::path d = small_dataset("evaluate");
  const std::string manifest = (d / "data" / "manifest.cfg").string();
  REQUIRE(cli("train --manifest " + manifest +
                  " --override n_epochs=80 --override learning_rate=0.01 --override window=200"
                  " --seed 2 --out " + (d / "m").string(),
              d).code == 0);
  const std::string ckpt = (d / "m" / "model.ckpt").string();

  REQUIRE(cli("evaluate --split train --checkpoint " + ckpt + " --manifest " + manifest +
                  " --out " + (d / "e1").string(),
              d).code == 0);
  REQUIRE(cli("evaluate --split train --checkpoint " + ckpt + " --manifest " + manifest +
                  " --out " + (d / "e2").string(),
              d).code == 0);
  const std::string report = slurp(d / "e1" / "report.txt");
  REQUIRE(report.rfind("macro_f1 = ", 0) == 0);
  const double f1 = std::stod(report.substr(11));
  INFO(report);
  CHECK(f1 > 0.99);
  CHECK(report == slurp(d / "e2" / "report.txt"));
  CHECK(slurp(d / "e1" / "confusion.csv") == slurp(d / "e2" / "confusion.csv"));

  const std::string feats = (d / "data" / "seq002.features.csv").string();
  REQUIRE(cli("predict --checkpoint " + ckpt + " --features " + feats + " --out " +
                  (d / "p").string(),
              d).code == 0);
  CHECK(count_lines(d / "p" / "labels.csv") == 400);
  CHECK(count_lines(d / "p" / "probs.csv") == 400);
  REQUIRE(cli("latents --checkpoint " + ckpt + " --features " + feats + " --out " +
                  (d / "l").string(),
              d).code == 0);
  CHECK(count_lines(d / "l" / "latents.csv") == 400);
  REQUIRE(cli("cluster-eval --checkpoint " + ckpt + " --manifest " + manifest +
                  " --override cluster.grid=3,6 --out " + (d / "c").string(),
              d).code == 0);
  CHECK(count_lines(d / "c" / "cluster.csv") == 3);

  // A manifest without held-out sequences cannot be evaluated on the test split.
  const fs::path e = small_dataset("evaluate_empty", "--override sim.n_test=0");
  const Run empty = cli("evaluate --checkpoint " + ckpt + " --manifest " +
                            (e / "data" / "manifest.cfg").string() + " --out " +
                            (e / "r").string(),
                        e);
  CHECK(empty.code != 0);
  CHECK(empty.err.find("no sequences") != std::string::npos);

  const fs::path k = small_dataset("evaluate_k", "--override sim.n_states=2");
  const Run mismatch = cli("evaluate --checkpoint " + ckpt + " --manifest " +
                               (k / "data" / "manifest.cfg").string() + " --out " +
                               (k / "r").string(),
                           k);
  CHECK(mismatch.code != 0);
}
