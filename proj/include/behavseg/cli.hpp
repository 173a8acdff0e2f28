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

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace behavseg::cli {

struct CommandSpec {
  std::string subcommand;  // simulate, train, predict, latents, evaluate, cluster-eval
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;  // key=value, applied after the file
  std::filesystem::path out = ".";
  std::optional<long long> seed;
  bool header = false;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> features;
  std::string split = "test";
};

// Runs one subcommand. Diagnostics go to `log`; failures are reported there as
// "error: ..." and yield a nonzero status.
int run_command(const CommandSpec& spec, std::ostream& log);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace behavseg::cli
