// Copyright 2026 the pmkt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>

#include "pmkt/kernels.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;

namespace {

struct UserScenario {
  std::string name;
  std::string description;
  std::string path;
};

std::vector<UserScenario> scan_config_dir(const std::string& dir) {
  std::vector<UserScenario> found;
  if (dir.empty() || !fs::is_directory(dir)) return found;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ini") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      const pmkt::cli::Scenario s = pmkt::cli::parse_scenario_file(f.string());
      found.push_back({s.name, s.description, f.string()});
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << '\n';
    }
  }
  return found;
}

int cmd_list(const std::string& config_dir, bool machine) {
  for (const auto& b : pmkt::cli::builtin_scenarios()) {
    if (machine) {
      std::cout << b.name << '\n';
    } else {
      std::cout << "  " << b.name;
      for (std::size_t i = std::string(b.name).size(); i < 14; ++i) std::cout << ' ';
      std::cout << b.description << '\n';
    }
  }
  for (const auto& u : scan_config_dir(config_dir)) {
    if (machine) {
      std::cout << u.name << '\n';
    } else {
      std::cout << "  " << u.name;
      for (std::size_t i = u.name.size(); i < 14; ++i) std::cout << ' ';
      std::cout << (u.description.empty() ? "(user scenario)" : u.description)
                << "  [" << u.path << "]\n";
    }
  }
  return 0;
}

int cmd_run(const std::string& target, const std::string& config_dir,
            std::uint64_t seed, bool seed_set, const std::string& out_dir,
            int threads, bool threads_set) {
  pmkt::cli::Scenario s;
  if (fs::is_regular_file(target)) {
    s = pmkt::cli::parse_scenario_file(target);
  } else if (const auto* b = pmkt::cli::find_builtin(target)) {
    s = pmkt::cli::parse_scenario_text(b->config);
  } else {
    bool found = false;
    for (const auto& u : scan_config_dir(config_dir)) {
      if (u.name == target) {
        s = pmkt::cli::parse_scenario_file(u.path);
        found = true;
        break;
      }
    }
    if (!found) {
      std::cerr << "error: no scenario or config file named '" << target
                << "' (see `pmkt list`)\n";
      return 2;
    }
  }
  if (seed_set) s.seed = seed;
  if (!out_dir.empty()) s.out_dir = out_dir;
  if (threads_set) s.threads = threads;

  const pmkt::cli::RunResult res = pmkt::cli::run_scenario(s);
  for (const auto& f : res.files_written) std::cout << f << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"power-market friction experiments: linear-quadratic control, "
               "path simulation, sensitivities, dynamic-programming regulator "
               "and the bidding game"};
  app.require_subcommand(1);

  std::string config_dir = "scenarios";
  app.add_option("--config-dir", config_dir,
                 "directory scanned for user scenario .ini files");

  auto* list_cmd = app.add_subcommand("list", "list available scenarios");
  bool machine = false;
  list_cmd->add_flag("--machine", machine, "one scenario name per line");

  auto* run_cmd = app.add_subcommand("run", "run a scenario by name or config path");
  std::string target;
  run_cmd->add_option("scenario", target, "built-in name, user scenario name, or config file path")
      ->required();
  std::uint64_t seed = 0;
  auto* seed_opt = run_cmd->add_option("--seed", seed, "override the scenario seed");
  std::string out_dir;
  run_cmd->add_option("--out", out_dir, "output directory root (default $PMKT_OUT_DIR or ./out)");
  int threads = 1;
  auto* threads_opt = run_cmd->add_option("--threads", threads, "worker threads for sweeps and paths");
  std::string format = "csv";
  run_cmd->add_option("--format", format, "output format (csv)");
  std::string kernels;
  run_cmd->add_option("--kernels", kernels,
                      "force a compute-kernel variant (scalar, avx2, neon)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list_cmd->parsed()) {
      return cmd_list(config_dir, machine);
    }
    if (format != "csv") {
      std::cerr << "error: unsupported output format '" << format << "'\n";
      return 2;
    }
    if (!kernels.empty() && !pmkt::kernels::select(kernels)) {
      std::cerr << "error: kernel variant '" << kernels
                << "' unavailable on this machine\n";
      return 2;
    }
    return cmd_run(target, config_dir, seed, seed_opt->count() > 0, out_dir,
                   threads, threads_opt->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
