/*
 * Copyright 2026 The LC-DPF Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// lcsim: run likelihood-consensus tracking experiments from the command line.
//
//   lcsim run --method lc-dpf --runs 20 --out results/
//   lcsim topology --seed 7 --out results/
//   lcsim table1 --runs 100 --out results/

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lc/harness.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<int> runs;
  std::uint64_t seed = 1;
  std::optional<int> particles;
  std::optional<int> iterations;
  bool exact_sums = false;
  std::string out = "lcsim_out";
  int threads = 1;
  std::string topology_path;
};

void add_common(CLI::App* app, CommonFlags& f, bool filters) {
  app->add_option("--config", f.config_path, "Scenario JSON file")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--out", f.out, "Output directory");
  if (!filters) return;
  app->add_option("--runs", f.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  app->add_option("--particles", f.particles, "Particles J")
      ->check(CLI::PositiveNumber);
  app->add_option("--iterations", f.iterations, "Consensus iterations I")
      ->check(CLI::NonNegativeNumber);
  app->add_flag("--exact-sums", f.exact_sums,
                "Replace consensus by exact network-wide sums");
  app->add_option("--threads", f.threads, "Worker threads over runs")
      ->check(CLI::PositiveNumber);
  app->add_option("--topology", f.topology_path, "Topology JSON to use")
      ->check(CLI::ExistingFile);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

lc::ExperimentConfig make_config(const CommonFlags& f, int default_runs) {
  lc::ExperimentConfig config;
  if (!f.config_path.empty()) {
    config.scenario = lc::scenario_from_json(read_json(f.config_path));
  }
  if (f.particles) config.scenario.particles = *f.particles;
  if (f.iterations) config.scenario.consensus_iterations = *f.iterations;
  config.runs = f.runs.value_or(default_runs);
  config.seed = f.seed;
  config.exact_sums = f.exact_sums;
  config.threads = f.threads;
  if (!f.topology_path.empty()) {
    config.topology = lc::topology_from_json(read_json(f.topology_path));
  }
  return config;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

void print_reports(const std::vector<lc::MetricsReport>& reports) {
  std::printf("%-24s %8s %10s %8s %10s %8s %12s\n", "method", "ARMSE",
              "adj.ARMSE", "sigma", "adj.sigma", "loss%", "tx/step");
  for (const auto& r : reports) {
    const std::string label = r.method + (r.exact_sums ? " (exact)" : "");
    std::printf("%-24s %8s %10s %8s %10s %8.2f %12llu\n", label.c_str(),
                fmt(r.armse).c_str(), fmt(r.adjusted_armse).c_str(),
                fmt(r.sigma_armse).c_str(), fmt(r.adjusted_sigma_armse).c_str(),
                r.track_loss_percentage,
                static_cast<unsigned long long>(r.transmissions_per_step));
  }
}

int cmd_run(const CommonFlags& f, const std::string& method) {
  lc::ExperimentConfig config = make_config(f, 1);
  config.method = lc::parse_method(method);
  const lc::ExperimentResult result = lc::run_experiment(config);
  const std::vector<lc::MetricsReport> reports{result.report};
  lc::write_outputs(f.out, reports, lc::experiment_topology(config));
  print_reports(reports);
  return 0;
}

int cmd_table1(const CommonFlags& f) {
  lc::ExperimentConfig config = make_config(f, 100);
  std::vector<lc::MetricsReport> reports;
  for (lc::Method m : lc::kAllMethods) {
    config.method = m;
    std::fprintf(stderr, "running %s (%d runs)\n", lc::method_name(m).c_str(),
                 config.runs);
    reports.push_back(lc::run_experiment(config).report);
  }
  lc::write_outputs(f.out, reports, lc::experiment_topology(config));
  print_reports(reports);
  return 0;
}

int cmd_topology(const CommonFlags& f) {
  lc::ExperimentConfig config = make_config(f, 1);
  const lc::SensorNetwork net = lc::experiment_topology(config);
  std::filesystem::create_directories(f.out);
  const auto path = std::filesystem::path(f.out) / "topology.json";
  std::ofstream(path) << lc::topology_to_json(net).dump(2) << "\n";
  int edges = 0;
  for (int k = 0; k < net.size(); ++k) edges += net.degree(k);
  std::printf("sensors %d, links %d, fusion center %d, SLEM %.4f\nwrote %s\n",
              net.size(), edges / 2, net.corner_sensor(),
              lc::second_largest_eigenvalue_modulus(lc::metropolis_weights(net)),
              path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-consensus distributed particle filter simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string method = "lc-dpf";
  CLI::App* run = app.add_subcommand("run", "Run one method");
  add_common(run, run_flags, true);
  run->add_option("--method", method,
                  "cpf | cgpf | lc-dpf | lc-dgpf | r-lc-dgpf");

  CommonFlags topo_flags;
  CLI::App* topo = app.add_subcommand("topology", "Generate and export the network");
  add_common(topo, topo_flags, false);

  CommonFlags table_flags;
  CLI::App* table = app.add_subcommand("table1", "Run every method on one scenario");
  add_common(table, table_flags, true);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags, method);
    if (*topo) return cmd_topology(topo_flags);
    if (*table) return cmd_table1(table_flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lcsim: %s\n", e.what());
    return 1;
  }
  return 0;
}
