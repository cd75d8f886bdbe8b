#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "noisylab/experiment_spec.hpp"
#include "noisylab/report.hpp"

namespace fs = std::filesystem;
using noisylab::ExperimentSpec;

namespace {

void emit_error(int exit_code, const std::string& field, const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"exit_code", exit_code}, {"field", field}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

int cmd_run(const std::string& spec_path, const std::vector<std::string>& overrides) {
  ExperimentSpec spec;
  try {
    spec = noisylab::load_spec_file(spec_path);
    spec = noisylab::apply_overrides(spec, overrides);
  } catch (const noisylab::SpecError& e) {
    emit_error(2, e.field(), e.what());
    return 2;
  }
  try {
    return noisylab::run_spec(spec, std::cout);
  } catch (const std::exception& e) {
    emit_error(1, "", e.what());
    return 1;
  }
}

struct SweepCell {
  std::vector<std::string> assignments;
  std::string label;
};

std::vector<SweepCell> expand_grid(const std::vector<std::string>& params) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const std::string& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0)
      throw noisylab::SpecError(p, "grid entry must look like key=v1,v2,...");
    const std::string key = p.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream ss(p.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) values.push_back(v);
    if (values.empty()) throw noisylab::SpecError(p, "grid entry has no values");
    axes.emplace_back(key, values);
  }

  std::vector<SweepCell> cells{{{}, ""}};
  for (const auto& [key, values] : axes) {
    std::vector<SweepCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        SweepCell c = cell;
        c.assignments.push_back(key + "=" + v);
        std::string short_key = key.substr(key.rfind('.') + 1);
        c.label += (c.label.empty() ? "" : "__") + short_key + "_" + v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

bool cell_complete(const ExperimentSpec& spec) {
  const std::string root = noisylab::resolve_output_dir(spec.output_dir);
  for (auto seed : spec.seeds)
    if (!fs::exists(root + "/seed_" + std::to_string(seed) + "/summary.json")) return false;
  return true;
}

int cmd_sweep(const std::string& spec_path, const std::vector<std::string>& overrides,
              const std::vector<std::string>& params, int jobs) {
  ExperimentSpec base;
  std::vector<SweepCell> cells;
  try {
    base = noisylab::load_spec_file(spec_path);
    base = noisylab::apply_overrides(base, overrides);
    cells = expand_grid(params);
    // Validate every cell up front so schema errors surface before any run.
    for (auto& cell : cells) {
      ExperimentSpec s = noisylab::apply_overrides(base, cell.assignments);
      (void)s;
    }
  } catch (const noisylab::SpecError& e) {
    emit_error(2, e.field(), e.what());
    return 2;
  }

  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  std::mutex io_mutex;

  auto worker = [&]() {
    while (true) {
      const int idx = next.fetch_add(1);
      if (idx >= static_cast<int>(cells.size())) return;
      const SweepCell& cell = cells[idx];
      ExperimentSpec spec = noisylab::apply_overrides(base, cell.assignments);
      if (!cell.label.empty()) spec.output_dir += "/cell_" + cell.label;
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "[" << idx + 1 << "/" << cells.size() << "] "
                  << (cell.label.empty() ? "(base)" : cell.label);
        if (cell_complete(spec)) {
          std::cout << " — already complete, skipping\n";
        } else {
          std::cout << "\n";
        }
      }
      if (cell_complete(spec)) continue;
      std::ostringstream log;
      int rc = 1;
      try {
        rc = noisylab::run_spec(spec, log);
      } catch (const std::exception& e) {
        log << "cell failed: " << e.what() << "\n";
      }
      if (rc != 0) ++failures;
      std::lock_guard<std::mutex> lock(io_mutex);
      std::cout << log.str();
    }
  };

  jobs = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  if (failures > 0) {
    emit_error(1, "", std::to_string(failures.load()) + " sweep cell(s) failed");
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisylab: label-noise learning experiments with GMM and prototype cleaners"};
  app.require_subcommand(1);

  std::string spec_path;
  std::vector<std::string> overrides;
  std::vector<std::string> grid_params;
  std::vector<std::string> report_dirs;
  std::string report_out;
  int jobs = 1;

  auto add_spec_opts = [&](CLI::App* cmd) {
    cmd->add_option("spec", spec_path, "experiment spec (JSON)")->required();
    cmd->add_option("--set", overrides,
                    "override a spec field, dotted path (e.g. --set trainer.tau=0.6)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment per seed");
  add_spec_opts(run_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Cartesian hyperparameter sweep");
  add_spec_opts(sweep_cmd);
  sweep_cmd->add_option("--param", grid_params,
                        "grid axis as key=v1,v2,... (e.g. --param trainer.tau=0.5,0.6,0.7)");
  sweep_cmd->add_option("--jobs", jobs, "parallel sweep cells")->check(CLI::PositiveNumber);

  CLI::App* report_cmd = app.add_subcommand("report", "summarize metrics directories into CSV");
  report_cmd->add_option("dirs", report_dirs, "metrics directories")->required();
  report_cmd->add_option("--out-dir", report_out, "write CSV files here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error(2, "", e.what());
    return 2;
  }

  if (run_cmd->parsed()) return cmd_run(spec_path, overrides);
  if (sweep_cmd->parsed()) return cmd_sweep(spec_path, overrides, grid_params, jobs);
  if (report_cmd->parsed()) {
    noisylab::ReportOptions opts;
    opts.input_dirs = report_dirs;
    opts.out_dir = report_out;
    return noisylab::write_reports(opts, std::cout, std::cerr);
  }
  return 2;
}
