// Copyright 2026 The AF-Pipe Authors. All Rights Reserved.
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

#include "afpipe/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "afpipe/allocator.hpp"
#include "afpipe/errors.hpp"
#include "afpipe/experiment.hpp"
#include "afpipe/report.hpp"
#include "afpipe/trace_export.hpp"

namespace afpipe {
namespace {

void configure_logging() {
  if (spdlog::get("afpipe") == nullptr) {
    spdlog::set_default_logger(spdlog::stderr_logger_st("afpipe"));
  }
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("AFPIPE_LOG"); env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
  }
  spdlog::set_level(level);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  file << text;
  if (!file) throw SerializationError(fmt::format("cannot write '{}'", path));
}

struct AllocatorFlags {
  AllocatorParams params;
  std::optional<std::int64_t> attn_gpus;
  std::optional<std::int64_t> attn_nics;

  void add_search(CLI::App& cmd) {
    cmd.add_option("--radius", params.radius, "Phase 3 search radius")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--trials", params.trials, "Phase 3 trials")->check(CLI::NonNegativeNumber);
    cmd.add_option("--epsilon", params.epsilon, "relative Phase 1 band")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--seed", params.seed, "Phase 3 random seed");
    cmd.add_flag("--equal-nics", params.equal_nics, "give both groups the same NIC count");
  }
  void add_overrides(CLI::App& cmd) {
    cmd.add_option("--attn-gpus", attn_gpus, "attention GPUs (M)");
    cmd.add_option("--attn-nics", attn_nics, "attention NICs (M_a)");
  }

  // Allocator result with the explicit overrides applied on top.
  Allocation resolve(const Experiment& exp, bool needs_split) const {
    const auto& c = exp.cluster;
    auto check = [](std::string_view field, std::int64_t v, std::int64_t total) {
      if (v < 1 || v > total - 1) {
        throw ConfigError(ConfigError::Kind::kInvalidValue, std::string(field),
                          fmt::format("{} is outside [1, {}]", v, total - 1));
      }
    };
    if (attn_gpus) check("attn-gpus", *attn_gpus, c.total_gpus);
    if (attn_nics) check("attn-nics", *attn_nics, c.total_nics);
    std::int64_t M = std::max<std::int64_t>(1, c.total_gpus / 2);
    std::int64_t Ma = std::max<std::int64_t>(1, c.total_nics / 2);
    if (needs_split && !(attn_gpus && attn_nics)) {
      const Allocation best = allocate(exp, params).best;
      M = best.attn_gpus;
      Ma = best.attn_nics;
    }
    return make_allocation(attn_gpus.value_or(M), attn_nics.value_or(Ma), c.total_gpus,
                           c.total_nics, c.gpus_per_node);
  }
};

bool disaggregated(ScheduleKind kind) {
  return kind == ScheduleKind::kAfPipe || kind == ScheduleKind::kNaiveSequential;
}

int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoFeasible& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const SearchSpaceTooLarge& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    err << "simulation error: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"AF-Pipe schedule simulator and resource allocator", "afpipe"};
  app.require_subcommand(1);

  std::string config;
  std::string schedule;
  std::string trace_path;
  std::string out_path;
  std::string objective_csv;
  std::string axis;
  std::vector<double> values;
  std::vector<std::string> kinds;
  bool oracle = false;
  AllocatorFlags alloc_flags;

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate one schedule");
  auto* allocate_cmd = app.add_subcommand("allocate", "search the GPU/NIC split");
  auto* sweep_cmd = app.add_subcommand("sweep", "sweep one parameter over all schedules");
  auto* compare_cmd = app.add_subcommand("compare", "run every schedule on the same costs");
  for (auto* cmd : {simulate_cmd, allocate_cmd, sweep_cmd, compare_cmd}) {
    cmd->add_option("--config", config, "experiment config file")->required();
    cmd->add_option("--out", out_path, "output file (JSON, or CSV for sweep)");
    alloc_flags.add_search(*cmd);
  }
  for (auto* cmd : {simulate_cmd, sweep_cmd, compare_cmd}) alloc_flags.add_overrides(*cmd);
  simulate_cmd->add_option("--schedule", schedule, "afpipe|megatron1f1b|chunked|naive");
  simulate_cmd->add_option("--trace", trace_path, "trace-event JSON output");
  allocate_cmd->add_option("--objective-csv", objective_csv, "Phase 3 objective trace CSV");
  allocate_cmd->add_flag("--oracle", oracle, "also profile every feasible allocation");
  sweep_cmd->add_option("--axis", axis,
                        "seq_len|topk|ep_size|virtual_stages|attn_gpu_share")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--schedule", kinds, "schedules to include (default: all)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  }

  if (simulate_cmd->parsed()) {
    return guarded(err, [&] {
      Experiment exp = load_experiment(config);
      if (!schedule.empty()) exp.schedule_kind = parse_schedule_kind(schedule);
      const Allocation alloc = alloc_flags.resolve(exp, disaggregated(exp.schedule_kind));
      const ScheduleKind kind[] = {exp.schedule_kind};
      const RunReport report = build_report(exp, alloc, kind);
      out << format_table(report);
      if (!out_path.empty()) write_file(out_path, to_json(report).dump(2) + "\n");
      if (!trace_path.empty()) {
        write_file(trace_path, export_trace(report.outcomes.front().simulation.trace) + "\n");
      }
    });
  }
  if (allocate_cmd->parsed()) {
    return guarded(err, [&] {
      const Experiment exp = load_experiment(config);
      const AllocationReport report = allocate(exp, alloc_flags.params);
      out << format_allocation(report);
      if (oracle) {
        const auto best = brute_force_oracle(exp, kDefaultOracleCap, alloc_flags.params.equal_nics);
        out << fmt::format("oracle:  {} -> {} ms ({})\n", to_string(best.best),
                           format_ms(best.time),
                           best.time == report.t_star ? "matches" : "differs");
      }
      if (!out_path.empty()) write_file(out_path, to_json(report).dump(2) + "\n");
      if (!objective_csv.empty()) write_file(objective_csv, objective_trace_csv(report));
    });
  }
  if (sweep_cmd->parsed()) {
    return guarded(err, [&] {
      const Experiment exp = load_experiment(config);
      SweepOptions options;
      options.allocator = alloc_flags.params;
      if (!kinds.empty()) {
        options.kinds.clear();
        for (const auto& k : kinds) options.kinds.push_back(parse_schedule_kind(k));
      }
      if (alloc_flags.attn_gpus || alloc_flags.attn_nics) {
        options.fixed_allocation = alloc_flags.resolve(exp, true);
      }
      const auto rows = run_sweep(exp, parse_sweep_axis(axis), values, options);
      const std::string csv = sweep_csv(rows);
      if (out_path.empty()) {
        out << csv;
      } else {
        write_file(out_path, csv);
        out << fmt::format("wrote {} rows to {}\n", rows.size(), out_path);
      }
    });
  }
  // compare
  return guarded(err, [&] {
    const Experiment exp = load_experiment(config);
    const Allocation alloc = alloc_flags.resolve(exp, true);
    const RunReport report = build_report(exp, alloc, kAllScheduleKinds);
    out << format_comparison(report);
    if (!out_path.empty()) write_file(out_path, to_json(report).dump(2) + "\n");
  });
}

}  // namespace afpipe
