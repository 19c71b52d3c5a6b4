#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "starmec/bcd.hpp"
#include "starmec/beamform.hpp"
#include "starmec/channel.hpp"
#include "starmec/energy.hpp"
#include "starmec/experiments.hpp"
#include "starmec/io.hpp"
#include "starmec/ris_solver.hpp"

using namespace starmec;

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::string protocol;
  std::string channels;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "System configuration JSON (defaults if omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Channel seed");
  cmd->add_option("--protocol", a.protocol, "Override the surface protocol")
      ->check(CLI::IsMember({"es", "ms"}, CLI::ignore_case));
  cmd->add_option("--channels", a.channels, "Load a channel dump instead of sampling")
      ->check(CLI::ExistingFile);
}

SystemConfig load_config(const CommonArgs& a) {
  SystemConfig cfg = a.config.empty() ? make_default_config()
                                      : io::config_from_json(io::read_file(a.config));
  if (!a.protocol.empty()) cfg.protocol = parse_protocol(a.protocol);
  cfg.validate();
  return cfg;
}

ChannelSet load_channels(const CommonArgs& a, const SystemConfig& cfg) {
  if (!a.channels.empty()) return io::channels_from_json(io::read_file(a.channels));
  return sample_channels(cfg, a.seed);
}

ResultRow to_row(Scheme s, const SolveReport& rep, const SystemConfig& cfg, std::uint64_t seed) {
  ResultRow row;
  row.scheme = s;
  row.value = cfg.n_elements;
  row.seed = seed;
  row.objective = rep.objective;
  row.offload_bps = rep.per_user_offload_rate;
  row.local_bps = rep.per_user_local_rate;
  row.iterations = rep.iterations;
  row.wall_time_s = rep.wall_time_s;
  return row;
}

void emit(const SolveReport& rep, Scheme s, const SystemConfig& cfg, std::uint64_t seed,
          const std::string& out, const std::string& report) {
  std::ostringstream csv;
  write_results_csv(csv, {to_row(s, rep, cfg, seed)}, cfg.num_users());
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    io::write_file(out, csv.str());
  }
  if (!report.empty()) io::write_file(report, io::report_to_json(rep));
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << rep.scheme << ": objective " << format_real(rep.objective) << " bit/s after "
            << rep.iterations << " iterations (" << format_real(rep.wall_time_s) << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STAR-RIS assisted MEC computation-rate optimizer"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_out;
  std::string run_report;
  std::string run_dump;
  auto* run = app.add_subcommand("run", "Optimize one channel realization (ES or MS)");
  add_common(run, run_args);
  run->add_option("--out", run_out, "Result CSV (stdout if omitted)");
  run->add_option("--report", run_report, "Full solve report JSON");
  run->add_option("--dump-channels", run_dump, "Write the channel realization JSON");

  std::string sweep_spec;
  std::string sweep_out;
  std::string sweep_summary;
  std::string sweep_timing;
  std::optional<int> sweep_threads;
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over elements or antennas");
  sweep->add_option("--spec", sweep_spec, "Sweep specification JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Result CSV")->required();
  sweep->add_option("--summary", sweep_summary, "Per (scheme, value) summary CSV");
  sweep->add_option("--timing", sweep_timing, "Wall-time sidecar CSV");
  sweep->add_option("--threads", sweep_threads, "Worker threads (overrides the spec)");

  CommonArgs base_args;
  std::string base_kind;
  std::string base_out;
  std::string base_report;
  auto* baseline = app.add_subcommand("baseline", "Run one comparison scheme");
  add_common(baseline, base_args);
  baseline->add_option("--kind", base_kind, "conventional | zf | equal-energy | equal-time")
      ->required();
  baseline->add_option("--out", base_out, "Result CSV (stdout if omitted)");
  baseline->add_option("--report", base_report, "Full solve report JSON");

  CommonArgs exp_args;
  std::string exp_kind = "ris";
  std::string exp_out;
  bool exp_solve = false;
  auto* exp = app.add_subcommand("export-instance",
                                 "Dump a surface or energy subproblem instance as JSON");
  add_common(exp, exp_args);
  exp->add_option("--kind", exp_kind, "ris | energy")->check(CLI::IsMember({"ris", "energy"}));
  exp->add_option("--out", exp_out, "Output JSON")->required();
  exp->add_flag("--solve", exp_solve, "Also store this library's solution");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      const SystemConfig cfg = load_config(run_args);
      const ChannelSet cs = load_channels(run_args, cfg);
      if (!run_dump.empty()) io::write_file(run_dump, io::channels_to_json(cs, run_args.seed));
      const SolveReport rep = optimize(cs, cfg, run_args.seed);
      const Scheme s = cfg.protocol == Protocol::kEnergySplitting ? Scheme::kEs : Scheme::kMs;
      emit(rep, s, cfg, run_args.seed, run_out, run_report);
    } else if (*sweep) {
      SweepSpec spec = io::sweep_spec_from_json(io::read_file(sweep_spec));
      if (sweep_threads) spec.threads = *sweep_threads;
      const auto rows = run_sweep(spec);
      std::ostringstream csv;
      write_results_csv(csv, rows, spec.base_config.num_users());
      io::write_file(sweep_out, csv.str());
      if (!sweep_timing.empty()) {
        std::ostringstream t;
        write_timing_csv(t, rows);
        io::write_file(sweep_timing, t.str());
      }
      const auto summary = summarize(rows);
      std::ostringstream s;
      write_summary_csv(s, summary);
      if (sweep_summary.empty()) {
        std::cout << s.str();
      } else {
        io::write_file(sweep_summary, s.str());
      }
      int failed = 0;
      for (const auto& r : rows) {
        if (!r.ok) {
          ++failed;
          std::cerr << "error: " << to_string(r.scheme) << " value " << r.value
                    << " realization " << r.realization << ": " << r.error << '\n';
        }
      }
      if (failed > 0) std::cerr << failed << " of " << rows.size() << " runs failed\n";
    } else if (*baseline) {
      const SystemConfig cfg = load_config(base_args);
      const ChannelSet cs = load_channels(base_args, cfg);
      const Baseline kind = parse_baseline(base_kind);
      const SolveReport rep = run_baseline(kind, cs, cfg);
      emit(rep, parse_scheme(to_string(kind)), cfg, base_args.seed, base_out, base_report);
    } else if (*exp) {
      const SystemConfig cfg = load_config(exp_args);
      const ChannelSet cs = load_channels(exp_args, cfg);
      const StarRisState state = StarRisState::initial(cfg.n_elements, cfg.protocol);
      const EnergyPartition a = EnergyPartition::uniform(cfg.num_users(), 0.5);
      const BeamformerSet bf = solve_all_beamformers(cs, state, a, cfg);
      if (exp_kind == "ris") {
        const LiftedCoefficients lc = build_lifted(cs, bf, a, cfg);
        const RisSolveOptions opts = ris_options(cfg);
        const LiftedRisVariable anchor = lift_state(state);
        std::optional<RisSubproblemResult> res;
        if (exp_solve) res = solve_ris_subproblem(lc, opts, anchor);
        io::write_file(exp_out,
                       io::ris_instance_to_json(lc, opts, anchor, res ? &*res : nullptr));
      } else {
        const EnergyProblem ep = make_energy_problem(bf, cs, state, cfg);
        const RVec anchor = RVec::Constant(cfg.num_users(), 0.5);
        std::optional<EnergySolveResult> res;
        if (exp_solve) res = solve_energy_subproblem(ep, anchor);
        io::write_file(exp_out, io::energy_instance_to_json(ep, anchor, res ? &*res : nullptr));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
