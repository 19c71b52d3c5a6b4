#include "starmec/bcd.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "starmec/beamform.hpp"
#include "starmec/energy.hpp"
#include "starmec/metrics.hpp"
#include "starmec/ris_solver.hpp"

namespace starmec {

namespace {

struct Plan {
  std::string scheme;
  Protocol protocol = Protocol::kEnergySplitting;
  bool zero_forcing = false;
  std::optional<double> fixed_a;
  std::optional<RVec> frozen_rho_t;
  StarRisState init;
  std::vector<double> init_a;
  bool align_start = true;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void check_dimensions(const ChannelSet& cs, const SystemConfig& cfg) {
  if (cs.num_users() != cfg.num_users() || cs.n_elements() != cfg.n_elements ||
      cs.n_antennas() != cfg.n_antennas) {
    throw std::invalid_argument("bcd: channel dimensions do not match the configuration");
  }
}

[[noreturn]] void rethrow_block(const char* block, int iteration, const std::exception& e) {
  throw std::runtime_error(std::string("bcd: ") + block + " block failed at iteration " +
                           std::to_string(iteration) + ": " + e.what());
}

StarRisState with_rho(const StarRisState& s, const RVec& rho_t, Protocol protocol) {
  return StarRisState(s.phases_t(), s.phases_r(), rho_t, RVec::Ones(rho_t.size()) - rho_t,
                      protocol);
}

double relative_gain(double next, double prev) {
  return (next - prev) / std::max(std::abs(prev), 1e-300);
}

// Phases that raise sum_k log |g_k|^2 over the users of each space, amplitudes kept.
// Minorize-maximize: reweight by 1 / |g_k|^2, then coordinate sweeps of the unit-modulus
// quadratic program max x^H R x, each of which cannot decrease it.
StarRisState aligned_phases(const ChannelSet& cs, const StarRisState& s) {
  const int m = cs.n_elements();
  RVec phases[2] = {s.phases_t(), s.phases_r()};
  for (Space space : {Space::kTransmit, Space::kReflect}) {
    const RVec amp = s.rho(space).cwiseSqrt();
    std::vector<CMat> c;
    for (int k = 0; k < cs.num_users(); ++k) {
      if (cs.spaces[k] != space) continue;
      CMat ck(cs.n_antennas(), m + 1);
      for (int e = 0; e < m; ++e) ck.col(e) = amp(e) * cs.h_s[k](e) * cs.g_mat.row(e).adjoint();
      ck.col(m) = cs.h_d[k];
      c.push_back(std::move(ck));
    }
    if (c.empty() || amp.isZero()) continue;
    RVec& theta = phases[space == Space::kTransmit ? 0 : 1];
    CVec x(m + 1);
    for (int e = 0; e < m; ++e) x(e) = std::polar(1.0, theta(e));
    x(m) = 1.0;
    for (int outer = 0; outer < 5; ++outer) {
      CMat r = CMat::Zero(m + 1, m + 1);
      for (const CMat& ck : c) r += ck.adjoint() * ck / std::max((ck * x).squaredNorm(), 1e-300);
      for (int sweep = 0; sweep < 10; ++sweep) {
        for (int e = 0; e < m; ++e) {
          const cdouble t = (r.row(e) * x).value() - r(e, e) * x(e);
          if (std::abs(t) > 0.0) x(e) = t / std::abs(t);
        }
      }
    }
    for (int e = 0; e < m; ++e) theta(e) = std::arg(x(e));
  }
  return StarRisState(phases[0], phases[1], s.rho_t(), s.rho_r(), s.protocol());
}

SolveReport run_plan(const ChannelSet& cs, const SystemConfig& cfg, const Plan& plan) {
  const auto t0 = std::chrono::steady_clock::now();
  const int k_users = cs.num_users();
  SolveReport rep;
  rep.scheme = plan.scheme;

  StarRisState state = plan.init;
  std::vector<double> a_vals = plan.init_a;
  if (plan.fixed_a) a_vals.assign(static_cast<std::size_t>(k_users), *plan.fixed_a);
  BeamformerSet bf;

  RisSolveOptions ris_opts = ris_options(cfg);
  ris_opts.protocol = plan.protocol;
  ris_opts.frozen_rho_t = plan.frozen_rho_t;
  EnergyOptions en_opts;

  std::optional<DcResult> last_dc;
  auto eval = [&](const StarRisState& s, const BeamformerSet& v, const std::vector<double>& a) {
    return objective(v, cs, s, EnergyPartition(a), cfg);
  };

  auto fit_beamformers = [&](const StarRisState& s, const std::vector<double>& a) {
    const auto g = effective_channels(cs, s);
    if (!plan.zero_forcing) {
      return solve_all_beamformers(g, transmit_powers(EnergyPartition(a), cfg), cfg.noise_power_w);
    }
    ZeroForcingResult zf = zero_forcing_beamformers(g);
    rep.zero_forcing_fallback = rep.zero_forcing_fallback || zf.least_squares;
    return std::move(zf.beamformers);
  };

  // Switching one user's offloading off removes its interference, which the blocks
  // cannot discover one at a time: with a_k = 0 the other receivers ignore user k and
  // the energy block then sees any a_k > 0 as pure loss, and vice versa.
  auto try_drop = [&](double& current) {
    bool improved = false;
    for (int k = 0; k < k_users; ++k) {
      if (a_vals[static_cast<std::size_t>(k)] == 0.0) continue;
      std::vector<double> a_off = a_vals;
      a_off[static_cast<std::size_t>(k)] = 0.0;
      const BeamformerSet bf_off = fit_beamformers(state, a_off);
      const EnergyProblem ep = make_energy_problem(bf_off, cs, state, cfg);
      const EnergyDcState en =
          dc_energy_loop(ep, Eigen::Map<const RVec>(a_off.data(), k_users), en_opts);
      std::vector<double> a_new(en.a_current.data(), en.a_current.data() + k_users);
      const double obj = eval(state, bf_off, a_new);
      if (relative_gain(obj, current) > cfg.bcd_obj_tol) {
        a_vals = std::move(a_new);
        bf = bf_off;
        current = obj;
        improved = true;
      }
    }
    return improved;
  };

  // Zero phases leave the extra elements randomly aligned, and the rank cap only lets
  // each surface step rotate them by about sqrt(eps / (M + 1)) rad.
  if (plan.align_start) {
    const StarRisState cand = aligned_phases(cs, state);
    const auto score = [&](const StarRisState& s) { return eval(s, fit_beamformers(s, a_vals), a_vals); };
    if (score(cand) > score(state)) state = cand;
  }

  double prev = -1.0;
  for (int it = 1; it <= cfg.bcd_max_iters; ++it) {
    // Beamformers.
    try {
      bf = fit_beamformers(state, a_vals);
    } catch (const std::exception& e) {
      rethrow_block("beamforming", it, e);
    }
    double current = eval(state, bf, a_vals);
    if (it == 1) rep.first_beamforming_objective = current;

    // Surface.
    try {
      const LiftedCoefficients lc = build_lifted(cs, bf, EnergyPartition(a_vals), cfg);
      DcResult dc = dc_outer_loop(lc, ris_opts, lift_state(state));
      if (dc.unconverged_inner > 0) {
        rep.warnings.push_back("iteration " + std::to_string(it) + ": " +
                               std::to_string(dc.unconverged_inner) +
                               " surface solves hit the iteration cap (worst residual " +
                               std::to_string(dc.worst_inner_residual) + ")");
      }
      StarRisState cand = extract_state(dc.solution, plan.protocol);
      double cand_obj = eval(cand, bf, a_vals);
      // MS: the binary cap spends part of the rank budget on elements that rounding
      // switches off, so the phase-only update under the current modes also competes.
      if (plan.protocol == Protocol::kModeSwitching && !plan.frozen_rho_t) {
        RisSolveOptions held = ris_opts;
        held.frozen_rho_t = state.rho_t();
        DcResult dc_held = dc_outer_loop(lc, held, lift_state(state));
        const StarRisState cand_held = extract_state(dc_held.solution, plan.protocol);
        const double held_obj = eval(cand_held, bf, a_vals);
        if (held_obj > cand_obj) {
          cand = cand_held;
          cand_obj = held_obj;
          dc = std::move(dc_held);
        }
      }
      if (cand_obj >= current) {
        state = cand;
        current = cand_obj;
      }
      last_dc = std::move(dc);
    } catch (const std::exception& e) {
      rethrow_block("surface", it, e);
    }

    // Energy partition.
    if (!plan.fixed_a) {
      try {
        const EnergyProblem ep = make_energy_problem(bf, cs, state, cfg);
        const RVec a0 = Eigen::Map<const RVec>(a_vals.data(), k_users);
        const EnergyDcState en = dc_energy_loop(ep, a0, en_opts);
        if (en.unconverged_inner > 0) {
          rep.warnings.push_back("iteration " + std::to_string(it) +
                                 ": energy solve hit the iteration cap (KKT residual " +
                                 std::to_string(en.worst_kkt) + ")");
        }
        std::vector<double> a_new(en.a_current.data(), en.a_current.data() + k_users);
        const double a_obj = eval(state, bf, a_new);
        if (a_obj >= current) {
          a_vals = std::move(a_new);
          current = a_obj;
        }
      } catch (const std::exception& e) {
        rethrow_block("energy", it, e);
      }
    }

    const bool stalled = it > 1 && relative_gain(current, prev) < cfg.bcd_obj_tol;
    if ((stalled || it == cfg.bcd_max_iters) && !plan.fixed_a) {
      try {
        if (try_drop(current)) {
          rep.objective_trace.push_back(current);
          rep.iterations = it;
          prev = current;
          continue;
        }
      } catch (const std::exception& e) {
        rethrow_block("drop", it, e);
      }
    }
    rep.objective_trace.push_back(current);
    rep.iterations = it;
    if (stalled) break;
    prev = current;
  }

  // Zero forcing is a fixed rule, not an ascent step: re-apply it to the final channels
  // so the reported beamformers null the interference they actually see.
  if (plan.zero_forcing) bf = zero_forcing_beamformers(effective_channels(cs, state)).beamformers;
  const RateBreakdown rb = evaluate_rates(bf, cs, state, EnergyPartition(a_vals), cfg);
  rep.objective = rb.total();
  rep.per_user_offload_rate = rb.offload_bps;
  rep.per_user_local_rate = rb.local_bps;
  rep.energy_partition = a_vals;
  rep.phases_t.assign(state.phases_t().begin(), state.phases_t().end());
  rep.phases_r.assign(state.phases_r().begin(), state.phases_r().end());
  rep.rho_t.assign(state.rho_t().begin(), state.rho_t().end());
  rep.rho_r.assign(state.rho_r().begin(), state.rho_r().end());
  rep.beamformers = bf;
  if (last_dc) {
    const LiftedRisVariable& lv = last_dc->solution;
    rep.rank_residuals = {rank_residual(lv.psi_t), rank_residual(lv.psi_r)};
    rep.binary_residuals = {binary_gap(lv.rho_t), binary_gap(lv.rho_r)};
    rep.coupling_residuals = {coupling_residual(lv)};
    rep.lifted_rho_t = lv.rho_t;
    const RVec rho = lv.rho_t.cwiseMax(0.0).cwiseMin(1.0);
    rep.unrounded_objective =
        eval(with_rho(state, rho, Protocol::kEnergySplitting), bf, a_vals);
  }
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

Plan base_plan(const SystemConfig& cfg, std::string scheme) {
  return Plan{std::move(scheme),
              cfg.protocol,
              false,
              std::nullopt,
              std::nullopt,
              StarRisState::initial(cfg.n_elements, cfg.protocol),
              std::vector<double>(static_cast<std::size_t>(cfg.num_users()), 0.5)};
}

SystemConfig subset_config(const SystemConfig& cfg, const std::vector<int>& users, bool transmit) {
  SystemConfig sub = cfg;
  sub.t_users = transmit ? static_cast<int>(users.size()) : 0;
  sub.r_users = transmit ? 0 : static_cast<int>(users.size());
  sub.energy_budgets_j.clear();
  sub.cycles_per_bit.clear();
  sub.capacitance_coeff.clear();
  for (int k : users) {
    sub.energy_budgets_j.push_back(cfg.energy_budgets_j.at(k));
    sub.cycles_per_bit.push_back(cfg.cycles_per_bit.at(k));
    sub.capacitance_coeff.push_back(cfg.capacitance_coeff.at(k));
  }
  // Each group owns half the slot: half the bits per second of airtime and the same
  // energy spent in L / 2, while local CPUs keep running for V.
  sub.bandwidth_hz = cfg.bandwidth_hz / 2.0;
  sub.slot_length_s = cfg.slot_length_s / 2.0;
  sub.protocol = Protocol::kModeSwitching;
  return sub;
}

SolveReport run_equal_time(const ChannelSet& cs, const SystemConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<int> t_users;
  std::vector<int> r_users;
  for (int k = 0; k < cs.num_users(); ++k) {
    (cs.spaces[k] == Space::kTransmit ? t_users : r_users).push_back(k);
  }
  SolveReport out;
  out.scheme = std::string(to_string(Baseline::kEqualTime));
  out.per_user_offload_rate.assign(static_cast<std::size_t>(cs.num_users()), 0.0);
  out.per_user_local_rate.assign(static_cast<std::size_t>(cs.num_users()), 0.0);
  out.energy_partition.assign(static_cast<std::size_t>(cs.num_users()), 0.0);
  out.rank_residuals = {0.0, 0.0};
  out.binary_residuals = {0.0, 0.0};
  out.coupling_residuals = {0.0};

  for (bool transmit : {true, false}) {
    const std::vector<int>& users = transmit ? t_users : r_users;
    if (users.empty()) continue;
    const SystemConfig sub = subset_config(cfg, users, transmit);
    const ChannelSet sub_cs = select_users(cs, users);
    Plan plan = base_plan(sub, out.scheme);
    plan.protocol = Protocol::kModeSwitching;
    const RVec split = transmit ? RVec::Ones(cfg.n_elements) : RVec::Zero(cfg.n_elements);
    plan.frozen_rho_t = split;
    plan.init = with_rho(StarRisState::initial(cfg.n_elements, Protocol::kEnergySplitting), split,
                         Protocol::kModeSwitching);
    const SolveReport half = run_plan(sub_cs, sub, plan);

    const std::size_t len = std::max(out.objective_trace.size(), half.objective_trace.size());
    std::vector<double> trace(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      const auto pick = [i](const std::vector<double>& t) {
        return t.empty() ? 0.0 : t[std::min(i, t.size() - 1)];
      };
      trace[i] = pick(out.objective_trace) + pick(half.objective_trace);
    }
    out.objective_trace = std::move(trace);
    out.objective += half.objective;
    out.first_beamforming_objective += half.first_beamforming_objective;
    out.iterations = std::max(out.iterations, half.iterations);
    for (std::size_t i = 0; i < users.size(); ++i) {
      const auto k = static_cast<std::size_t>(users[i]);
      out.per_user_offload_rate[k] = half.per_user_offload_rate[i];
      out.per_user_local_rate[k] = half.per_user_local_rate[i];
      out.energy_partition[k] = half.energy_partition[i];
    }
    for (std::size_t i = 0; i < 2; ++i) {
      out.rank_residuals[i] = std::max(out.rank_residuals[i], half.rank_residuals.at(i));
      out.binary_residuals[i] = std::max(out.binary_residuals[i], half.binary_residuals.at(i));
    }
    out.coupling_residuals[0] = std::max(out.coupling_residuals[0], half.coupling_residuals.at(0));
    (transmit ? out.phases_t : out.phases_r) = transmit ? half.phases_t : half.phases_r;
    for (const auto& w : half.warnings) {
      out.warnings.push_back(std::string(transmit ? "transmit half: " : "reflect half: ") + w);
    }
  }
  out.unrounded_objective = out.objective;
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

std::string_view to_string(Baseline b) {
  switch (b) {
    case Baseline::kConventionalRis:
      return "conventional";
    case Baseline::kZeroForcing:
      return "zf";
    case Baseline::kEqualEnergy:
      return "equal-energy";
    case Baseline::kEqualTime:
      return "equal-time";
  }
  return "unknown";
}

Baseline parse_baseline(std::string_view name) {
  const std::string n = lower(name);
  if (n == "conventional" || n == "conventional-ris" || n == "conv") {
    return Baseline::kConventionalRis;
  }
  if (n == "zf" || n == "zero-forcing") return Baseline::kZeroForcing;
  if (n == "equal-energy" || n == "ee") return Baseline::kEqualEnergy;
  if (n == "equal-time" || n == "et") return Baseline::kEqualTime;
  throw std::invalid_argument("unknown baseline '" + std::string(name) +
                              "' (expected conventional|zf|equal-energy|equal-time)");
}

RVec conventional_split(int n_elements) {
  if (n_elements <= 0 || n_elements % 2 != 0) {
    throw std::invalid_argument("conventional surface needs an even element count, got " +
                                std::to_string(n_elements));
  }
  RVec split = RVec::Ones(n_elements);
  split.head(n_elements / 2).setZero();
  return split;
}

SolveReport optimize(const ChannelSet& cs, const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_dimensions(cs, cfg);
  Plan plan = base_plan(cfg, std::string(to_string(cfg.protocol)));
  // The split-half layout competes with the default start, each also with aligned
  // phases, scored after one beamforming solve at the initial energy partition. Earlier
  // candidates win ties.
  std::vector<StarRisState> starts = {plan.init};
  if (cfg.n_elements % 2 == 0) {
    starts.push_back(with_rho(plan.init, conventional_split(cfg.n_elements), cfg.protocol));
  }
  for (std::size_t i = 0, n = starts.size(); i < n; ++i) starts.push_back(aligned_phases(cs, starts[i]));
  const EnergyPartition a(plan.init_a);
  double best = -1.0;
  for (const StarRisState& s : starts) {
    const double v = objective(solve_all_beamformers(cs, s, a, cfg), cs, s, a, cfg);
    if (v > best) {
      best = v;
      plan.init = s;
    }
  }
  plan.align_start = false;
  SolveReport rep = run_plan(cs, cfg, plan);
  rep.seed = seed;
  return rep;
}

SolveReport optimize_from(const ChannelSet& cs, const SystemConfig& cfg,
                          const StarRisState& init, const EnergyPartition& a0) {
  cfg.validate();
  check_dimensions(cs, cfg);
  if (init.n_elements() != cfg.n_elements || static_cast<int>(a0.size()) != cfg.num_users()) {
    throw std::invalid_argument("optimize_from: warm start has wrong dimensions");
  }
  if (cfg.protocol == Protocol::kModeSwitching && !init.is_valid(cfg.binary_tol)) {
    throw std::invalid_argument("optimize_from: MS warm start is not binary");
  }
  Plan plan = base_plan(cfg, std::string(to_string(cfg.protocol)));
  plan.init = with_rho(init, init.rho_t(), cfg.protocol);
  plan.init_a = a0.values();
  plan.align_start = false;
  return run_plan(cs, cfg, plan);
}

SolveReport run_baseline(Baseline kind, const ChannelSet& cs, const SystemConfig& cfg) {
  cfg.validate();
  check_dimensions(cs, cfg);
  const std::string name(to_string(kind));
  switch (kind) {
    case Baseline::kConventionalRis: {
      const RVec split = conventional_split(cfg.n_elements);
      Plan plan = base_plan(cfg, name);
      plan.protocol = Protocol::kModeSwitching;
      plan.frozen_rho_t = split;
      plan.init = with_rho(StarRisState::initial(cfg.n_elements, Protocol::kEnergySplitting),
                           split, Protocol::kModeSwitching);
      return run_plan(cs, cfg, plan);
    }
    case Baseline::kZeroForcing: {
      Plan plan = base_plan(cfg, name);
      plan.zero_forcing = true;
      SolveReport rep = run_plan(cs, cfg, plan);
      if (rep.zero_forcing_fallback) {
        rep.warnings.push_back("N < K: least-squares pseudo-inverse rows, interference not nulled");
      }
      return rep;
    }
    case Baseline::kEqualEnergy: {
      if (cfg.equal_energy_equal_budgets) {
        SystemConfig eq = cfg;
        double mean = 0.0;
        for (double e : cfg.energy_budgets_j) mean += e;
        mean /= static_cast<double>(cfg.energy_budgets_j.size());
        std::fill(eq.energy_budgets_j.begin(), eq.energy_budgets_j.end(), mean);
        return run_plan(cs, eq, base_plan(eq, name));
      }
      Plan plan = base_plan(cfg, name);
      plan.fixed_a = 0.5;
      return run_plan(cs, cfg, plan);
    }
    case Baseline::kEqualTime:
      return run_equal_time(cs, cfg);
  }
  throw std::invalid_argument("run_baseline: unknown kind");
}

}  // namespace starmec
