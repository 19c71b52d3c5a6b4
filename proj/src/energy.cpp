#include "starmec/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace starmec {

namespace {

constexpr double kLn2 = std::numbers::ln2;

RVec project_box(const RVec& a) { return a.cwiseMax(0.0).cwiseMin(1.0 - kEnergyClamp); }

void check_size(const EnergyProblem& ep, const RVec& a) {
  if (a.size() != ep.num_users()) throw std::invalid_argument("energy: partition length mismatch");
}

// Surrogate scaled by 1 / B, plus its gradient.
struct Scaled {
  const EnergyProblem& ep;
  const R2Linearization& lin;

  double value(const RVec& a) const {
    const double b = ep.bandwidth_hz;
    double v = 0.0;
    for (int k = 0; k < ep.num_users(); ++k) {
      v += std::log2(ep.noise(k) + ep.c.row(k).dot(a));
      v -= lin.evaluate(k, a) / b;
      v += ep.local_coef(k) * std::cbrt(1.0 - a(k)) / b;
    }
    return v;
  }

  RVec gradient(const RVec& a) const {
    const double b = ep.bandwidth_hz;
    RVec g = RVec::Zero(a.size());
    for (int k = 0; k < ep.num_users(); ++k) {
      g += ep.c.row(k).transpose() / (kLn2 * (ep.noise(k) + ep.c.row(k).dot(a)));
      g -= lin.gradient.row(k).transpose() / b;
      const double rest = 1.0 - a(k);
      g(k) -= ep.local_coef(k) / (3.0 * std::cbrt(rest * rest) * b);
    }
    return g;
  }

  RMat hessian(const RVec& a) const {
    const int n = static_cast<int>(a.size());
    RMat h = RMat::Zero(n, n);
    for (int k = 0; k < ep.num_users(); ++k) {
      const double s = ep.noise(k) + ep.c.row(k).dot(a);
      h -= ep.c.row(k).transpose() * ep.c.row(k) / (kLn2 * s * s);
      const double rest = 1.0 - a(k);
      h(k, k) -= 2.0 * ep.local_coef(k) / (9.0 * std::cbrt(rest * rest) * rest * ep.bandwidth_hz);
    }
    return h;
  }
};

}  // namespace

EnergyProblem make_energy_problem(const LinkGains& lg, const SystemConfig& cfg) {
  const auto k_users = lg.noise.size();
  EnergyProblem ep;
  ep.c = lg.gain;
  ep.noise = lg.noise;
  ep.local_coef.resize(k_users);
  ep.bandwidth_hz = cfg.bandwidth_hz;
  for (Eigen::Index j = 0; j < k_users; ++j) {
    ep.c.col(j) *= cfg.energy_budgets_j.at(j) / cfg.slot_length_s;
    ep.local_coef(j) = std::cbrt(cfg.energy_budgets_j[j] /
                                 (cfg.compute_duration_s * cfg.capacitance_coeff.at(j))) /
                       cfg.cycles_per_bit.at(j);
  }
  return ep;
}

EnergyProblem make_energy_problem(const BeamformerSet& bf, const ChannelSet& cs,
                                  const StarRisState& ris, const SystemConfig& cfg) {
  return make_energy_problem(link_gains(bf, effective_channels(cs, ris), cfg.noise_power_w), cfg);
}

SplitRates split_rate_terms(const EnergyProblem& ep, const RVec& a) {
  check_size(ep, a);
  const int k_users = ep.num_users();
  SplitRates sr{RVec(k_users), RVec(k_users)};
  for (int k = 0; k < k_users; ++k) {
    const double all = ep.noise(k) + ep.c.row(k).dot(a);
    const double others = all - ep.c(k, k) * a(k);
    sr.r1(k) = ep.bandwidth_hz * std::log2(all);
    sr.r2(k) = ep.bandwidth_hz * std::log2(others);
  }
  return sr;
}

double energy_objective(const EnergyProblem& ep, const RVec& a) {
  check_size(ep, a);
  double total = 0.0;
  for (int k = 0; k < ep.num_users(); ++k) {
    if (!(a(k) >= 0.0 && a(k) <= 1.0)) throw std::domain_error("energy: a outside [0, 1]");
    const double all = ep.noise(k) + ep.c.row(k).dot(a);
    const double sinr = ep.c(k, k) * a(k) / (all - ep.c(k, k) * a(k));
    total += ep.bandwidth_hz * std::log1p(sinr) / kLn2;
    total += ep.local_coef(k) * std::cbrt(1.0 - a(k));
  }
  return total;
}

double R2Linearization::evaluate(int k, const RVec& a) const {
  return value(k) + gradient.row(k).dot(a - anchor);
}

R2Linearization linearize_r2(const EnergyProblem& ep, const RVec& anchor) {
  check_size(ep, anchor);
  const int k_users = ep.num_users();
  R2Linearization lin{split_rate_terms(ep, anchor).r2, RMat::Zero(k_users, k_users), anchor};
  for (int k = 0; k < k_users; ++k) {
    const double den = ep.noise(k) + ep.c.row(k).dot(anchor) - ep.c(k, k) * anchor(k);
    for (int i = 0; i < k_users; ++i) {
      if (i != k) lin.gradient(k, i) = ep.bandwidth_hz * ep.c(k, i) / (kLn2 * den);
    }
  }
  return lin;
}

EnergySolveResult solve_energy_subproblem(const EnergyProblem& ep, const RVec& anchor,
                                          const EnergyOptions& opts) {
  check_size(ep, anchor);
  const R2Linearization lin = linearize_r2(ep, anchor);
  const Scaled f{ep, lin};
  const double b = ep.bandwidth_hz;

  // Projected Newton: Newton step on the free coordinates, scaled gradient on the ones
  // held at a bound, Armijo search along the projection arc.
  EnergySolveResult res;
  RVec a = project_box(anchor);
  double fa = f.value(a);
  res.anchor_surrogate = fa * b;
  const int n = static_cast<int>(a.size());
  const double hi = 1.0 - kEnergyClamp;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const RVec g = f.gradient(a);
    res.kkt_residual = (a - project_box(a + g)).cwiseAbs().maxCoeff();
    if (res.kkt_residual <= opts.kkt_tol) {
      res.converged = true;
      break;
    }
    const double band = std::min(1e-3, res.kkt_residual);
    const RMat h = f.hessian(a);
    std::vector<int> free;
    RVec d = RVec::Zero(n);
    for (int i = 0; i < n; ++i) {
      const bool held = (a(i) <= band && g(i) < 0.0) || (a(i) >= hi - band && g(i) > 0.0);
      if (held) {
        d(i) = g(i) / std::max(-h(i, i), 1e-300);
      } else {
        free.push_back(i);
      }
    }
    if (!free.empty()) {
      const int nf = static_cast<int>(free.size());
      RMat hf(nf, nf);
      RVec gf(nf);
      for (int r = 0; r < nf; ++r) {
        gf(r) = g(free[r]);
        for (int c = 0; c < nf; ++c) hf(r, c) = -h(free[r], free[c]);
      }
      const RVec df = hf.llt().solve(gf);
      for (int r = 0; r < nf; ++r) d(free[r]) = df(r);
    }
    if (!d.allFinite()) d = g;
    // Predicted gain below the resolution of f: stationary to working precision.
    const double resolution =
        64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fa));
    if (g.dot(project_box(a + d) - a) <= resolution) {
      res.converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      const RVec next = project_box(a + step * d);
      const double fn = f.value(next);
      if (std::isfinite(fn) && fn >= fa + 1e-4 * g.dot(next - a) && fn >= fa) {
        accepted = (next - a).cwiseAbs().maxCoeff() > 0.0;
        a = next;
        fa = fn;
        break;
      }
    }
    if (!accepted) break;
  }
  res.iterations = it;
  res.a = a;
  res.surrogate = fa * b;
  return res;
}

EnergyDcState dc_energy_loop(const EnergyProblem& ep, const RVec& init,
                             const EnergyOptions& opts) {
  check_size(ep, init);
  EnergyDcState st;
  st.a_current = project_box(init);
  double current = energy_objective(ep, st.a_current);
  st.obj_trace.push_back(current);
  for (int n = 0; n < opts.dc_max_iters; ++n) {
    const EnergySolveResult r = solve_energy_subproblem(ep, st.a_current, opts);
    if (!r.converged) ++st.unconverged_inner;
    st.worst_kkt = std::max(st.worst_kkt, r.kkt_residual);
    const double next = energy_objective(ep, r.a);
    if (next < current) break;
    st.a_current = r.a;
    st.obj_trace.push_back(next);
    const double gain = next - current;
    current = next;
    if (gain < opts.dc_rel_tol * std::abs(current)) break;
  }
  st.r2_gradient = linearize_r2(ep, st.a_current).gradient;
  return st;
}

}  // namespace starmec
