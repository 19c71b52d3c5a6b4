#pragma once

#include <vector>

#include "starmec/channel.hpp"
#include "starmec/metrics.hpp"
#include "starmec/model.hpp"

namespace starmec {

// Solvers keep a_k <= 1 - kEnergyClamp; the local-rate slope diverges at a = 1.
inline constexpr double kEnergyClamp = 1e-9;

// Everything the energy block needs once v and the surface are fixed:
//   R_{k,1}(a) = B log2(noise_k + sum_j c_kj a_j),  R_{k,2} the same without j = k,
//   local_k(a) = local_coef_k (1 - a_k)^(1/3).
struct EnergyProblem {
  RMat c;           // c_kj = (E_j / L) |v_k^H g_j|^2
  RVec noise;       // sigma^2 ||v_k||^2
  RVec local_coef;  // (E_k / (V kappa_k))^(1/3) / C_k
  double bandwidth_hz = 1.0;

  int num_users() const { return static_cast<int>(noise.size()); }
};

EnergyProblem make_energy_problem(const LinkGains& lg, const SystemConfig& cfg);
EnergyProblem make_energy_problem(const BeamformerSet& bf, const ChannelSet& cs,
                                  const StarRisState& ris, const SystemConfig& cfg);

struct SplitRates {
  RVec r1;
  RVec r2;
};

// R_{k,1} - R_{k,2} is the offload rate of user k.
SplitRates split_rate_terms(const EnergyProblem& ep, const RVec& a);

// Sum of offload and local rates.
double energy_objective(const EnergyProblem& ep, const RVec& a);

// Tangent of R_{k,2} at the anchor: value(k) + gradient.row(k) (a - anchor).
struct R2Linearization {
  RVec value;
  RMat gradient;  // dR_{k,2}/da_i
  RVec anchor;

  double evaluate(int k, const RVec& a) const;
};

R2Linearization linearize_r2(const EnergyProblem& ep, const RVec& anchor);

struct EnergyOptions {
  int max_iters = 200;
  double kkt_tol = 1e-7;  // on the objective scaled by 1 / B
  int dc_max_iters = 50;
  double dc_rel_tol = 1e-6;
};

struct EnergySolveResult {
  RVec a;
  double surrogate = 0.0;         // sum_k R_{k,1} - Rhat_{k,2} + local, bits/s
  double anchor_surrogate = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Projected Newton ascent on [0, 1 - kEnergyClamp]^K.
EnergySolveResult solve_energy_subproblem(const EnergyProblem& ep, const RVec& anchor,
                                          const EnergyOptions& opts = {});

struct EnergyDcState {
  RVec a_current;
  RMat r2_gradient;
  std::vector<double> obj_trace;  // true objective, starting at the init
  int unconverged_inner = 0;
  double worst_kkt = 0.0;
};

EnergyDcState dc_energy_loop(const EnergyProblem& ep, const RVec& init,
                             const EnergyOptions& opts = {});

}  // namespace starmec
