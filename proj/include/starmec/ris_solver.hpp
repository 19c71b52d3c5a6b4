#pragma once

#include <optional>
#include <vector>

#include "starmec/channel.hpp"
#include "starmec/model.hpp"

namespace starmec {

// Per-(k, j) data of the lifted rate expression
//   |v_k^H g_j|^2 = Tr(Q_{k,j} Psi_x) + |d_{k,j}|^2,  x = space of user j,
// with Q_{k,j} = [h^H h, h^H d; d^* h, 0], h = v_k^H G^H diag(h_{s,j}), d = v_k^H h_{d,j}.
struct LiftedCoefficients {
  int n_elements = 0;
  std::vector<Space> spaces;
  std::vector<CMat> q;  // row-major K x K, see at()
  CMat d;               // d(k, j)
  RVec noise;           // sigma^2 ||v_k||^2
  RVec powers;          // p_j

  int num_users() const { return static_cast<int>(spaces.size()); }
  const CMat& at(int k, int j) const { return q[static_cast<std::size_t>(k * num_users() + j)]; }
};

LiftedCoefficients build_lifted(const ChannelSet& cs, const BeamformerSet& bf,
                                const EnergyPartition& a, const SystemConfig& cfg);

// Psi_x is (M+1) x (M+1): diag(Psi_x) = [rho_x; 1].
struct LiftedRisVariable {
  CMat psi_t;
  CMat psi_r;
  RVec rho_t;
  RVec rho_r;

  const CMat& psi(Space s) const { return s == Space::kTransmit ? psi_t : psi_r; }
};

// Psi_x = phi_x phi_x^H with phi_x = [sqrt(rho_x) e^{j theta_x}; 1].
LiftedRisVariable lift_state(const StarRisState& state);

struct RateTerms {
  RVec f1;  // log2(sum_j p_j (Tr(Q_kj Psi) + |d_kj|^2) + noise_k)
  RVec f2;  // same sum without j = k
};

RateTerms rate_terms(const LiftedCoefficients& lc, const CMat& psi_t, const CMat& psi_r);

// sum_k F1_k - F2_k = sum_k log2(1 + gamma_k).
double lifted_rate_objective(const LiftedCoefficients& lc, const CMat& psi_t,
                             const CMat& psi_r);

// First-order upper bound of F2_k around an anchor:
//   F2_k(anchor) + <grad_x, Psi_x - anchor_x> summed over both spaces.
struct F2Linearization {
  RVec value;           // F2_k(anchor)
  RVec denominator;     // argument of the log at the anchor
  std::vector<CMat> grad_t;
  std::vector<CMat> grad_r;
  CMat anchor_t;
  CMat anchor_r;

  double evaluate(int k, const CMat& psi_t, const CMat& psi_r) const;
};

F2Linearization linearize_f2(const LiftedCoefficients& lc, const CMat& anchor_t,
                             const CMat& anchor_r);

// Tr(Psi) - Upsilon(Psi; anchor) where Upsilon linearizes the spectral norm at the
// anchor with subgradient z z^H. Equals Tr(Psi) - z^H Psi z.
double rank_one_surrogate(const CMat& psi, const CMat& anchor);

// rho - Omega(rho; anchor), Omega the tangent of rho^2 at the anchor.
// Throws std::domain_error if an entry lies outside [0, 1].
RVec binary_surrogate(const RVec& rho, const RVec& anchor);

struct RisSolveOptions {
  Protocol protocol = Protocol::kEnergySplitting;
  double rank_tol = 3.1e-3;
  double binary_tol = 1e-3;
  // Fixed transmit split per element (conventional-surface and time-split baselines).
  std::optional<RVec> frozen_rho_t;
  int max_iters = 400;  // Newton steps of the barrier method, all stages together
  double tol = 1e-6;    // duality gap bound on the surrogate, bit/s/Hz
  int dc_max_iters = 20;
  double dc_rel_tol = 1e-5;
};

RisSolveOptions ris_options(const SystemConfig& cfg);

struct RisSubproblemResult {
  LiftedRisVariable solution;
  double surrogate = 0.0;         // sum_k F1_k - F2hat_k at the solution
  double anchor_surrogate = 0.0;  // same at the anchor (= true objective there)
  double primal_residual = 0.0;  // largest diagonal constraint violation before cleanup
  double dual_residual = 0.0;    // final barrier gap bound
  int iterations = 0;
  bool converged = false;
  bool kept_anchor = false;  // no feasible improvement found
};

// Maximizes sum_k F1_k(Psi) - F2hat_k(Psi; anchor) jointly over (Psi_T, Psi_R) subject
// to PSD, diag(Psi_x) = [rho_x; 1], rho_t + rho_r = 1, rho in [0, 1], the rank surrogate
// cap per matrix and, for MS, the binary surrogate cap per element. Solved by a
// log-barrier method whose Newton systems are reduced to the constraint and rank-one
// directions. The returned point is feasible and never worse than the anchor. Throws std::invalid_argument when the
// anchor itself is infeasible.
RisSubproblemResult solve_ris_subproblem(const LiftedCoefficients& lc,
                                         const RisSolveOptions& opts,
                                         const LiftedRisVariable& anchor);

RisSubproblemResult solve_ris_subproblem(const LiftedCoefficients& lc, const SystemConfig& cfg,
                                         const LiftedRisVariable& anchor);

struct DcResult {
  LiftedRisVariable solution;
  std::vector<double> trace;           // lifted rate objective, starting at the init
  std::vector<double> rank_residuals;  // max over spaces of Tr - lambda_max, per iterate
  int iterations = 0;
  int unconverged_inner = 0;
  double worst_inner_residual = 0.0;
};

// Repeated linearize/solve until relative improvement < dc_rel_tol or dc_max_iters.
DcResult dc_outer_loop(const LiftedCoefficients& lc, const RisSolveOptions& opts,
                       const LiftedRisVariable& init);

// Principal eigenvector of each Psi, normalized so its last entry is 1. Throws
// std::runtime_error when that entry is below 1e-6 in magnitude.
StarRisState extract_state(const LiftedRisVariable& lifted, Protocol protocol);

// Largest |rho_t + rho_r - 1| over elements.
double coupling_residual(const LiftedRisVariable& lifted);
double binary_gap(const RVec& rho);  // max_m min(rho, 1 - rho)

}  // namespace starmec
