#include "starmec/beamform.hpp"

#include <stdexcept>

#include "starmec/metrics.hpp"

namespace starmec {

QuadraticPair make_quadratic_pair(int k, const std::vector<CVec>& g, const RVec& powers,
                                  double noise_power) {
  const auto n = g.at(k).size();
  QuadraticPair qp{powers(k) * g[k] * g[k].adjoint(),
                   noise_power * CMat::Identity(n, n)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (static_cast<int>(i) != k) qp.b_mat.noalias() += powers(i) * g[i] * g[i].adjoint();
  }
  return qp;
}

CVec solve_beamformer(const CMat& b_mat, const CVec& signal) {
  Eigen::LLT<CMat> llt(b_mat);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_beamformer: interference-plus-noise matrix is singular");
  }
  CVec v = llt.solve(signal);
  const double nrm = v.norm();
  if (!(nrm > 0.0)) throw std::runtime_error("solve_beamformer: zero solution");
  return v / nrm;
}

CVec solve_beamformer(const QuadraticPair& pair) {
  // A = p g g^H: its largest column is proportional to g.
  Eigen::Index col = 0;
  const double best = pair.a_mat.colwise().norm().maxCoeff(&col);
  if (!(best > 0.0)) throw std::invalid_argument("solve_beamformer: A is zero");
  return solve_beamformer(pair.b_mat, pair.a_mat.col(col));
}

BeamformerSet solve_all_beamformers(const std::vector<CVec>& g, const RVec& powers,
                                    double noise_power) {
  BeamformerSet bf;
  bf.v.reserve(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const QuadraticPair qp = make_quadratic_pair(static_cast<int>(k), g, powers, noise_power);
    bf.v.push_back(solve_beamformer(qp.b_mat, g[k]));
  }
  return bf;
}

BeamformerSet solve_all_beamformers(const ChannelSet& cs, const StarRisState& ris,
                                    const EnergyPartition& a, const SystemConfig& cfg) {
  return solve_all_beamformers(effective_channels(cs, ris), transmit_powers(a, cfg),
                               cfg.noise_power_w);
}

ZeroForcingResult zero_forcing_beamformers(const std::vector<CVec>& g) {
  const auto n = g.front().size();
  const auto k_users = static_cast<Eigen::Index>(g.size());
  CMat h(n, k_users);
  for (Eigen::Index k = 0; k < k_users; ++k) h.col(k) = g[k];
  ZeroForcingResult out;
  out.least_squares = n < k_users;
  // pinv(H) is K x N; v_k^H = row k, so V = pinv(H)^H.
  const CMat pinv = h.completeOrthogonalDecomposition().pseudoInverse();
  const CMat v = pinv.adjoint();
  for (Eigen::Index k = 0; k < k_users; ++k) {
    CVec col = v.col(k);
    if (!(col.norm() > 0.0)) col = g[k];
    out.beamformers.v.push_back(col);
  }
  return out;
}

}  // namespace starmec
