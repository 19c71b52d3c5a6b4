#include "starmec/metrics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace starmec {

double RateBreakdown::total() const { return total_objective(offload_bps, local_bps); }

LinkGains link_gains(const BeamformerSet& bf, const std::vector<CVec>& g, double noise_power) {
  const auto k_users = static_cast<Eigen::Index>(g.size());
  if (static_cast<Eigen::Index>(bf.v.size()) != k_users) {
    throw std::invalid_argument("link_gains: beamformer/user count mismatch");
  }
  LinkGains lg{RMat(k_users, k_users), RVec(k_users)};
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const CVec& v = bf.v[k];
    lg.noise(k) = noise_power * v.squaredNorm();
    for (Eigen::Index j = 0; j < k_users; ++j) lg.gain(k, j) = std::norm(v.dot(g[j]));
  }
  return lg;
}

RVec transmit_powers(const EnergyPartition& a, const SystemConfig& cfg) {
  RVec p(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    p(static_cast<Eigen::Index>(k)) =
        transmit_power(a[k], cfg.energy_budgets_j.at(k), cfg.slot_length_s);
  }
  return p;
}

double sinr_from_gains(int k, const LinkGains& lg, const RVec& powers) {
  if (!(lg.noise(k) > 0.0)) {
    throw std::invalid_argument("sinr: zero beamformer for user " + std::to_string(k));
  }
  double interference = 0.0;
  for (Eigen::Index l = 0; l < powers.size(); ++l) {
    if (l != k) interference += powers(l) * lg.gain(k, l);
  }
  return powers(k) * lg.gain(k, k) / (interference + lg.noise(k));
}

double sinr(int k, const BeamformerSet& bf, const ChannelSet& cs, const StarRisState& ris,
            const EnergyPartition& a, const SystemConfig& cfg) {
  const auto g = effective_channels(cs, ris);
  return sinr_from_gains(k, link_gains(bf, g, cfg.noise_power_w), transmit_powers(a, cfg));
}

double offload_rate(double sinr_k, double bandwidth_hz) {
  return bandwidth_hz * std::log1p(sinr_k) / std::numbers::ln2;
}

double cpu_frequency(double a_k, double energy_j, double duration_s, double kappa_k) {
  if (!(a_k >= 0.0 && a_k <= 1.0)) throw std::domain_error("local_rate: a outside [0, 1]");
  return std::cbrt((1.0 - a_k) * energy_j / (duration_s * kappa_k));
}

double local_rate(double a_k, double energy_j, double duration_s, double kappa_k,
                  double cycles_per_bit) {
  return cpu_frequency(a_k, energy_j, duration_s, kappa_k) / cycles_per_bit;
}

RateBreakdown evaluate_rates(const BeamformerSet& bf, const ChannelSet& cs,
                             const StarRisState& ris, const EnergyPartition& a,
                             const SystemConfig& cfg) {
  const auto g = effective_channels(cs, ris);
  const LinkGains lg = link_gains(bf, g, cfg.noise_power_w);
  const RVec p = transmit_powers(a, cfg);
  RateBreakdown rb;
  for (int k = 0; k < cs.num_users(); ++k) {
    const double s = sinr_from_gains(k, lg, p);
    rb.sinr.push_back(s);
    rb.offload_bps.push_back(offload_rate(s, cfg.bandwidth_hz));
    const double f = cpu_frequency(a[k], cfg.energy_budgets_j[k], cfg.compute_duration_s,
                                   cfg.capacitance_coeff[k]);
    rb.cpu_freq_hz.push_back(f);
    rb.local_bps.push_back(f / cfg.cycles_per_bit[k]);
  }
  return rb;
}

double objective(const BeamformerSet& bf, const ChannelSet& cs, const StarRisState& ris,
                 const EnergyPartition& a, const SystemConfig& cfg) {
  return evaluate_rates(bf, cs, ris, a, cfg).total();
}

}  // namespace starmec
