#pragma once

#include <vector>

#include "starmec/channel.hpp"
#include "starmec/model.hpp"

namespace starmec {

struct RateBreakdown {
  std::vector<double> sinr;
  std::vector<double> offload_bps;
  std::vector<double> local_bps;
  std::vector<double> cpu_freq_hz;

  double total() const;
};

// gain(k, j) = |v_k^H g_j|^2 and noise(k) = sigma^2 ||v_k||^2 for fixed beamformers
// and effective channels. Every rate expression downstream is built on these.
struct LinkGains {
  RMat gain;
  RVec noise;
};

LinkGains link_gains(const BeamformerSet& bf, const std::vector<CVec>& g, double noise_power);

RVec transmit_powers(const EnergyPartition& a, const SystemConfig& cfg);

// gamma_k from precomputed gains. Throws std::invalid_argument for a zero beamformer.
double sinr_from_gains(int k, const LinkGains& lg, const RVec& powers);

double sinr(int k, const BeamformerSet& bf, const ChannelSet& cs, const StarRisState& ris,
            const EnergyPartition& a, const SystemConfig& cfg);

// B log2(1 + sinr).
double offload_rate(double sinr_k, double bandwidth_hz);

// f_k / C_k with f_k = ((1 - a_k) E_k / (V kappa_k))^(1/3).
double local_rate(double a_k, double energy_j, double duration_s, double kappa_k,
                  double cycles_per_bit);
double cpu_frequency(double a_k, double energy_j, double duration_s, double kappa_k);

RateBreakdown evaluate_rates(const BeamformerSet& bf, const ChannelSet& cs,
                             const StarRisState& ris, const EnergyPartition& a,
                             const SystemConfig& cfg);

double objective(const BeamformerSet& bf, const ChannelSet& cs, const StarRisState& ris,
                 const EnergyPartition& a, const SystemConfig& cfg);

}  // namespace starmec
