#pragma once

#include <vector>

#include "starmec/channel.hpp"
#include "starmec/model.hpp"

namespace starmec {

// Rayleigh quotient v^H A v / v^H B v with A = p g g^H and
// B = sum_{i != k} p_i g_i g_i^H + sigma^2 I.
struct QuadraticPair {
  CMat a_mat;
  CMat b_mat;
};

QuadraticPair make_quadratic_pair(int k, const std::vector<CVec>& g, const RVec& powers,
                                  double noise_power);

// Principal generalized eigenvector of (A, B). A has rank one, so this is
// B^{-1} g up to scale; returned with unit norm. Throws std::invalid_argument when
// A is zero and std::runtime_error when B is not positive definite.
CVec solve_beamformer(const QuadraticPair& pair);

// Same maximizer given the rank-one factor directly; valid for p_k = 0, where the
// matched filter B^{-1} g is used.
CVec solve_beamformer(const CMat& b_mat, const CVec& signal);

BeamformerSet solve_all_beamformers(const std::vector<CVec>& g, const RVec& powers,
                                    double noise_power);

BeamformerSet solve_all_beamformers(const ChannelSet& cs, const StarRisState& ris,
                                    const EnergyPartition& a, const SystemConfig& cfg);

struct ZeroForcingResult {
  BeamformerSet beamformers;
  bool least_squares = false;  // N < K: rows of the pseudo-inverse, interference not nulled
};

// v_k = k-th row of pinv([g_1 ... g_K]), returned as column vectors.
ZeroForcingResult zero_forcing_beamformers(const std::vector<CVec>& g);

}  // namespace starmec
