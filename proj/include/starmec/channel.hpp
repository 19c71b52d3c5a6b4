#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "starmec/model.hpp"

namespace starmec {

// One channel realization. g_mat(m, n) couples surface element m with AP antenna n.
struct ChannelSet {
  std::vector<CVec> h_d;  // user -> AP, length N each
  std::vector<CVec> h_s;  // user -> surface, length M each
  CMat g_mat;             // surface -> AP, M x N
  std::vector<Space> spaces;
  std::vector<Vec3> user_pos;

  int num_users() const { return static_cast<int>(h_d.size()); }
  int n_antennas() const { return static_cast<int>(g_mat.cols()); }
  int n_elements() const { return static_cast<int>(g_mat.rows()); }
};

// T0 (d / 1 m)^(-alpha), T0 = 10^(t0_db / 10). Throws std::domain_error for d < 1 m.
double path_loss(double d, double alpha, double t0_db);

// Half-wavelength ULA response exp(j pi f i), i = 0..n-1.
CVec steering_vector(int n, double spatial_freq);

// sqrt(kappa / (1 + kappa)) LoS + sqrt(1 / (1 + kappa)) NLoS, NLoS ~ CN(0, 1) i.i.d.
// NLoS entries are drawn row by row.
CMat gen_rician(int rows, int cols, double kappa, const CMat& los, std::mt19937_64& rng);

// Direction cosine of (to - from) along the array axis (y axis) for both arrays.
double spatial_frequency(const Vec3& from, const Vec3& to);

// Independent stream per (seed, link tag, index). Sub-streams never depend on
// M, N or K, so growing the surface or the array extends earlier draws as a prefix.
std::mt19937_64 stream_for(std::uint64_t seed, std::uint32_t tag, std::uint32_t index);

ChannelSet sample_channels(const SystemConfig& cfg, std::uint64_t seed);

// g_k = h_{d,k} + G^H Theta_x h_{s,k}, x the space of user k.
CVec effective_channel(const ChannelSet& cs, const StarRisState& ris, int k);
std::vector<CVec> effective_channels(const ChannelSet& cs, const StarRisState& ris);

// Copy holding only the listed users (order preserved).
ChannelSet select_users(const ChannelSet& cs, const std::vector<int>& users);

}  // namespace starmec
