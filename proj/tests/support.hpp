#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "starmec/beamform.hpp"
#include "starmec/channel.hpp"
#include "starmec/model.hpp"

namespace starmec::testing {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

inline CVec random_cvec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = cdouble(g(rng), g(rng));
  return v;
}

inline CMat random_cmat(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = cdouble(g(rng), g(rng));
  return m;
}

inline CMat random_psd(int n, int rank, std::mt19937_64& rng) {
  const CMat f = random_cmat(n, rank, rng);
  return f * f.adjoint();
}

// Random phases and energy split; MS states get a random binary split.
inline StarRisState random_state(int m, Protocol p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVec pt(m), pr(m), rt(m);
  for (int i = 0; i < m; ++i) {
    pt(i) = 2.0 * std::numbers::pi * u(rng);
    pr(i) = 2.0 * std::numbers::pi * u(rng);
    rt(i) = p == Protocol::kModeSwitching ? (u(rng) < 0.5 ? 0.0 : 1.0) : u(rng);
  }
  RVec rr = RVec::Ones(m) - rt;
  return StarRisState(pt, pr, rt, rr, p);
}

inline EnergyPartition random_partition(int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> a(static_cast<std::size_t>(k));
  for (auto& x : a) x = u(rng);
  return EnergyPartition(a);
}

inline BeamformerSet random_beamformers(int k, int n, std::mt19937_64& rng) {
  BeamformerSet bf;
  for (int i = 0; i < k; ++i) bf.v.push_back(random_cvec(n, rng));
  return bf;
}

// sum_{l != k} p_l g_l g_l^H + sigma^2 I, assembled directly.
inline CMat interference_matrix(int k, const std::vector<CVec>& g, const RVec& p, double s2) {
  const int n = static_cast<int>(g[0].size());
  CMat b = s2 * CMat::Identity(n, n);
  for (std::size_t l = 0; l < g.size(); ++l)
    if (static_cast<int>(l) != k) b += p(static_cast<int>(l)) * g[l] * g[l].adjoint();
  return b;
}

}  // namespace starmec::testing
