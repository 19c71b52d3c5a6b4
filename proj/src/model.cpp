#include "starmec/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace starmec {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("SystemConfig: " + what);
}

RVec wrap_phases(RVec p) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (auto& x : p) {
    x = std::fmod(x, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    if (x >= kTwoPi) x = 0.0;
  }
  return p;
}

}  // namespace

std::string_view to_string(Protocol p) { return p == Protocol::kEnergySplitting ? "es" : "ms"; }

Protocol parse_protocol(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "es") return Protocol::kEnergySplitting;
  if (lower == "ms") return Protocol::kModeSwitching;
  throw std::invalid_argument("unknown protocol '" + std::string(name) + "' (expected es|ms)");
}

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

std::vector<Space> SystemConfig::spaces() const {
  std::vector<Space> out;
  out.reserve(num_users());
  for (int k = 0; k < num_users(); ++k) out.push_back(space_of(k));
  return out;
}

void SystemConfig::validate() const {
  require(n_antennas > 0, "n_antennas must be positive");
  require(n_elements > 0, "n_elements must be positive");
  require(t_users >= 1 && r_users >= 1, "t_users and r_users must be >= 1");
  const auto k = static_cast<std::size_t>(num_users());
  require(energy_budgets_j.size() == k, "energy_budgets_j needs one entry per user");
  require(cycles_per_bit.size() == k, "cycles_per_bit needs one entry per user");
  require(capacitance_coeff.size() == k, "capacitance_coeff needs one entry per user");
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0 && std::isfinite(x); });
  };
  require(positive(energy_budgets_j), "energy_budgets_j entries must be positive");
  require(positive(cycles_per_bit), "cycles_per_bit entries must be positive");
  require(positive(capacitance_coeff), "capacitance_coeff entries must be positive");
  require(bandwidth_hz > 0.0, "bandwidth_hz must be positive");
  require(noise_power_w > 0.0, "noise_power_w must be positive");
  require(slot_length_s > 0.0, "slot_length_s must be positive");
  require(compute_duration_s > 0.0, "compute_duration_s must be positive");
  require(rank_tol > 0.0 && rank_tol <= 1e-2, "rank_tol must lie in (0, 1e-2]");
  require(binary_tol > 0.0 && binary_tol <= 1e-2, "binary_tol must lie in (0, 1e-2]");
  require(bcd_max_iters > 0, "bcd_max_iters must be positive");
  require(dc_max_iters > 0, "dc_max_iters must be positive");
  require(bcd_obj_tol > 0.0, "bcd_obj_tol must be positive");
  require(geometry.region_side_m > 0.0, "geometry.region_side_m must be positive");
}

double default_rank_tol(int n_elements) { return std::min(1e-4 * (n_elements + 1), 1e-2); }

SystemConfig make_default_config(int n_elements, int n_antennas, int t_users, int r_users) {
  SystemConfig cfg;
  cfg.n_elements = n_elements;
  cfg.n_antennas = n_antennas;
  cfg.t_users = t_users;
  cfg.r_users = r_users;
  const auto k = static_cast<std::size_t>(t_users + r_users);
  cfg.energy_budgets_j.assign(k, 10.0);
  cfg.cycles_per_bit.assign(k, 200.0);
  cfg.capacitance_coeff.assign(k, 1e-25);
  cfg.rank_tol = default_rank_tol(n_elements);
  return cfg;
}

StarRisState::StarRisState(RVec phases_t, RVec phases_r, RVec rho_t, RVec rho_r,
                           Protocol protocol)
    : phases_t_(wrap_phases(std::move(phases_t))),
      phases_r_(wrap_phases(std::move(phases_r))),
      rho_t_(std::move(rho_t)),
      rho_r_(std::move(rho_r)),
      protocol_(protocol) {
  const auto m = rho_t_.size();
  if (phases_t_.size() != m || phases_r_.size() != m || rho_r_.size() != m) {
    throw std::invalid_argument("StarRisState: per-element vectors differ in length");
  }
  for (Eigen::Index i = 0; i < rho_t_.size(); ++i) {
    const double t = rho_t_(i);
    const double r = rho_r_(i);
    if (!(t >= 0.0 && t <= 1.0 && r >= 0.0 && r <= 1.0)) {
      throw std::invalid_argument("StarRisState: energy split outside [0, 1] at element " +
                                  std::to_string(i));
    }
    if (std::abs(t + r - 1.0) > 1e-8) {
      throw std::invalid_argument("StarRisState: rho_t + rho_r != 1 at element " +
                                  std::to_string(i));
    }
  }
}

StarRisState StarRisState::initial(int n_elements, Protocol protocol) {
  RVec zeros = RVec::Zero(n_elements);
  RVec rho_t(n_elements);
  for (int m = 0; m < n_elements; ++m) {
    rho_t(m) = protocol == Protocol::kEnergySplitting ? 0.5 : (m % 2 == 0 ? 1.0 : 0.0);
  }
  RVec rho_r = RVec::Ones(n_elements) - rho_t;
  return StarRisState(zeros, zeros, rho_t, rho_r, protocol);
}

CVec StarRisState::coefficients(Space s) const {
  const RVec& ph = phases(s);
  const RVec& rh = rho(s);
  CVec out(ph.size());
  for (Eigen::Index m = 0; m < ph.size(); ++m) out(m) = std::polar(std::sqrt(rh(m)), ph(m));
  return out;
}

double StarRisState::binary_residual() const {
  double worst = 0.0;
  for (double t : rho_t_) worst = std::max(worst, std::min(t, 1.0 - t));
  return worst;
}

bool StarRisState::is_valid(double binary_tol) const {
  return protocol_ == Protocol::kEnergySplitting || binary_residual() <= binary_tol;
}

EnergyPartition::EnergyPartition(std::vector<double> a) : a_(std::move(a)) {
  for (std::size_t k = 0; k < a_.size(); ++k) {
    if (!(a_[k] >= 0.0 && a_[k] <= 1.0)) {
      throw std::domain_error("EnergyPartition: a[" + std::to_string(k) + "] outside [0, 1]");
    }
  }
}

EnergyPartition EnergyPartition::uniform(int num_users, double value) {
  return EnergyPartition(std::vector<double>(static_cast<std::size_t>(num_users), value));
}

double transmit_power(double a, double energy_j, double slot_s) {
  if (!(a >= 0.0 && a <= 1.0)) throw std::domain_error("transmit_power: a outside [0, 1]");
  return a * energy_j / slot_s;
}

double total_objective(std::span<const double> offload, std::span<const double> local) {
  if (offload.size() != local.size()) {
    throw std::invalid_argument("total_objective: offload/local length mismatch");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < offload.size(); ++k) sum += offload[k] + local[k];
  return sum;
}

}  // namespace starmec
