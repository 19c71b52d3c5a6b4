#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starmec/linalg.hpp"

namespace starmec {

enum class Protocol { kEnergySplitting, kModeSwitching };

// Which side of the surface a user sits on. T users see Theta_T, R users Theta_R.
enum class Space { kTransmit, kReflect };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view name);  // "es" / "ms", case-insensitive

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

struct Geometry {
  Vec3 ap_pos{0.0, 0.0, 15.0};
  Vec3 ris_pos{75.0, 0.0, 15.0};
  Vec3 t_center{45.0, 0.0, 0.0};
  Vec3 r_center{95.0, 0.0, 0.0};
  double region_side_m = 50.0;
};

// Large-scale link parameters. Rician factors are linear except kappa_ap_surface_db.
struct LinkParams {
  double ref_loss_db = -30.0;
  double alpha_ap_surface = 2.0;
  double alpha_ap_user = 3.67;
  double alpha_surface_user = 2.5;
  double kappa_ap_surface_db = 30.0;
  double kappa_ap_user = 0.0;
  double kappa_surface_user = 3.0;
};

struct SystemConfig {
  int n_antennas = 10;
  int n_elements = 30;
  int t_users = 4;
  int r_users = 4;
  double bandwidth_hz = 1e6;
  double noise_power_w = 1e-12;  // -90 dBm
  std::vector<double> energy_budgets_j;
  std::vector<double> cycles_per_bit;
  std::vector<double> capacitance_coeff;
  double slot_length_s = 1.0;
  double compute_duration_s = 1.0;
  Protocol protocol = Protocol::kEnergySplitting;
  double rank_tol = 0.0;
  double binary_tol = 1e-3;
  int bcd_max_iters = 30;
  int dc_max_iters = 20;
  double bcd_obj_tol = 1e-4;
  // Alternative reading of the equal-energy baseline: every user gets the mean
  // budget and the partition is still optimized.
  bool equal_energy_equal_budgets = false;
  Geometry geometry;
  LinkParams links;

  int num_users() const { return t_users + r_users; }
  Space space_of(int k) const { return k < t_users ? Space::kTransmit : Space::kReflect; }
  std::vector<Space> spaces() const;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Rank tolerance used when none is configured: 1e-4 (M + 1), capped at 1e-2.
double default_rank_tol(int n_elements);

// Simulation defaults: 1 MHz, -90 dBm, E = 10 J, C = 200 cycles/bit, kappa = 1e-25.
SystemConfig make_default_config(int n_elements = 30, int n_antennas = 10, int t_users = 4,
                                 int r_users = 4);

// Per-element energy split and phase for each space. The element's field
// coefficient in space x is sqrt(rho_x) e^{j theta_x}; rho_t + rho_r = 1.
class StarRisState {
 public:
  StarRisState(RVec phases_t, RVec phases_r, RVec rho_t, RVec rho_r, Protocol protocol);

  // ES: even split, zero phase. MS: elements alternate transmit/reflect.
  static StarRisState initial(int n_elements, Protocol protocol);

  int n_elements() const { return static_cast<int>(rho_t_.size()); }
  Protocol protocol() const { return protocol_; }
  const RVec& phases_t() const { return phases_t_; }
  const RVec& phases_r() const { return phases_r_; }
  const RVec& rho_t() const { return rho_t_; }
  const RVec& rho_r() const { return rho_r_; }
  const RVec& phases(Space s) const { return s == Space::kTransmit ? phases_t_ : phases_r_; }
  const RVec& rho(Space s) const { return s == Space::kTransmit ? rho_t_ : rho_r_; }

  // Diagonal of Theta_x.
  CVec coefficients(Space s) const;

  // max_m min(rho_t[m], 1 - rho_t[m]).
  double binary_residual() const;
  bool is_valid(double binary_tol) const;

 private:
  RVec phases_t_;
  RVec phases_r_;
  RVec rho_t_;
  RVec rho_r_;
  Protocol protocol_;
};

class EnergyPartition {
 public:
  explicit EnergyPartition(std::vector<double> a);
  static EnergyPartition uniform(int num_users, double value);

  const std::vector<double>& values() const { return a_; }
  double operator[](std::size_t k) const { return a_[k]; }
  std::size_t size() const { return a_.size(); }

 private:
  std::vector<double> a_;
};

struct BeamformerSet {
  std::vector<CVec> v;
};

struct SolveReport {
  std::string scheme;
  std::vector<double> objective_trace;
  double objective = 0.0;
  double first_beamforming_objective = 0.0;
  std::vector<double> per_user_offload_rate;
  std::vector<double> per_user_local_rate;
  std::vector<double> rank_residuals;    // lifted Tr - lambda_max, transmit then reflect
  std::vector<double> binary_residuals;  // lifted max_m min(rho, 1 - rho), same order
  std::vector<double> coupling_residuals;  // lifted max_m |rho_t + rho_r - 1|
  RVec lifted_rho_t;                     // last surface block output before rounding
  double unrounded_objective = 0.0;      // MS: same v, a and phases with lifted_rho_t
  double wall_time_s = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  bool zero_forcing_fallback = false;
  std::vector<double> energy_partition;
  std::vector<double> phases_t;
  std::vector<double> phases_r;
  std::vector<double> rho_t;
  std::vector<double> rho_r;
  BeamformerSet beamformers;
  std::vector<std::string> warnings;
};

// p_k = a_k E_k / L.
double transmit_power(double a, double energy_j, double slot_s);

// Sum over users of offload + local rate.
double total_objective(std::span<const double> offload, std::span<const double> local);

}  // namespace starmec
