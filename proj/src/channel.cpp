#include "starmec/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace starmec {

namespace {

// Stream tags; fixed so that realizations stay reproducible across versions.
constexpr std::uint32_t kTagSurfaceAp = 1;
constexpr std::uint32_t kTagPosition = 2;
constexpr std::uint32_t kTagDirect = 3;
constexpr std::uint32_t kTagSurfaceUser = 4;

cdouble cn01(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

}  // namespace

double path_loss(double d, double alpha, double t0_db) {
  if (!(d >= 1.0)) {
    throw std::domain_error("path_loss: distance " + std::to_string(d) +
                            " m below the 1 m reference");
  }
  if (!(alpha > 0.0)) throw std::domain_error("path_loss: exponent must be positive");
  return std::pow(10.0, t0_db / 10.0) * std::pow(d, -alpha);
}

CVec steering_vector(int n, double spatial_freq) {
  CVec a(n);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, std::numbers::pi * spatial_freq * i);
  return a;
}

CMat gen_rician(int rows, int cols, double kappa, const CMat& los, std::mt19937_64& rng) {
  if (kappa < 0.0) throw std::domain_error("gen_rician: negative Rician factor");
  if (los.rows() != rows || los.cols() != cols) {
    throw std::invalid_argument("gen_rician: LoS component has wrong shape");
  }
  const double w_los = std::sqrt(kappa / (1.0 + kappa));
  const double w_nlos = std::sqrt(1.0 / (1.0 + kappa));
  CMat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = w_los * los(r, c) + w_nlos * cn01(rng);
  }
  return out;
}

double spatial_frequency(const Vec3& from, const Vec3& to) {
  const double d = distance(from, to);
  return d > 0.0 ? (to.y - from.y) / d : 0.0;
}

std::mt19937_64 stream_for(std::uint64_t seed, std::uint32_t tag, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), tag, index};
  return std::mt19937_64(seq);
}

ChannelSet sample_channels(const SystemConfig& cfg, std::uint64_t seed) {
  const int n = cfg.n_antennas;
  const int m = cfg.n_elements;
  const int k_users = cfg.num_users();
  const Geometry& geo = cfg.geometry;
  const LinkParams& lp = cfg.links;

  ChannelSet cs;
  cs.spaces = cfg.spaces();

  // Surface -> AP. One stream per element row keeps prefixes stable in M and N.
  {
    const double gain = path_loss(distance(geo.ap_pos, geo.ris_pos), lp.alpha_ap_surface,
                                  lp.ref_loss_db);
    const double kappa = std::pow(10.0, lp.kappa_ap_surface_db / 10.0);
    const CVec a_surface = steering_vector(m, spatial_frequency(geo.ris_pos, geo.ap_pos));
    const CVec a_ap = steering_vector(n, spatial_frequency(geo.ap_pos, geo.ris_pos));
    const CMat los = a_surface * a_ap.adjoint();
    cs.g_mat.resize(m, n);
    for (int row = 0; row < m; ++row) {
      auto rng = stream_for(seed, kTagSurfaceAp, static_cast<std::uint32_t>(row));
      cs.g_mat.row(row) = std::sqrt(gain) * gen_rician(1, n, kappa, los.row(row), rng);
    }
  }

  cs.h_d.reserve(k_users);
  cs.h_s.reserve(k_users);
  for (int k = 0; k < k_users; ++k) {
    const auto idx = static_cast<std::uint32_t>(k);
    const Vec3& center = cfg.space_of(k) == Space::kTransmit ? geo.t_center : geo.r_center;
    auto pos_rng = stream_for(seed, kTagPosition, idx);
    std::uniform_real_distribution<double> offset(-0.5 * geo.region_side_m,
                                                  0.5 * geo.region_side_m);
    Vec3 pos = center;
    pos.x += offset(pos_rng);
    pos.y += offset(pos_rng);
    cs.user_pos.push_back(pos);

    auto d_rng = stream_for(seed, kTagDirect, idx);
    const double gain_d =
        path_loss(distance(pos, geo.ap_pos), lp.alpha_ap_user, lp.ref_loss_db);
    const CVec los_d = steering_vector(n, spatial_frequency(geo.ap_pos, pos));
    cs.h_d.push_back(std::sqrt(gain_d) * gen_rician(n, 1, lp.kappa_ap_user, los_d, d_rng));

    auto s_rng = stream_for(seed, kTagSurfaceUser, idx);
    const double gain_s =
        path_loss(distance(pos, geo.ris_pos), lp.alpha_surface_user, lp.ref_loss_db);
    const CVec los_s = steering_vector(m, spatial_frequency(geo.ris_pos, pos));
    cs.h_s.push_back(std::sqrt(gain_s) *
                     gen_rician(m, 1, lp.kappa_surface_user, los_s, s_rng));
  }
  return cs;
}

CVec effective_channel(const ChannelSet& cs, const StarRisState& ris, int k) {
  if (k < 0 || k >= cs.num_users()) {
    throw std::out_of_range("effective_channel: user index " + std::to_string(k));
  }
  const CVec theta = ris.coefficients(cs.spaces[static_cast<std::size_t>(k)]);
  return cs.h_d[k] + cs.g_mat.adjoint() * theta.cwiseProduct(cs.h_s[k]);
}

std::vector<CVec> effective_channels(const ChannelSet& cs, const StarRisState& ris) {
  const CVec theta_t = ris.coefficients(Space::kTransmit);
  const CVec theta_r = ris.coefficients(Space::kReflect);
  std::vector<CVec> out;
  out.reserve(cs.num_users());
  for (int k = 0; k < cs.num_users(); ++k) {
    const CVec& theta = cs.spaces[k] == Space::kTransmit ? theta_t : theta_r;
    out.push_back(cs.h_d[k] + cs.g_mat.adjoint() * theta.cwiseProduct(cs.h_s[k]));
  }
  return out;
}

ChannelSet select_users(const ChannelSet& cs, const std::vector<int>& users) {
  ChannelSet out;
  out.g_mat = cs.g_mat;
  for (int k : users) {
    out.h_d.push_back(cs.h_d.at(k));
    out.h_s.push_back(cs.h_s.at(k));
    out.spaces.push_back(cs.spaces.at(k));
    if (!cs.user_pos.empty()) out.user_pos.push_back(cs.user_pos.at(k));
  }
  return out;
}

}  // namespace starmec
