#include "starmec/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace starmec::io {

using nlohmann::json;

namespace {

json cplx(cdouble z) { return json::array({z.real(), z.imag()}); }

cdouble cplx_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json cvec(const CVec& v) {
  json out = json::array();
  for (const auto& z : v) out.push_back(cplx(z));
  return out;
}

CVec cvec_from(const json& j) {
  CVec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = cplx_from(j[i]);
  return v;
}

json cmat(const CMat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(cvec(m.row(r).transpose()));
  return out;
}

CMat cmat_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  CMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw std::invalid_argument("ragged complex matrix");
    }
    m.row(r) = cvec_from(j[r]).transpose();
  }
  return m;
}

json rvec(const RVec& v) { return std::vector<double>(v.begin(), v.end()); }

json rmat(const RMat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(rvec(m.row(r).transpose()));
  return out;
}

json vec3(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json space_list(const std::vector<Space>& spaces) {
  json out = json::array();
  for (Space s : spaces) out.push_back(s == Space::kTransmit ? "t" : "r");
  return out;
}

std::vector<Space> space_list_from(const json& j) {
  std::vector<Space> out;
  for (const auto& s : j) {
    const auto v = s.get<std::string>();
    if (v == "t") {
      out.push_back(Space::kTransmit);
    } else if (v == "r") {
      out.push_back(Space::kReflect);
    } else {
      throw std::invalid_argument("space must be \"t\" or \"r\", got \"" + v + "\"");
    }
  }
  return out;
}

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string(what) + ": invalid JSON: " + e.what());
  }
}

std::vector<double> per_user(const json& j, const char* key, std::size_t k) {
  const json& v = j.at(key);
  if (v.is_number()) return std::vector<double>(k, v.get<double>());
  auto out = v.get<std::vector<double>>();
  if (out.size() != k) {
    throw std::invalid_argument(std::string("config: ") + key + " needs " + std::to_string(k) +
                                " entries");
  }
  return out;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string config_to_json(const SystemConfig& cfg) {
  json j;
  j["n_antennas"] = cfg.n_antennas;
  j["n_elements"] = cfg.n_elements;
  j["t_users"] = cfg.t_users;
  j["r_users"] = cfg.r_users;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["noise_power_w"] = cfg.noise_power_w;
  j["energy_budgets_j"] = cfg.energy_budgets_j;
  j["cycles_per_bit"] = cfg.cycles_per_bit;
  j["capacitance_coeff"] = cfg.capacitance_coeff;
  j["slot_length_s"] = cfg.slot_length_s;
  j["compute_duration_s"] = cfg.compute_duration_s;
  j["protocol"] = std::string(to_string(cfg.protocol));
  j["rank_tol"] = cfg.rank_tol;
  j["binary_tol"] = cfg.binary_tol;
  j["bcd_max_iters"] = cfg.bcd_max_iters;
  j["dc_max_iters"] = cfg.dc_max_iters;
  j["bcd_obj_tol"] = cfg.bcd_obj_tol;
  j["equal_energy_equal_budgets"] = cfg.equal_energy_equal_budgets;
  const Geometry& g = cfg.geometry;
  j["geometry"] = {{"ap_pos", vec3(g.ap_pos)},
                   {"ris_pos", vec3(g.ris_pos)},
                   {"t_center", vec3(g.t_center)},
                   {"r_center", vec3(g.r_center)},
                   {"region_side_m", g.region_side_m}};
  const LinkParams& l = cfg.links;
  j["links"] = {{"ref_loss_db", l.ref_loss_db},
                {"alpha_ap_surface", l.alpha_ap_surface},
                {"alpha_ap_user", l.alpha_ap_user},
                {"alpha_surface_user", l.alpha_surface_user},
                {"kappa_ap_surface_db", l.kappa_ap_surface_db},
                {"kappa_ap_user", l.kappa_ap_user},
                {"kappa_surface_user", l.kappa_surface_user}};
  return j.dump(2) + "\n";
}

bool config_has_rank_tol(std::string_view text) {
  return parse(text, "config").contains("rank_tol");
}

SystemConfig config_from_json(std::string_view text) {
  const json j = parse(text, "config");
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  try {
    SystemConfig cfg = make_default_config();
    read_opt(j, "n_antennas", cfg.n_antennas);
    read_opt(j, "n_elements", cfg.n_elements);
    read_opt(j, "t_users", cfg.t_users);
    read_opt(j, "r_users", cfg.r_users);
    read_opt(j, "bandwidth_hz", cfg.bandwidth_hz);
    read_opt(j, "noise_power_w", cfg.noise_power_w);
    const auto k = static_cast<std::size_t>(std::max(cfg.num_users(), 0));
    const SystemConfig defaults = make_default_config(cfg.n_elements, cfg.n_antennas,
                                                      std::max(cfg.t_users, 0),
                                                      std::max(cfg.r_users, 0));
    cfg.energy_budgets_j = j.contains("energy_budgets_j") ? per_user(j, "energy_budgets_j", k)
                                                          : defaults.energy_budgets_j;
    cfg.cycles_per_bit =
        j.contains("cycles_per_bit") ? per_user(j, "cycles_per_bit", k) : defaults.cycles_per_bit;
    cfg.capacitance_coeff = j.contains("capacitance_coeff")
                                ? per_user(j, "capacitance_coeff", k)
                                : defaults.capacitance_coeff;
    read_opt(j, "slot_length_s", cfg.slot_length_s);
    read_opt(j, "compute_duration_s", cfg.compute_duration_s);
    if (j.contains("protocol")) cfg.protocol = parse_protocol(j.at("protocol").get<std::string>());
    cfg.rank_tol = j.contains("rank_tol") ? j.at("rank_tol").get<double>()
                                          : default_rank_tol(cfg.n_elements);
    read_opt(j, "binary_tol", cfg.binary_tol);
    read_opt(j, "bcd_max_iters", cfg.bcd_max_iters);
    read_opt(j, "dc_max_iters", cfg.dc_max_iters);
    read_opt(j, "bcd_obj_tol", cfg.bcd_obj_tol);
    read_opt(j, "equal_energy_equal_budgets", cfg.equal_energy_equal_budgets);
    if (j.contains("geometry")) {
      const json& g = j.at("geometry");
      if (g.contains("ap_pos")) cfg.geometry.ap_pos = vec3_from(g.at("ap_pos"));
      if (g.contains("ris_pos")) cfg.geometry.ris_pos = vec3_from(g.at("ris_pos"));
      if (g.contains("t_center")) cfg.geometry.t_center = vec3_from(g.at("t_center"));
      if (g.contains("r_center")) cfg.geometry.r_center = vec3_from(g.at("r_center"));
      read_opt(g, "region_side_m", cfg.geometry.region_side_m);
    }
    if (j.contains("links")) {
      const json& l = j.at("links");
      read_opt(l, "ref_loss_db", cfg.links.ref_loss_db);
      read_opt(l, "alpha_ap_surface", cfg.links.alpha_ap_surface);
      read_opt(l, "alpha_ap_user", cfg.links.alpha_ap_user);
      read_opt(l, "alpha_surface_user", cfg.links.alpha_surface_user);
      read_opt(l, "kappa_ap_surface_db", cfg.links.kappa_ap_surface_db);
      read_opt(l, "kappa_ap_user", cfg.links.kappa_ap_user);
      read_opt(l, "kappa_surface_user", cfg.links.kappa_surface_user);
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

std::string channels_to_json(const ChannelSet& cs, std::uint64_t seed) {
  json j;
  j["schema"] = "starmec-channels";
  j["version"] = kSchemaVersion;
  j["seed"] = seed;
  j["n_antennas"] = cs.n_antennas();
  j["n_elements"] = cs.n_elements();
  j["spaces"] = space_list(cs.spaces);
  json hd = json::array();
  json hs = json::array();
  json pos = json::array();
  for (int k = 0; k < cs.num_users(); ++k) {
    hd.push_back(cvec(cs.h_d[k]));
    hs.push_back(cvec(cs.h_s[k]));
    if (static_cast<std::size_t>(k) < cs.user_pos.size()) pos.push_back(vec3(cs.user_pos[k]));
  }
  j["h_d"] = hd;
  j["h_s"] = hs;
  j["g_mat"] = cmat(cs.g_mat);
  j["user_pos"] = pos;
  return j.dump() + "\n";
}

ChannelSet channels_from_json(std::string_view text) {
  const json j = parse(text, "channels");
  try {
    ChannelSet cs;
    for (const auto& v : j.at("h_d")) cs.h_d.push_back(cvec_from(v));
    for (const auto& v : j.at("h_s")) cs.h_s.push_back(cvec_from(v));
    cs.g_mat = cmat_from(j.at("g_mat"));
    cs.spaces = space_list_from(j.at("spaces"));
    if (j.contains("user_pos")) {
      for (const auto& p : j.at("user_pos")) cs.user_pos.push_back(vec3_from(p));
    }
    if (cs.h_s.size() != cs.h_d.size() || cs.spaces.size() != cs.h_d.size()) {
      throw std::invalid_argument("channels: per-user lists differ in length");
    }
    for (std::size_t k = 0; k < cs.h_d.size(); ++k) {
      if (cs.h_d[k].size() != cs.g_mat.cols() || cs.h_s[k].size() != cs.g_mat.rows()) {
        throw std::invalid_argument("channels: user " + std::to_string(k) +
                                    " has inconsistent dimensions");
      }
    }
    return cs;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("channels: ") + e.what());
  }
}

std::string report_to_json(const SolveReport& rep) {
  json j;
  j["scheme"] = rep.scheme;
  j["objective"] = rep.objective;
  j["objective_trace"] = rep.objective_trace;
  j["first_beamforming_objective"] = rep.first_beamforming_objective;
  j["per_user_offload_rate"] = rep.per_user_offload_rate;
  j["per_user_local_rate"] = rep.per_user_local_rate;
  j["rank_residuals"] = rep.rank_residuals;
  j["binary_residuals"] = rep.binary_residuals;
  j["coupling_residuals"] = rep.coupling_residuals;
  j["lifted_rho_t"] = rvec(rep.lifted_rho_t);
  j["unrounded_objective"] = rep.unrounded_objective;
  j["wall_time_s"] = rep.wall_time_s;
  j["iterations"] = rep.iterations;
  j["seed"] = rep.seed;
  j["zero_forcing_fallback"] = rep.zero_forcing_fallback;
  j["energy_partition"] = rep.energy_partition;
  j["phases_t"] = rep.phases_t;
  j["phases_r"] = rep.phases_r;
  j["rho_t"] = rep.rho_t;
  j["rho_r"] = rep.rho_r;
  json bf = json::array();
  for (const auto& v : rep.beamformers.v) bf.push_back(cvec(v));
  j["beamformers"] = bf;
  j["warnings"] = rep.warnings;
  return j.dump(2) + "\n";
}

std::string ris_instance_to_json(const LiftedCoefficients& lc, const RisSolveOptions& opts,
                                 const LiftedRisVariable& anchor,
                                 const RisSubproblemResult* result) {
  const int k_users = lc.num_users();
  json j;
  j["schema"] = "starmec-ris-instance";
  j["version"] = kSchemaVersion;
  j["n_elements"] = lc.n_elements;
  j["num_users"] = k_users;
  j["spaces"] = space_list(lc.spaces);
  json q = json::array();
  json d = json::array();
  for (int k = 0; k < k_users; ++k) {
    json qrow = json::array();
    json drow = json::array();
    for (int l = 0; l < k_users; ++l) {
      qrow.push_back(cmat(lc.at(k, l)));
      drow.push_back(cplx(lc.d(k, l)));
    }
    q.push_back(qrow);
    d.push_back(drow);
  }
  j["q"] = q;
  j["d"] = d;
  j["noise"] = rvec(lc.noise);
  j["powers"] = rvec(lc.powers);
  j["protocol"] = std::string(to_string(opts.protocol));
  j["rank_tol"] = opts.rank_tol;
  j["binary_tol"] = opts.binary_tol;
  j["frozen_rho_t"] = opts.frozen_rho_t ? rvec(*opts.frozen_rho_t) : json(nullptr);
  j["anchor"] = {{"psi_t", cmat(anchor.psi_t)},
                 {"psi_r", cmat(anchor.psi_r)},
                 {"rho_t", rvec(anchor.rho_t)},
                 {"rho_r", rvec(anchor.rho_r)}};
  if (result) {
    j["primary"] = {{"objective", result->surrogate},
                    {"anchor_objective", result->anchor_surrogate},
                    {"rho_t", rvec(result->solution.rho_t)},
                    {"iterations", result->iterations},
                    {"converged", result->converged},
                    {"primal_residual", result->primal_residual},
                    {"dual_residual", result->dual_residual}};
  }
  return j.dump() + "\n";
}

std::string energy_instance_to_json(const EnergyProblem& ep, const RVec& anchor,
                                    const EnergySolveResult* result) {
  json j;
  j["schema"] = "starmec-energy-instance";
  j["version"] = kSchemaVersion;
  j["num_users"] = ep.num_users();
  j["c"] = rmat(ep.c);
  j["noise"] = rvec(ep.noise);
  j["local_coef"] = rvec(ep.local_coef);
  j["bandwidth_hz"] = ep.bandwidth_hz;
  j["a_clamp"] = kEnergyClamp;
  j["anchor"] = rvec(anchor);
  if (result) {
    j["primary"] = {{"objective", result->surrogate},
                    {"anchor_objective", result->anchor_surrogate},
                    {"a", rvec(result->a)},
                    {"kkt_residual", result->kkt_residual},
                    {"converged", result->converged}};
  }
  return j.dump(2) + "\n";
}

SweepSpec sweep_spec_from_json(std::string_view text) {
  const json j = parse(text, "sweep spec");
  try {
    SweepSpec spec;
    spec.variable = parse_sweep_variable(j.at("variable").get<std::string>());
    spec.values = j.at("values").get<std::vector<int>>();
    read_opt(j, "realizations", spec.realizations);
    for (const auto& s : j.at("schemes")) spec.schemes.push_back(parse_scheme(s.get<std::string>()));
    read_opt(j, "master_seed", spec.master_seed);
    read_opt(j, "threads", spec.threads);
    if (j.contains("base_config")) {
      const std::string base = j.at("base_config").dump();
      spec.base_config = config_from_json(base);
      spec.auto_rank_tol = !config_has_rank_tol(base);
    } else {
      spec.base_config = make_default_config();
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("sweep spec: ") + e.what());
  }
}

}  // namespace starmec::io
