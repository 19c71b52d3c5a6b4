#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "starmec/channel.hpp"
#include "starmec/energy.hpp"
#include "starmec/experiments.hpp"
#include "starmec/model.hpp"
#include "starmec/ris_solver.hpp"

// JSON documents exchanged with the CLI and the external validation scripts.
// Complex numbers are written as [re, im]; matrices as lists of rows.
namespace starmec::io {

inline constexpr int kSchemaVersion = 1;

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Keys match the SystemConfig field names. Per-user lists also accept a scalar
// (broadcast to K users); a missing rank_tol falls back to default_rank_tol(M).
std::string config_to_json(const SystemConfig& cfg);
SystemConfig config_from_json(std::string_view text);
bool config_has_rank_tol(std::string_view text);

std::string channels_to_json(const ChannelSet& cs, std::uint64_t seed);
ChannelSet channels_from_json(std::string_view text);

std::string report_to_json(const SolveReport& rep);

// Surface subproblem instance: Q, d, noise, powers, anchor and tolerances. When a
// result is given its objective and split are stored under "primary".
std::string ris_instance_to_json(const LiftedCoefficients& lc, const RisSolveOptions& opts,
                                 const LiftedRisVariable& anchor,
                                 const RisSubproblemResult* result = nullptr);

// Energy subproblem instance: gain coefficients, noise, local coefficients, anchor.
std::string energy_instance_to_json(const EnergyProblem& ep, const RVec& anchor,
                                    const EnergySolveResult* result = nullptr);

// {"variable", "values", "realizations", "schemes", "master_seed", "threads",
//  "base_config": {...}}
SweepSpec sweep_spec_from_json(std::string_view text);

}  // namespace starmec::io
