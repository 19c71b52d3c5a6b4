#pragma once

#include <cstdint>
#include <string_view>

#include "starmec/channel.hpp"
#include "starmec/model.hpp"

namespace starmec {

enum class Baseline { kConventionalRis, kZeroForcing, kEqualEnergy, kEqualTime };

std::string_view to_string(Baseline b);
// "conventional", "zf", "equal-energy", "equal-time" (plus a few aliases).
Baseline parse_baseline(std::string_view name);

// Cyclic v -> Psi -> a updates under cfg.protocol. Starts from StarRisState::initial or,
// for even M, the split-half layout when that scores higher after one beamforming solve.
// The solver is deterministic; the seed is only carried into the report.
SolveReport optimize(const ChannelSet& cs, const SystemConfig& cfg, std::uint64_t seed = 0);

// Same loop from a given surface state and partition (warm start). The state's protocol
// must match cfg.protocol unless cfg is ES, which accepts any feasible state.
SolveReport optimize_from(const ChannelSet& cs, const SystemConfig& cfg,
                          const StarRisState& init, const EnergyPartition& a0);

SolveReport run_baseline(Baseline kind, const ChannelSet& cs, const SystemConfig& cfg);

// Split assigning elements [0, M/2) to reflection and [M/2, M) to transmission.
// Throws std::invalid_argument for odd M.
RVec conventional_split(int n_elements);

}  // namespace starmec
