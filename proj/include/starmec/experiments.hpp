#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "starmec/bcd.hpp"
#include "starmec/channel.hpp"
#include "starmec/model.hpp"

namespace starmec {

enum class Scheme { kEs, kMs, kConventionalRis, kZeroForcing, kEqualEnergy, kEqualTime };
enum class SweepVariable { kElements, kAntennas };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);
std::string_view to_string(SweepVariable v);
SweepVariable parse_sweep_variable(std::string_view name);  // "elements" / "antennas"

inline constexpr std::string_view kCsvSchema = "# starmec-results v1";

struct SweepSpec {
  SweepVariable variable = SweepVariable::kElements;
  std::vector<int> values;
  int realizations = 50;
  std::vector<Scheme> schemes;
  SystemConfig base_config;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0: hardware concurrency
  bool auto_rank_tol = true;  // recompute default_rank_tol(M) per swept M

  // Throws std::invalid_argument.
  void validate() const;
  SystemConfig config_for(int value) const;
};

// Channel seed of one realization. Depends on the realization index only, so every
// swept value sees the same user drop and fading (prefix-extended in M or N).
std::uint64_t child_seed(std::uint64_t master_seed, int value, int realization);

// Runs one scheme on one channel set (ES/MS use cfg with the protocol overridden).
SolveReport run_scheme(Scheme s, const ChannelSet& cs, const SystemConfig& cfg,
                       std::uint64_t seed = 0);

struct ResultRow {
  Scheme scheme = Scheme::kEs;
  int value = 0;
  int realization = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double objective = 0.0;
  std::vector<double> offload_bps;
  std::vector<double> local_bps;
  int iterations = 0;
  double wall_time_s = 0.0;
};

// Rows sorted by (value, realization, scheme order in the spec).
std::vector<ResultRow> run_sweep(const SweepSpec& spec);

struct SummaryRow {
  Scheme scheme = Scheme::kEs;
  int value = 0;
  int count = 0;
  int failures = 0;
  double mean = 0.0;
  double sd = 0.0;
  double half_width = 0.0;  // 1.96 sd / sqrt(count)
};

// Per (scheme, value) over successful rows. Throws std::invalid_argument when empty.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

// Columns: scheme,value,realization,seed,status,objective,offload_total,local_total,
// iterations,offload_0..offload_{K-1},local_0..local_{K-1}. Wall time goes to the timing file.
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, int num_users);
void write_timing_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

// Formats with 12 significant digits.
std::string format_real(double x);

}  // namespace starmec
