#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "starmec/bcd.hpp"
#include "starmec/beamform.hpp"
#include "starmec/metrics.hpp"
#include "support.hpp"

using namespace starmec;
using starmec::testing::rel_err;

namespace {

SystemConfig desk(int m, int n, int t, int r, Protocol p) {
  SystemConfig cfg = make_default_config(m, n, t, r);
  cfg.protocol = p;
  return cfg;
}

void check_trace(const SolveReport& rep, double tol) {
  for (std::size_t i = 1; i < rep.objective_trace.size(); ++i)
    CHECK(rep.objective_trace[i] >= rep.objective_trace[i - 1] * (1.0 - tol));
}

StarRisState state_of(const SolveReport& rep, Protocol p) {
  auto vec = [](const std::vector<double>& x) {
    return RVec(Eigen::Map<const RVec>(x.data(), static_cast<Eigen::Index>(x.size())));
  };
  return StarRisState(vec(rep.phases_t), vec(rep.phases_r), vec(rep.rho_t), vec(rep.rho_r), p);
}

}  // namespace

TEST_CASE("ES optimize: monotone and feasible") {
  const SystemConfig cfg = desk(6, 4, 2, 2, Protocol::kEnergySplitting);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ChannelSet cs = sample_channels(cfg, seed);
    const SolveReport rep = optimize(cs, cfg, seed);
    REQUIRE_FALSE(rep.objective_trace.empty());
    check_trace(rep, 1e-9);
    CHECK(rep.objective >= rep.first_beamforming_objective * (1.0 - 1e-12));
    CHECK(rel_err(rep.objective, rep.objective_trace.back()) < 1e-12);
    CHECK(rep.seed == seed);
    CHECK(rep.iterations <= cfg.bcd_max_iters);
    for (double r : rep.rank_residuals) CHECK(r <= cfg.rank_tol * (1.0 + 1e-9));
    CHECK(rep.coupling_residuals.at(0) <= 1e-8);
    const StarRisState s = state_of(rep, Protocol::kEnergySplitting);
    const EnergyPartition a(rep.energy_partition);
    CHECK(rel_err(objective(rep.beamformers, cs, s, a, cfg), rep.objective) < 1e-12);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) sum += rep.per_user_offload_rate[k] + rep.per_user_local_rate[k];
    CHECK(rel_err(sum, rep.objective) < 1e-12);
  }
}

TEST_CASE("MS optimize: binary surface and rounding cost") {
  const SystemConfig cfg = desk(6, 4, 2, 2, Protocol::kModeSwitching);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ChannelSet cs = sample_channels(cfg, 10 + seed);
    const SolveReport rep = optimize(cs, cfg, seed);
    check_trace(rep, 1e-9);
    for (double r : rep.rho_t) CHECK((r == 0.0 || r == 1.0));
    for (double r : rep.binary_residuals) CHECK(r <= cfg.binary_tol);
    CHECK(std::abs(rep.objective - rep.unrounded_objective) <= 0.01 * rep.unrounded_objective);
    CHECK(state_of(rep, Protocol::kModeSwitching).is_valid(cfg.binary_tol));
  }
}

TEST_CASE("ES from the MS solution is at least as good") {
  const SystemConfig ms = desk(6, 4, 2, 2, Protocol::kModeSwitching);
  const SystemConfig es = desk(6, 4, 2, 2, Protocol::kEnergySplitting);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ChannelSet cs = sample_channels(ms, 20 + seed);
    const SolveReport rm = optimize(cs, ms, seed);
    const SolveReport re = optimize_from(cs, es, state_of(rm, Protocol::kModeSwitching),
                                         EnergyPartition(rm.energy_partition));
    CHECK(re.objective >= rm.objective * (1.0 - 1e-9));
  }
}

TEST_CASE("optimize is deterministic") {
  const SystemConfig cfg = desk(4, 3, 2, 1, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(cfg, 4);
  const SolveReport a = optimize(cs, cfg, 4);
  const SolveReport b = optimize(cs, cfg, 4);
  CHECK(a.objective_trace == b.objective_trace);
  CHECK(a.energy_partition == b.energy_partition);
  CHECK(a.phases_t == b.phases_t);
  CHECK(a.rho_t == b.rho_t);
}

TEST_CASE("equal energy keeps a at one half") {
  const SystemConfig cfg = desk(4, 3, 2, 2, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(cfg, 5);
  const SolveReport rep = run_baseline(Baseline::kEqualEnergy, cs, cfg);
  for (double a : rep.energy_partition) CHECK(a == 0.5);
  check_trace(rep, 1e-9);
}

TEST_CASE("zero forcing nulls interference on the final channels") {
  const SystemConfig cfg = desk(4, 6, 2, 2, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(cfg, 6);
  const SolveReport rep = run_baseline(Baseline::kZeroForcing, cs, cfg);
  CHECK_FALSE(rep.zero_forcing_fallback);
  const auto g = effective_channels(cs, state_of(rep, Protocol::kEnergySplitting));
  for (int k = 0; k < 4; ++k) {
    const double own = std::abs(rep.beamformers.v[k].dot(g[k]));
    for (int l = 0; l < 4; ++l)
      if (l != k) CHECK(std::abs(rep.beamformers.v[k].dot(g[l])) <= 1e-8 * own);
  }

  const SystemConfig few = desk(4, 2, 2, 2, Protocol::kEnergySplitting);
  const SolveReport ls = run_baseline(Baseline::kZeroForcing, sample_channels(few, 6), few);
  CHECK(ls.zero_forcing_fallback);
  CHECK_FALSE(ls.warnings.empty());
}

TEST_CASE("conventional surface keeps its halves") {
  const SystemConfig cfg = desk(6, 3, 2, 2, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(cfg, 7);
  const SolveReport rep = run_baseline(Baseline::kConventionalRis, cs, cfg);
  const RVec split = conventional_split(6);
  for (int m = 0; m < 6; ++m) CHECK(rep.rho_t[m] == split(m));
  CHECK(split.head(3).isZero());
  CHECK(split.tail(3).isOnes());
  check_trace(rep, 1e-9);
  CHECK_THROWS_AS(conventional_split(5), std::invalid_argument);
  const SystemConfig odd = desk(5, 3, 2, 2, Protocol::kEnergySplitting);
  CHECK_THROWS_AS(run_baseline(Baseline::kConventionalRis, sample_channels(odd, 1), odd),
                  std::invalid_argument);
}

TEST_CASE("equal time splits the slot") {
  const SystemConfig cfg = desk(4, 3, 2, 2, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(cfg, 8);
  const SolveReport rep = run_baseline(Baseline::kEqualTime, cs, cfg);
  double sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    sum += rep.per_user_offload_rate[k] + rep.per_user_local_rate[k];
    CHECK(rep.per_user_local_rate[k] ==
          doctest::Approx(local_rate(rep.energy_partition[k], 10.0, 1.0, 1e-25, 200.0)));
  }
  CHECK(rel_err(sum, rep.objective) < 1e-12);
  check_trace(rep, 1e-9);
}

TEST_CASE("ES beats the baselines on most desk instances") {
  const SystemConfig cfg = desk(6, 6, 2, 2, Protocol::kEnergySplitting);
  int wins[4] = {0, 0, 0, 0};
  const int runs = 50;
  for (int r = 0; r < runs; ++r) {
    const ChannelSet cs = sample_channels(cfg, 1000 + r);
    const double es = optimize(cs, cfg).objective;
    int i = 0;
    for (Baseline b : {Baseline::kConventionalRis, Baseline::kZeroForcing, Baseline::kEqualEnergy,
                       Baseline::kEqualTime}) {
      if (es >= run_baseline(b, cs, cfg).objective * (1.0 - 1e-9)) ++wins[i];
      ++i;
    }
  }
  for (int w : wins) CHECK(w >= 45);
}

TEST_CASE("switching a user off escapes the all-offload basin") {
  // Tiny layout where the best point stops offloading for the reflect user.
  const SystemConfig cfg = desk(2, 2, 1, 1, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(cfg, 13019);
  const SolveReport rep = optimize(cs, cfg);
  const StarRisState st(RVec::Zero(2), RVec::Zero(2), RVec::Constant(2, 0.5),
                        RVec::Constant(2, 0.5), Protocol::kEnergySplitting);
  const SolveReport off = optimize_from(cs, cfg, st, EnergyPartition(std::vector<double>{0.5, 0.0}));
  CHECK(rep.energy_partition[1] == 0.0);
  CHECK(rep.objective >= off.objective * (1.0 - 1e-3));
  check_trace(rep, 1e-9);
}

TEST_CASE("baseline names") {
  CHECK(parse_baseline("zf") == Baseline::kZeroForcing);
  CHECK(parse_baseline("Equal-Time") == Baseline::kEqualTime);
  CHECK(to_string(Baseline::kConventionalRis) == "conventional");
  CHECK_THROWS_AS(parse_baseline("noma"), std::invalid_argument);
}

TEST_CASE("dimension mismatch is rejected") {
  const SystemConfig cfg = desk(4, 3, 2, 2, Protocol::kEnergySplitting);
  const ChannelSet cs = sample_channels(desk(6, 3, 2, 2, Protocol::kEnergySplitting), 1);
  CHECK_THROWS_AS(optimize(cs, cfg), std::invalid_argument);
}
