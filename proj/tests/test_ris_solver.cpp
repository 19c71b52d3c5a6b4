#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "starmec/beamform.hpp"
#include "starmec/metrics.hpp"
#include "starmec/ris_solver.hpp"
#include "support.hpp"

using namespace starmec;
using starmec::testing::rel_err;

namespace {

struct Setup {
  SystemConfig cfg;
  ChannelSet cs;
  StarRisState state;
  EnergyPartition a;
  BeamformerSet bf;
  LiftedCoefficients lc;
};

Setup make_setup(int m, int n, int t, int r, std::uint64_t seed, Protocol p,
                 std::mt19937_64& rng, bool random_bf = true) {
  SystemConfig cfg = make_default_config(m, n, t, r);
  cfg.protocol = p;
  ChannelSet cs = sample_channels(cfg, seed);
  StarRisState st = testing::random_state(m, p, rng);
  EnergyPartition a = testing::random_partition(t + r, rng);
  BeamformerSet bf = random_bf ? testing::random_beamformers(t + r, n, rng)
                               : solve_all_beamformers(cs, st, a, cfg);
  LiftedCoefficients lc = build_lifted(cs, bf, a, cfg);
  return {cfg, cs, st, a, bf, lc};
}

CMat random_hermitian(int n, std::mt19937_64& rng) {
  return hermitian_part(testing::random_cmat(n, n, rng));
}

double f2_sum(const LiftedCoefficients& lc, const CMat& t, const CMat& r, int k) {
  return rate_terms(lc, t, r).f2(k);
}

void check_feasible(const LiftedRisVariable& x, const LiftedRisVariable& anchor,
                    const RisSolveOptions& o) {
  const int m = static_cast<int>(x.rho_t.size());
  for (const CMat* psi : {&x.psi_t, &x.psi_r}) {
    CHECK(min_eigenvalue(*psi) >= -1e-9);
    CHECK(std::abs((*psi)(m, m) - 1.0) <= 1e-8);
    CHECK((*psi - psi->adjoint()).norm() <= 1e-12);
  }
  for (int i = 0; i < m; ++i) {
    CHECK(std::abs(x.psi_t(i, i).real() - x.rho_t(i)) <= 1e-8);
    CHECK(std::abs(x.psi_r(i, i).real() - x.rho_r(i)) <= 1e-8);
    CHECK(std::abs(x.rho_t(i) + x.rho_r(i) - 1.0) <= 1e-8);
    CHECK(x.rho_t(i) >= -1e-12);
    CHECK(x.rho_t(i) <= 1.0 + 1e-12);
  }
  CHECK(rank_one_surrogate(x.psi_t, anchor.psi_t) <= o.rank_tol * (1.0 + 1e-9));
  CHECK(rank_one_surrogate(x.psi_r, anchor.psi_r) <= o.rank_tol * (1.0 + 1e-9));
  if (o.protocol == Protocol::kModeSwitching) {
    const RVec bt = binary_surrogate(x.rho_t.cwiseMax(0.0).cwiseMin(1.0), anchor.rho_t);
    CHECK(bt.maxCoeff() <= o.binary_tol * (1.0 + 1e-9));
  }
}

}  // namespace

TEST_CASE("lifting identity") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Protocol p = trial % 2 ? Protocol::kModeSwitching : Protocol::kEnergySplitting;
    const Setup s = make_setup(3 + trial % 7, 4, 2, 3, trial, p, rng);
    const auto g = effective_channels(s.cs, s.state);
    const LiftedRisVariable lv = lift_state(s.state);
    for (int k = 0; k < 5; ++k) {
      for (int j = 0; j < 5; ++j) {
        const double want = std::norm(s.bf.v[k].dot(g[j]));
        const CMat& psi = lv.psi(s.cs.spaces[j]);
        const double got = herm_inner(s.lc.at(k, j), psi) + std::norm(s.lc.d(k, j));
        CHECK(rel_err(got, want) < 1e-9);
      }
      CHECK(rel_err(s.lc.noise(k), s.cfg.noise_power_w * s.bf.v[k].squaredNorm()) < 1e-14);
      CHECK(rel_err(s.lc.powers(k), 10.0 * s.a[k]) < 1e-14);
    }
  }
}

TEST_CASE("lifted matrices are Hermitian with an empty corner") {
  std::mt19937_64 rng(2);
  const Setup s = make_setup(5, 3, 2, 2, 4, Protocol::kEnergySplitting, rng);
  for (const CMat& q : s.lc.q) {
    CHECK((q - q.adjoint()).norm() <= 1e-14 * q.norm());
    CHECK(q(5, 5) == cdouble(0.0, 0.0));
  }
}

TEST_CASE("surface switched off leaves only the direct term") {
  std::mt19937_64 rng(3);
  const Setup s = make_setup(4, 3, 1, 1, 2, Protocol::kEnergySplitting, rng);
  const StarRisState off(RVec::Zero(4), RVec::Zero(4), RVec::Zero(4), RVec::Ones(4),
                         Protocol::kEnergySplitting);
  const LiftedRisVariable lv = lift_state(off);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(herm_inner(s.lc.at(k, 0), lv.psi_t)) == 0.0);
}

TEST_CASE("single element Q by hand") {
  std::mt19937_64 rng(4);
  const Setup s = make_setup(1, 2, 1, 1, 6, Protocol::kEnergySplitting, rng);
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) {
      cdouble h = 0.0, d = 0.0;
      for (int n = 0; n < 2; ++n) {
        h += std::conj(s.bf.v[k](n)) * std::conj(s.cs.g_mat(0, n)) * s.cs.h_s[j](0);
        d += std::conj(s.bf.v[k](n)) * s.cs.h_d[j](n);
      }
      const CMat& q = s.lc.at(k, j);
      const double scale = std::norm(h) + std::abs(h * d);
      CHECK(std::abs(q(0, 0) - std::norm(h)) <= 1e-13 * scale);
      CHECK(std::abs(q(0, 1) - std::conj(h) * d) <= 1e-13 * scale);
      CHECK(std::abs(q(1, 0) - std::conj(d) * h) <= 1e-13 * scale);
      CHECK(std::abs(s.lc.d(k, j) - d) <= 1e-13 * std::abs(d));
    }
  }
}

TEST_CASE("rate terms agree with the SINR") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Setup s = make_setup(6, 4, 2, 2, 30 + trial, Protocol::kEnergySplitting, rng);
    const LiftedRisVariable lv = lift_state(s.state);
    const RateTerms rt = rate_terms(s.lc, lv.psi_t, lv.psi_r);
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double want = std::log2(1.0 + sinr(k, s.bf, s.cs, s.state, s.a, s.cfg));
      CHECK(std::abs(rt.f1(k) - rt.f2(k) - want) <= 1e-9 * std::max(1.0, want));
      CHECK(rt.f1(k) >= rt.f2(k));
      total += want;
    }
    CHECK(std::abs(lifted_rate_objective(s.lc, lv.psi_t, lv.psi_r) - total) <= 1e-9 * total);
  }
}

TEST_CASE("single user: F2 is the noise term") {
  std::mt19937_64 rng(6);
  const Setup s = make_setup(3, 2, 1, 0, 3, Protocol::kEnergySplitting, rng);
  const LiftedRisVariable lv = lift_state(s.state);
  const RateTerms rt = rate_terms(s.lc, lv.psi_t, lv.psi_r);
  CHECK(rel_err(rt.f2(0), std::log2(s.lc.noise(0))) < 1e-14);
  const LiftedRisVariable other = lift_state(testing::random_state(3, Protocol::kEnergySplitting, rng));
  CHECK(rate_terms(s.lc, other.psi_t, other.psi_r).f2(0) == rt.f2(0));
}

TEST_CASE("F2 linearization: tangent, majorant and gradient") {
  std::mt19937_64 rng(7);
  const Setup s = make_setup(5, 3, 2, 2, 8, Protocol::kEnergySplitting, rng);
  const LiftedRisVariable anchor = lift_state(s.state);
  const F2Linearization lin = linearize_f2(s.lc, anchor.psi_t, anchor.psi_r);
  const RateTerms at = rate_terms(s.lc, anchor.psi_t, anchor.psi_r);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(lin.evaluate(k, anchor.psi_t, anchor.psi_r) - at.f2(k)) <= 1e-12);
    CHECK(rel_err(lin.value(k), at.f2(k)) < 1e-14);
  }

  for (int t = 0; t < 100; ++t) {
    const LiftedRisVariable x = lift_state(testing::random_state(5, Protocol::kEnergySplitting, rng));
    const CMat pt = x.psi_t + 0.3 * testing::random_psd(6, 2, rng);
    const CMat pr = x.psi_r + 0.3 * testing::random_psd(6, 2, rng);
    const RateTerms rt = rate_terms(s.lc, pt, pr);
    for (int k = 0; k < 4; ++k) CHECK(lin.evaluate(k, pt, pr) >= rt.f2(k) - 1e-12);
  }

  for (int t = 0; t < 10; ++t) {
    const CMat dt = random_hermitian(6, rng);
    const CMat dr = random_hermitian(6, rng);
    const double h = 1e-4;
    for (int k = 0; k < 4; ++k) {
      const double fd = (f2_sum(s.lc, anchor.psi_t + h * dt, anchor.psi_r + h * dr, k) -
                         f2_sum(s.lc, anchor.psi_t - h * dt, anchor.psi_r - h * dr, k)) /
                        (2.0 * h);
      const double an = herm_inner(lin.grad_t[k], dt) + herm_inner(lin.grad_r[k], dr);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), 1e-3));
    }
  }
}

TEST_CASE("rank-one surrogate") {
  std::mt19937_64 rng(8);
  const CVec phi = testing::random_cvec(5, rng);
  const CMat psi = phi * phi.adjoint();
  CHECK(std::abs(rank_one_surrogate(psi, psi)) <= 1e-12 * psi.trace().real());
  CHECK(std::abs(rank_one_surrogate(CMat::Identity(2, 2), CMat::Identity(2, 2)) - 1.0) < 1e-14);

  for (int t = 0; t < 50; ++t) {
    const CMat x = testing::random_psd(5, 3, rng);
    const CMat anchor = testing::random_psd(5, 1 + t % 3, rng);
    CHECK(rank_one_surrogate(x, anchor) >= rank_residual(x) - 1e-12 * x.trace().real());
    CHECK(rank_residual(x) >= -1e-12);
  }
}

TEST_CASE("binary surrogate") {
  RVec z(3), half(1);
  z << 0.0, 1.0, 0.0;
  half << 0.5;
  CHECK(binary_surrogate(z, z).cwiseAbs().maxCoeff() == 0.0);
  CHECK(binary_surrogate(half, half)(0) == doctest::Approx(0.25).epsilon(1e-15));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    RVec r(1), a(1);
    r << u(rng);
    a << u(rng);
    const double exact = r(0) - r(0) * r(0);
    CHECK(binary_surrogate(r, a)(0) >= exact - 1e-15);
    CHECK(std::abs(binary_surrogate(r, r)(0) - exact) < 1e-15);
  }
  RVec bad(1);
  bad << 1.5;
  CHECK_THROWS_AS(binary_surrogate(bad, half), std::domain_error);
}

TEST_CASE("extraction inverts the lifting") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    const Protocol p = t % 2 ? Protocol::kModeSwitching : Protocol::kEnergySplitting;
    StarRisState s = testing::random_state(6, p, rng);
    if (p == Protocol::kEnergySplitting) {
      // Keep every element visible in both spaces so phases are defined.
      RVec rt = 0.1 + 0.8 * s.rho_t().array();
      s = StarRisState(s.phases_t(), s.phases_r(), rt, RVec::Ones(6) - rt, p);
    }
    const StarRisState back = extract_state(lift_state(s), p);
    for (int m = 0; m < 6; ++m) {
      CHECK(std::abs(back.rho_t()(m) - s.rho_t()(m)) < 1e-9);
      if (s.rho_t()(m) > 0.0)
        CHECK(std::abs(std::remainder(back.phases_t()(m) - s.phases_t()(m), 2 * std::numbers::pi)) < 1e-9);
      if (s.rho_r()(m) > 0.0)
        CHECK(std::abs(std::remainder(back.phases_r()(m) - s.phases_r()(m), 2 * std::numbers::pi)) < 1e-9);
      CHECK(back.phases_t()(m) >= 0.0);
      CHECK(back.phases_t()(m) < 2 * std::numbers::pi);
    }
  }
}

TEST_CASE("extraction of a hand-built single element pair") {
  LiftedRisVariable x;
  x.rho_t = RVec::Constant(1, 0.3);
  x.rho_r = RVec::Constant(1, 0.7);
  CVec pt(2), pr(2);
  pt << std::polar(std::sqrt(0.3), 0.25), 1.0;
  pr << std::polar(std::sqrt(0.7), 2.0), 1.0;
  x.psi_t = pt * pt.adjoint();
  x.psi_r = pr * pr.adjoint();
  const StarRisState s = extract_state(x, Protocol::kEnergySplitting);
  CHECK(s.rho_t()(0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(s.rho_r()(0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(s.phases_t()(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s.phases_r()(0) == doctest::Approx(2.0).epsilon(1e-12));

  LiftedRisVariable broken = x;
  broken.psi_t(1, 1) = 0.0;
  broken.psi_t(0, 1) = broken.psi_t(1, 0) = 0.0;
  CHECK_THROWS_AS(extract_state(broken, Protocol::kEnergySplitting), std::runtime_error);
}

TEST_CASE("subproblem keeps an optimal anchor") {
  // One user, one element, full transmission with the phase aligned to the direct path.
  std::mt19937_64 rng(11);
  const Setup s = make_setup(1, 2, 1, 0, 12, Protocol::kEnergySplitting, rng, false);
  const double theta = -std::arg(s.lc.at(0, 0)(1, 0));
  const StarRisState best(RVec::Constant(1, theta), RVec::Zero(1), RVec::Ones(1),
                          RVec::Zero(1), Protocol::kEnergySplitting);
  const LiftedRisVariable anchor = lift_state(best);
  const RisSolveOptions o = ris_options(s.cfg);
  const RisSubproblemResult res = solve_ris_subproblem(s.lc, o, anchor);
  CHECK(std::abs(res.surrogate - res.anchor_surrogate) <= 1e-6);
  check_feasible(res.solution, anchor, o);
}

TEST_CASE("subproblem output is feasible and no worse than the anchor") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10; ++t) {
    const Protocol p = t % 2 ? Protocol::kModeSwitching : Protocol::kEnergySplitting;
    SystemConfig cfg = make_default_config(6, 4, 2, 2);
    cfg.protocol = p;
    const ChannelSet cs = sample_channels(cfg, 50 + t);
    const StarRisState st = StarRisState::initial(6, p);
    const EnergyPartition a = EnergyPartition::uniform(4, 0.5);
    const BeamformerSet bf = solve_all_beamformers(cs, st, a, cfg);
    const LiftedCoefficients lc = build_lifted(cs, bf, a, cfg);
    const LiftedRisVariable anchor = lift_state(st);
    const RisSolveOptions o = ris_options(cfg);
    const RisSubproblemResult res = solve_ris_subproblem(lc, o, anchor);
    CHECK(res.surrogate >= res.anchor_surrogate - 1e-8);
    check_feasible(res.solution, anchor, o);
    // The surrogate under-estimates the true rate objective.
    CHECK(lifted_rate_objective(lc, res.solution.psi_t, res.solution.psi_r) >=
          res.surrogate - 1e-9);
  }
}

TEST_CASE("subproblem rejects an infeasible anchor") {
  std::mt19937_64 rng(13);
  const Setup s = make_setup(3, 2, 1, 1, 1, Protocol::kEnergySplitting, rng);
  LiftedRisVariable bad = lift_state(StarRisState::initial(3, Protocol::kEnergySplitting));
  bad.psi_t(0, 0) = 0.9;
  CHECK_THROWS_AS(solve_ris_subproblem(s.lc, ris_options(s.cfg), bad), std::invalid_argument);
  LiftedRisVariable full_rank = lift_state(StarRisState::initial(3, Protocol::kEnergySplitting));
  full_rank.psi_t = CMat::Identity(4, 4);
  full_rank.psi_t.topLeftCorner(3, 3) *= 0.5;
  CHECK_THROWS_AS(solve_ris_subproblem(s.lc, ris_options(s.cfg), full_rank),
                  std::invalid_argument);
}

TEST_CASE("subproblem matches a frozen interior-point reference") {
  // Instance: default constants, M = 2, N = 2, one T and one R user, channel seed 5,
  // initial ES surface, a = 0.5, fitted beamformers. Reference optimum from cvxpy with
  // Clarabel on the exported JSON (tests/oracle/ris_instance_cvx.py).
  const double reference = 12.505149329681363;
  const SystemConfig cfg = make_default_config(2, 2, 1, 1);
  const ChannelSet cs = sample_channels(cfg, 5);
  const StarRisState st = StarRisState::initial(2, cfg.protocol);
  const EnergyPartition a = EnergyPartition::uniform(2, 0.5);
  const BeamformerSet bf = solve_all_beamformers(cs, st, a, cfg);
  const LiftedCoefficients lc = build_lifted(cs, bf, a, cfg);
  const LiftedRisVariable anchor = lift_state(st);
  const RisSolveOptions o = ris_options(cfg);
  const RisSubproblemResult res = solve_ris_subproblem(lc, o, anchor);
  check_feasible(res.solution, anchor, o);
  CHECK(std::abs(res.surrogate - reference) <= 1e-3 * reference);
  CHECK(std::abs(res.surrogate - reference) <= 1e-6 * reference);
  CHECK(res.converged);
}

TEST_CASE("DC loop: monotone trace and feasible output") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    const Protocol p = t % 2 ? Protocol::kModeSwitching : Protocol::kEnergySplitting;
    SystemConfig cfg = make_default_config(4, 3, 1, 1);
    cfg.protocol = p;
    const ChannelSet cs = sample_channels(cfg, 200 + t);
    const StarRisState st = StarRisState::initial(4, p);
    const EnergyPartition a = testing::random_partition(2, rng);
    const BeamformerSet bf = solve_all_beamformers(cs, st, a, cfg);
    const LiftedCoefficients lc = build_lifted(cs, bf, a, cfg);
    const RisSolveOptions o = ris_options(cfg);
    const DcResult dc = dc_outer_loop(lc, o, lift_state(st));
    REQUIRE(dc.trace.size() >= 1);
    for (std::size_t i = 1; i < dc.trace.size(); ++i)
      CHECK(dc.trace[i] >= dc.trace[i - 1] - 1e-8 * std::abs(dc.trace[i - 1]));
    CHECK(rank_residual(dc.solution.psi_t) <= o.rank_tol * (1.0 + 1e-9));
    CHECK(rank_residual(dc.solution.psi_r) <= o.rank_tol * (1.0 + 1e-9));
    CHECK(coupling_residual(dc.solution) <= 1e-8);
    CHECK(dc.solution.rho_t.minCoeff() >= -1e-12);
    CHECK(dc.solution.rho_t.maxCoeff() <= 1.0 + 1e-12);
    if (p == Protocol::kModeSwitching) CHECK(binary_gap(dc.solution.rho_t) <= o.binary_tol);
  }
}

TEST_CASE("extracted state reproduces the lifted objective") {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 10; ++t) {
    SystemConfig cfg = make_default_config(6, 4, 2, 2);
    const ChannelSet cs = sample_channels(cfg, 300 + t);
    const StarRisState st = StarRisState::initial(6, cfg.protocol);
    const EnergyPartition a = testing::random_partition(4, rng);
    const BeamformerSet bf = solve_all_beamformers(cs, st, a, cfg);
    const LiftedCoefficients lc = build_lifted(cs, bf, a, cfg);
    const DcResult dc = dc_outer_loop(lc, ris_options(cfg), lift_state(st));
    const StarRisState out = extract_state(dc.solution, cfg.protocol);
    const LiftedRisVariable relift = lift_state(out);
    const double lifted = dc.trace.back();
    const double real = lifted_rate_objective(lc, relift.psi_t, relift.psi_r);
    CHECK(std::abs(real - lifted) <= 1e-2 * lifted);
  }
}
