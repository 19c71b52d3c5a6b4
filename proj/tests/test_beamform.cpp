#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "starmec/beamform.hpp"
#include "starmec/metrics.hpp"
#include "support.hpp"

using namespace starmec;
using starmec::testing::rel_err;

namespace {

double quotient(const QuadraticPair& qp, const CVec& v) {
  return (v.adjoint() * qp.a_mat * v)(0).real() / (v.adjoint() * qp.b_mat * v)(0).real();
}

struct Instance {
  std::vector<CVec> g;
  RVec p;
  double s2;
};

Instance random_instance(int k, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Instance in;
  for (int i = 0; i < k; ++i) in.g.push_back(testing::random_cvec(n, rng));
  in.p = RVec(k);
  for (int i = 0; i < k; ++i) in.p(i) = u(rng);
  in.s2 = u(rng);
  return in;
}

}  // namespace

TEST_CASE("quadratic pair assembly") {
  std::mt19937_64 rng(1);
  const Instance in = random_instance(3, 4, rng);
  for (int k = 0; k < 3; ++k) {
    const QuadraticPair qp = make_quadratic_pair(k, in.g, in.p, in.s2);
    CHECK((qp.a_mat - in.p(k) * in.g[k] * in.g[k].adjoint()).norm() < 1e-13);
    CHECK((qp.b_mat - testing::interference_matrix(k, in.g, in.p, in.s2)).norm() < 1e-13);
  }
}

TEST_CASE("single user gets the matched filter") {
  std::mt19937_64 rng(2);
  const CVec g = testing::random_cvec(5, rng);
  QuadraticPair qp{2.0 * g * g.adjoint(), 0.3 * CMat::Identity(5, 5)};
  const CVec v = solve_beamformer(qp);
  CHECK(std::abs(v.norm() - 1.0) < 1e-14);
  CHECK(std::abs(std::abs(v.dot(g)) - g.norm()) < 1e-12 * g.norm());
}

TEST_CASE("achieved SINR is the largest generalized eigenvalue") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(3, 4, rng);
    const QuadraticPair qp = make_quadratic_pair(trial % 3, in.g, in.p, in.s2);
    const CVec v = solve_beamformer(qp);
    Eigen::ComplexEigenSolver<CMat> es(qp.b_mat.inverse() * qp.a_mat);
    double lmax = 0.0;
    for (int i = 0; i < 4; ++i) lmax = std::max(lmax, es.eigenvalues()(i).real());
    CHECK(rel_err(quotient(qp, v), lmax) < 1e-9);
  }
}

TEST_CASE("random perturbations never improve the SINR") {
  std::mt19937_64 rng(4);
  const Instance in = random_instance(4, 4, rng);
  const QuadraticPair qp = make_quadratic_pair(1, in.g, in.p, in.s2);
  const CVec v = solve_beamformer(qp);
  const double best = quotient(qp, v);
  std::uniform_real_distribution<double> eps(1e-4, 1e-1);
  for (int t = 0; t < 1000; ++t) {
    const CVec w = v + eps(rng) * testing::random_cvec(4, rng);
    CHECK(quotient(qp, w) <= best * (1.0 + 1e-12));
  }
  for (int t = 0; t < 100; ++t) {
    const CVec w = testing::random_cvec(4, rng);
    CHECK(quotient(qp, w) <= best * (1.0 + 1e-12));
  }
}

TEST_CASE("direction does not depend on a common power scale") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = random_instance(3, 3, rng);
    const CVec v1 = solve_beamformer(make_quadratic_pair(0, in.g, in.p, in.s2));
    const CVec v2 = solve_beamformer(make_quadratic_pair(0, in.g, 7.5 * in.p, 7.5 * in.s2));
    CHECK(std::abs(v1.dot(v2)) >= 1.0 - 1e-9);
  }
}

TEST_CASE("zero-power user gets the interference-aware matched filter") {
  std::mt19937_64 rng(6);
  Instance in = random_instance(3, 4, rng);
  in.p(2) = 0.0;
  const CMat b = testing::interference_matrix(2, in.g, in.p, in.s2);
  const CVec v = solve_all_beamformers(in.g, in.p, in.s2).v[2];
  const CVec want = b.ldlt().solve(in.g[2]).normalized();
  CHECK(std::abs(std::abs(v.dot(want)) - 1.0) < 1e-12);
  const LinkGains lg = link_gains(BeamformerSet{{v, v, v}}, in.g, in.s2);
  CHECK(sinr_from_gains(2, lg, in.p) == 0.0);
  CHECK_THROWS_AS(solve_beamformer(make_quadratic_pair(2, in.g, in.p, in.s2)),
                  std::invalid_argument);
}

TEST_CASE("two users, two antennas: grid over the unit sphere") {
  std::mt19937_64 rng(7);
  const double step = 5.0 * std::numbers::pi / 180.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Instance in = random_instance(2, 2, rng);
    for (int k = 0; k < 2; ++k) {
      const QuadraticPair qp = make_quadratic_pair(k, in.g, in.p, in.s2);
      const double best = quotient(qp, solve_beamformer(qp));
      double grid = 0.0, ga = 0.0, gb = 0.0;
      // Unit vectors modulo a common phase: (cos a, sin a e^{jb}).
      for (int i = 0; i <= 18; ++i) {
        for (int j = 0; j < 72; ++j) {
          const double a = i * step, b = j * step;
          CVec v(2);
          v << std::cos(a), std::polar(std::sin(a), b);
          const double q = quotient(qp, v);
          if (q > grid) {
            grid = q;
            ga = a;
            gb = b;
          }
        }
      }
      CHECK(grid <= best * (1.0 + 1e-12));
      // The grid maximizer sits within one mesh cell of the closed form.
      const CVec v = solve_beamformer(qp);
      const double a_star = std::atan2(std::abs(v(1)), std::abs(v(0)));
      CHECK(std::abs(ga - a_star) <= step);
      if (std::sin(2.0 * a_star) > 0.3) {
        const double db = std::remainder(gb - (std::arg(v(1)) - std::arg(v(0))),
                                         2.0 * std::numbers::pi);
        CHECK(std::abs(db) <= step);
      }
    }
  }
}

TEST_CASE("per-user optimum over random unit beamformers") {
  std::mt19937_64 rng(8);
  const SystemConfig cfg = make_default_config(8, 4, 2, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const ChannelSet cs = sample_channels(cfg, trial);
    const StarRisState s = testing::random_state(8, Protocol::kEnergySplitting, rng);
    const EnergyPartition a = testing::random_partition(4, rng);
    const BeamformerSet opt = solve_all_beamformers(cs, s, a, cfg);
    for (int k = 0; k < 4; ++k) {
      const double best = sinr(k, opt, cs, s, a, cfg);
      for (int t = 0; t < 100; ++t) {
        BeamformerSet other = opt;
        other.v[k] = testing::random_cvec(4, rng).normalized();
        CHECK(sinr(k, other, cs, s, a, cfg) <= best * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("zero forcing nulls interference") {
  std::mt19937_64 rng(9);
  std::vector<CVec> g;
  for (int k = 0; k < 4; ++k) g.push_back(testing::random_cvec(6, rng));
  const ZeroForcingResult zf = zero_forcing_beamformers(g);
  CHECK_FALSE(zf.least_squares);
  for (int k = 0; k < 4; ++k) {
    const double own = std::abs(zf.beamformers.v[k].dot(g[k]));
    for (int l = 0; l < 4; ++l)
      if (l != k) CHECK(std::abs(zf.beamformers.v[k].dot(g[l])) <= 1e-8 * own);
  }

  std::vector<CVec> many;
  for (int k = 0; k < 5; ++k) many.push_back(testing::random_cvec(3, rng));
  CHECK(zero_forcing_beamformers(many).least_squares);
}
