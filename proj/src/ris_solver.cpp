#include "starmec/ris_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "starmec/metrics.hpp"

namespace starmec {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kFeasTol = 1e-8;

double cap_value(const CMat& psi, const CVec& z) {
  return psi.trace().real() - z.dot(psi * z).real();
}

// Interval for rho_t[m] implied by c * x + e <= eps, x = rho_t (or 1 - rho_t if flip).
void tighten(double c, double e, double eps, bool flip, double& lo, double& hi) {
  // Rewrite in terms of rho_t: flip means x = 1 - rho_t, so c x = c - c rho_t.
  double slope = flip ? -c : c;
  double offset = flip ? e + c : e;
  const double rhs = eps - offset;
  if (std::abs(slope) < 1e-15) {
    if (rhs < -1e-15) {
      lo = 1.0;
      hi = 0.0;
    }
    return;
  }
  if (slope > 0.0) {
    hi = std::min(hi, rhs / slope);
  } else {
    lo = std::max(lo, rhs / slope);
  }
}

// Surface subproblem solved by a barrier method over the reduced matrices.
// Elements whose split is pinned to 0 in a space are removed from that space's
// matrix, so every remaining block admits a strictly feasible point.
class SurfaceSubproblem {
 public:
  SurfaceSubproblem(const LiftedCoefficients& lc, const RisSolveOptions& opts,
                    const LiftedRisVariable& anchor);

  RisSubproblemResult solve();

 private:
  struct Block {
    std::vector<int> idx;    // kept full indices, ascending; the corner is last
    CMat wm;                 // columns w_kj = [hv; conj(d)] restricted to idx
    std::vector<int> owner;  // user k of each column
    RVec coef;               // p_j / noise_k
    CMat glin;
    CVec z;
    CMat anchor;
    double anchor_cap = 0.0;
  };
  struct Entry {
    int space;
    int i;
    double c;
  };
  // A linear functional on the diagonals: sum_e c_e X_{space}(i, i).
  struct DiagCol {
    Entry e[2];
    int n = 1;
    double rhs = 0.0;
  };
  struct Bound {
    int i;  // reduced transmit index
    int elem;
    bool has_lo;
    bool has_hi;
  };
  struct Eval {
    double phi = 0.0;
    double f = 0.0;
    RVec s;
    double slack[2] = {0.0, 0.0};
  };

  bool evaluate(const CMat (&x)[2], double t, Eval& e) const;
  double diag_value(const DiagCol& col, const CMat (&x)[2]) const;
  LiftedRisVariable to_variable(const CMat (&x)[2]) const;
  bool pull_into_caps(LiftedRisVariable& v) const;
  double surrogate(const LiftedRisVariable& v) const;

  const LiftedCoefficients& lc_;
  const RisSolveOptions& opts_;
  const LiftedRisVariable& anchor_;
  int k_users_;
  int m_;
  int n_;
  F2Linearization lin_f2_;
  RVec lo_;
  RVec hi_;
  double eps_;
  CVec z_full_[2];
  Block blk_[2];
  std::vector<int> pos_[2];  // full -> reduced index, -1 when removed
  std::vector<DiagCol> eqs_;
  std::vector<Bound> bounds_;
  CMat start_[2];
  bool has_interior_ = false;
};

SurfaceSubproblem::SurfaceSubproblem(const LiftedCoefficients& lc, const RisSolveOptions& opts,
                                     const LiftedRisVariable& anchor)
    : lc_(lc),
      opts_(opts),
      anchor_(anchor),
      k_users_(lc.num_users()),
      m_(lc.n_elements),
      n_(lc.n_elements + 1),
      lin_f2_(linearize_f2(lc, anchor.psi_t, anchor.psi_r)),
      eps_(opts.rank_tol) {
  if (anchor.psi_t.rows() != n_ || anchor.psi_r.rows() != n_ || anchor.rho_t.size() != m_ ||
      anchor.rho_r.size() != m_) {
    throw std::invalid_argument("solve_ris_subproblem: anchor has wrong dimensions");
  }
  for (Space s : {Space::kTransmit, Space::kReflect}) {
    const CMat& psi = anchor.psi(s);
    const RVec& rho = s == Space::kTransmit ? anchor.rho_t : anchor.rho_r;
    const double scale = std::max(1.0, psi.trace().real());
    if (min_eigenvalue(psi) < -1e-9 * scale) {
      throw std::invalid_argument("solve_ris_subproblem: anchor is not PSD");
    }
    for (int i = 0; i < m_; ++i) {
      if (std::abs(psi(i, i).real() - rho(i)) > kFeasTol || rho(i) < -kFeasTol ||
          rho(i) > 1.0 + kFeasTol) {
        throw std::invalid_argument("solve_ris_subproblem: anchor diagonal mismatch at " +
                                    std::to_string(i));
      }
    }
    if (std::abs(psi(m_, m_).real() - 1.0) > kFeasTol) {
      throw std::invalid_argument("solve_ris_subproblem: anchor corner entry is not 1");
    }
    if (rank_residual(psi) > eps_ * (1.0 + 1e-6) + 1e-12) {
      throw std::invalid_argument("solve_ris_subproblem: anchor violates the rank cap");
    }
  }
  if (coupling_residual(anchor) > kFeasTol) {
    throw std::invalid_argument("solve_ris_subproblem: anchor violates rho_t + rho_r = 1");
  }

  lo_ = RVec::Zero(m_);
  hi_ = RVec::Ones(m_);
  if (opts.frozen_rho_t) {
    if (opts.frozen_rho_t->size() != m_) {
      throw std::invalid_argument("solve_ris_subproblem: frozen split has wrong length");
    }
    if ((anchor.rho_t - *opts.frozen_rho_t).cwiseAbs().maxCoeff() > kFeasTol) {
      throw std::invalid_argument("solve_ris_subproblem: anchor differs from frozen split");
    }
    lo_ = opts.frozen_rho_t->cwiseMax(0.0).cwiseMin(1.0);
    hi_ = lo_;
  } else if (opts.protocol == Protocol::kModeSwitching) {
    for (int i = 0; i < m_; ++i) {
      const double at = std::clamp(anchor.rho_t(i), 0.0, 1.0);
      const double ar = std::clamp(anchor.rho_r(i), 0.0, 1.0);
      if (at - at * at > opts.binary_tol * (1.0 + 1e-9) ||
          ar - ar * ar > opts.binary_tol * (1.0 + 1e-9)) {
        throw std::invalid_argument("solve_ris_subproblem: anchor violates the binary cap at " +
                                    std::to_string(i));
      }
      double lo = 0.0;
      double hi = 1.0;
      tighten(1.0 - 2.0 * at, at * at, opts.binary_tol, false, lo, hi);
      tighten(1.0 - 2.0 * ar, ar * ar, opts.binary_tol, true, lo, hi);
      // The tangent cap alone lets min(rho, 1 - rho) creep past eps_rho by eps_rho^2
      // per outer step; keep the element on its side of the band.
      if (at <= 0.5) {
        hi = std::min(hi, opts.binary_tol * (1.0 - 1e-6));
      } else {
        lo = std::max(lo, 1.0 - opts.binary_tol * (1.0 - 1e-6));
      }
      lo_(i) = std::clamp(std::min(lo, anchor.rho_t(i)), 0.0, 1.0);
      hi_(i) = std::clamp(std::max(hi, anchor.rho_t(i)), 0.0, 1.0);
    }
  }

  // Reduced index sets, diagonal constraints and the interior start diagonal.
  RVec start_diag[2] = {RVec::Zero(n_), RVec::Zero(n_)};
  for (auto& p : pos_) p.assign(static_cast<std::size_t>(n_), -1);
  for (int i = 0; i < m_; ++i) {
    if (hi_(i) > 0.0) {
      pos_[0][i] = static_cast<int>(blk_[0].idx.size());
      blk_[0].idx.push_back(i);
    }
    if (lo_(i) < 1.0) {
      pos_[1][i] = static_cast<int>(blk_[1].idx.size());
      blk_[1].idx.push_back(i);
    }
  }
  for (int s = 0; s < 2; ++s) {
    pos_[s][m_] = static_cast<int>(blk_[s].idx.size());
    blk_[s].idx.push_back(m_);
    eqs_.push_back({{{s, pos_[s][m_], 1.0}, {}}, 1, 1.0});
    start_diag[s](m_) = 1.0;
  }
  for (int i = 0; i < m_; ++i) {
    const int it = pos_[0][i];
    const int ir = pos_[1][i];
    if (lo_(i) == hi_(i)) {
      const double v = lo_(i);
      if (it >= 0) eqs_.push_back({{{0, it, 1.0}, {}}, 1, v});
      if (ir >= 0) eqs_.push_back({{{1, ir, 1.0}, {}}, 1, 1.0 - v});
      start_diag[0](i) = v;
      start_diag[1](i) = 1.0 - v;
    } else {
      eqs_.push_back({{{0, it, 1.0}, {1, ir, 1.0}}, 2, 1.0});
      const bool has_lo = lo_(i) > 0.0;
      const bool has_hi = hi_(i) < 1.0;
      if (has_lo || has_hi) bounds_.push_back({it, i, has_lo, has_hi});
      const double mid = 0.5 * (lo_(i) + hi_(i));
      start_diag[0](i) = mid;
      start_diag[1](i) = 1.0 - mid;
    }
  }

  // Low-rank factors of A_k = sum_j p_j Qtilde_kj / noise_k and the reduced data.
  const PrincipalPair pt = principal_eigen(anchor.psi_t);
  const PrincipalPair pr = principal_eigen(anchor.psi_r);
  z_full_[0] = pt.vector;
  z_full_[1] = pr.vector;
  CMat glin_full[2] = {CMat::Zero(n_, n_), CMat::Zero(n_, n_)};
  for (int k = 0; k < k_users_; ++k) {
    glin_full[0] += lin_f2_.grad_t[k];
    glin_full[1] += lin_f2_.grad_r[k];
  }
  for (int s = 0; s < 2; ++s) {
    Block& b = blk_[s];
    const int nr = static_cast<int>(b.idx.size());
    const Space sp = s == 0 ? Space::kTransmit : Space::kReflect;
    std::vector<CVec> cols;
    std::vector<double> coefs;
    for (int k = 0; k < k_users_; ++k) {
      for (int j = 0; j < k_users_; ++j) {
        if (lc.spaces[j] != sp) continue;
        // Qtilde = Q + |d|^2 e e^T is rank one; factor it through its largest diagonal.
        CMat qt = lc.at(k, j);
        qt(m_, m_) += std::norm(lc.d(k, j));
        Eigen::Index piv = 0;
        const double top = qt.diagonal().real().maxCoeff(&piv);
        CVec w = CVec::Zero(nr);
        if (top > 0.0) {
          const CVec col = qt.col(piv) / std::sqrt(top);
          for (int a = 0; a < nr; ++a) w(a) = col(b.idx[a]);
        }
        cols.push_back(std::move(w));
        coefs.push_back(lc.powers(j) / lc.noise(k));
        b.owner.push_back(k);
      }
    }
    b.wm.resize(nr, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) b.wm.col(static_cast<Eigen::Index>(c)) = cols[c];
    b.coef = Eigen::Map<const RVec>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    b.glin.resize(nr, nr);
    b.anchor.resize(nr, nr);
    b.z.resize(nr);
    const CMat& apsi = anchor.psi(sp);
    for (int a = 0; a < nr; ++a) {
      b.z(a) = z_full_[s](b.idx[a]);
      for (int c = 0; c < nr; ++c) {
        b.glin(a, c) = glin_full[s](b.idx[a], b.idx[c]);
        b.anchor(a, c) = apsi(b.idx[a], b.idx[c]);
      }
    }
    b.anchor_cap = cap_value(b.anchor, b.z);
  }

  // Strictly feasible start: (1 - delta) anchor + delta diag(start_diag).
  double delta = 0.5;
  for (int s = 0; s < 2; ++s) {
    const Block& b = blk_[s];
    const int nr = static_cast<int>(b.idx.size());
    RVec dd(nr);
    for (int a = 0; a < nr; ++a) dd(a) = start_diag[s](b.idx[a]);
    const CMat dm = dd.cast<cdouble>().asDiagonal();
    const double dcap = cap_value(dm, b.z);
    const double room = eps_ - b.anchor_cap;
    if (room <= 1e-12 * eps_) {
      has_interior_ = false;
      return;
    }
    if (dcap > b.anchor_cap) delta = std::min(delta, 0.5 * room / (dcap - b.anchor_cap));
  }
  for (int s = 0; s < 2; ++s) {
    const Block& b = blk_[s];
    const int nr = static_cast<int>(b.idx.size());
    RVec dd(nr);
    for (int a = 0; a < nr; ++a) dd(a) = start_diag[s](b.idx[a]);
    start_[s] = (1.0 - delta) * b.anchor;
    start_[s].diagonal() += (delta * dd).cast<cdouble>();
    start_[s] = hermitian_part(start_[s]);
  }
  // Exact diagonal targets; the perturbation is far below delta * min(start_diag).
  for (const DiagCol& col : eqs_) {
    if (col.n == 1) start_[col.e[0].space](col.e[0].i, col.e[0].i) = col.rhs;
  }
  for (const DiagCol& col : eqs_) {
    if (col.n != 2) continue;
    const double t = start_[0](col.e[0].i, col.e[0].i).real();
    start_[1](col.e[1].i, col.e[1].i) = 1.0 - t;
  }
  has_interior_ = true;
}

double SurfaceSubproblem::diag_value(const DiagCol& col, const CMat (&x)[2]) const {
  double v = 0.0;
  for (int q = 0; q < col.n; ++q) v += col.e[q].c * x[col.e[q].space](col.e[q].i, col.e[q].i).real();
  return v;
}

bool SurfaceSubproblem::evaluate(const CMat (&x)[2], double t, Eval& e) const {
  e.s = RVec::Ones(k_users_);
  double logdet = 0.0;
  double lin = 0.0;
  for (int s = 0; s < 2; ++s) {
    const Block& b = blk_[s];
    Eigen::LLT<CMat> llt(x[s]);
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal().real();
    if ((diag.array() <= 0.0).any()) return false;
    logdet += 2.0 * diag.array().log().sum();
    const CMat y = x[s] * b.wm;
    for (Eigen::Index l = 0; l < b.wm.cols(); ++l) {
      e.s(b.owner[static_cast<std::size_t>(l)]) += b.coef(l) * b.wm.col(l).dot(y.col(l)).real();
    }
    e.slack[s] = eps_ - cap_value(x[s], b.z);
    if (!(e.slack[s] > 0.0)) return false;
    lin += herm_inner(b.glin, x[s]);
  }
  if (!(e.s.array() > 0.0).all()) return false;
  double barrier = logdet + std::log(e.slack[0]) + std::log(e.slack[1]);
  for (const Bound& bd : bounds_) {
    const double r = x[0](bd.i, bd.i).real();
    if (bd.has_lo) {
      if (!(r > lo_(bd.elem))) return false;
      barrier += std::log(r - lo_(bd.elem));
    }
    if (bd.has_hi) {
      if (!(r < hi_(bd.elem))) return false;
      barrier += std::log(hi_(bd.elem) - r);
    }
  }
  e.f = e.s.array().log().sum() / kLn2 - lin;
  e.phi = -t * e.f - barrier;
  return true;
}

LiftedRisVariable SurfaceSubproblem::to_variable(const CMat (&x)[2]) const {
  LiftedRisVariable v;
  CMat full[2];
  for (int s = 0; s < 2; ++s) {
    const Block& b = blk_[s];
    const int nr = static_cast<int>(b.idx.size());
    full[s] = CMat::Zero(n_, n_);
    const CMat h = hermitian_part(x[s]);
    for (int a = 0; a < nr; ++a) {
      for (int c = 0; c < nr; ++c) full[s](b.idx[a], b.idx[c]) = h(a, c);
    }
  }
  v.rho_t.resize(m_);
  for (int i = 0; i < m_; ++i) {
    double r;
    if (lo_(i) == hi_(i)) {
      r = lo_(i);
    } else {
      r = 0.5 * (full[0](i, i).real() - full[1](i, i).real() + 1.0);
    }
    v.rho_t(i) = std::clamp(r, lo_(i), hi_(i));
  }
  v.rho_r = RVec::Ones(m_) - v.rho_t;
  for (int i = 0; i < m_; ++i) {
    full[0](i, i) = v.rho_t(i);
    full[1](i, i) = v.rho_r(i);
  }
  full[0](m_, m_) = 1.0;
  full[1](m_, m_) = 1.0;
  v.psi_t = std::move(full[0]);
  v.psi_r = std::move(full[1]);
  return v;
}

// Moves v toward the anchor until both rank caps hold with a small margin.
bool SurfaceSubproblem::pull_into_caps(LiftedRisVariable& v) const {
  const double lim = eps_ * (1.0 - 1e-10);
  double theta = 0.0;
  for (int s = 0; s < 2; ++s) {
    const Space sp = s == 0 ? Space::kTransmit : Space::kReflect;
    const double c = cap_value(v.psi(sp), z_full_[s]);
    const double ca = cap_value(anchor_.psi(sp), z_full_[s]);
    if (c > lim) {
      if (!(c > ca)) return false;
      theta = std::max(theta, (c - lim) / (c - ca));
    }
  }
  if (theta <= 0.0) return true;
  theta = std::min(theta, 1.0);
  v.psi_t = (1.0 - theta) * v.psi_t + theta * anchor_.psi_t;
  v.psi_r = (1.0 - theta) * v.psi_r + theta * anchor_.psi_r;
  v.rho_t = (1.0 - theta) * v.rho_t + theta * anchor_.rho_t;
  v.rho_r = RVec::Ones(m_) - v.rho_t;
  for (int i = 0; i < m_; ++i) {
    v.psi_t(i, i) = v.rho_t(i);
    v.psi_r(i, i) = v.rho_r(i);
  }
  v.psi_t(m_, m_) = 1.0;
  v.psi_r(m_, m_) = 1.0;
  return true;
}

double SurfaceSubproblem::surrogate(const LiftedRisVariable& v) const {
  const RateTerms rt = rate_terms(lc_, v.psi_t, v.psi_r);
  double out = 0.0;
  for (int k = 0; k < k_users_; ++k) out += rt.f1(k) - lin_f2_.evaluate(k, v.psi_t, v.psi_r);
  return out;
}

RisSubproblemResult SurfaceSubproblem::solve() {
  RisSubproblemResult res;
  res.anchor_surrogate = surrogate(anchor_);
  res.solution = anchor_;
  res.surrogate = res.anchor_surrogate;
  res.kept_anchor = true;
  if (!has_interior_) {
    res.converged = true;
    return res;
  }

  CMat x[2] = {start_[0], start_[1]};
  const int k = k_users_;
  const int nb = static_cast<int>(bounds_.size());
  const int ne = static_cast<int>(eqs_.size());
  const int nd = k + 2;
  const int p = nd + nb + ne;
  const double m_barrier =
      static_cast<double>(blk_[0].idx.size() + blk_[1].idx.size()) + 2.0 +
      static_cast<double>(std::count_if(bounds_.begin(), bounds_.end(), [](const Bound& b) {
        return b.has_lo;
      }) + std::count_if(bounds_.begin(), bounds_.end(), [](const Bound& b) { return b.has_hi; }));

  Eval cur;
  if (!evaluate(x, 1.0, cur)) return res;

  // Start with a duality gap of the order of the first-order gain within the caps.
  double gnorm = 0.0;
  for (int s = 0; s < 2; ++s) {
    const Block& b = blk_[s];
    RVec w(b.wm.cols());
    for (Eigen::Index l = 0; l < b.wm.cols(); ++l) {
      w(l) = b.coef(l) / (kLn2 * cur.s(b.owner[static_cast<std::size_t>(l)]));
    }
    const CMat g = b.wm * w.cast<cdouble>().asDiagonal() * b.wm.adjoint() - b.glin;
    gnorm += g.squaredNorm();
  }
  const double gap0 = std::max(std::sqrt(gnorm * eps_), 1e-12);
  const double gap_tol = opts_.tol;
  double t = m_barrier / std::max(gap0, gap_tol);
  constexpr double kGrowth = 100.0;
  constexpr double kNewtonTol = 1e-8;
  if (!evaluate(x, t, cur)) return res;

  int total = 0;
  bool centered = false;
  while (total < opts_.max_iters) {
    centered = false;
    while (total < opts_.max_iters) {
      ++total;
      // Gradient of the barrier objective and H0^{-1}(-g) = X (-g) X per block.
      CVec xz[2];
      CMat y[2];
      CMat gram[2];
      CMat r[2];
      CMat g[2];
      double dinv_w[2];
      for (int s = 0; s < 2; ++s) {
        const Block& b = blk_[s];
        y[s] = x[s] * b.wm;
        gram[s] = b.wm.adjoint() * y[s];
        RVec w(b.wm.cols());
        for (Eigen::Index l = 0; l < b.wm.cols(); ++l) {
          w(l) = b.coef(l) / (kLn2 * cur.s(b.owner[static_cast<std::size_t>(l)]));
        }
        const int nr = static_cast<int>(b.idx.size());
        CMat wmat = CMat::Identity(nr, nr) - b.z * b.z.adjoint();
        g[s] = -t * (b.wm * w.cast<cdouble>().asDiagonal() * b.wm.adjoint() - b.glin);
        g[s] -= x[s].llt().solve(CMat::Identity(nr, nr));
        g[s] += wmat / cur.slack[s];
        xz[s] = x[s] * b.z;
        dinv_w[s] = cur.slack[s] * cur.slack[s];
      }
      RVec bcoef(nb);
      RVec dinv_b(nb);
      for (int q = 0; q < nb; ++q) {
        const Bound& bd = bounds_[q];
        const double rho = x[0](bd.i, bd.i).real();
        double gq = 0.0;
        double hq = 0.0;
        if (bd.has_lo) {
          const double sl = rho - lo_(bd.elem);
          gq -= 1.0 / sl;
          hq += 1.0 / (sl * sl);
        }
        if (bd.has_hi) {
          const double sl = hi_(bd.elem) - rho;
          gq += 1.0 / sl;
          hq += 1.0 / (sl * sl);
        }
        g[0](bd.i, bd.i) += gq;
        bcoef(q) = gq;
        dinv_b(q) = 1.0 / hq;
      }
      for (int s = 0; s < 2; ++s) r[s] = -(x[s] * g[s] * x[s]);

      // Columns: A_1..A_K, W_t, W_r, bound diagonals, equality diagonals.
      std::vector<DiagCol> dcols;
      dcols.reserve(static_cast<std::size_t>(nb + ne));
      for (const Bound& bd : bounds_) dcols.push_back({{{0, bd.i, 1.0}, {}}, 1, 0.0});
      for (const DiagCol& e : eqs_) dcols.push_back(e);

      RMat sm = RMat::Zero(p, p);
      RVec rhs = RVec::Zero(p);
      // Per-block helpers.
      for (int s = 0; s < 2; ++s) {
        const Block& b = blk_[s];
        const Eigen::Index nl = b.wm.cols();
        const int wcol = k + s;
        // A-A and A-W.
        for (Eigen::Index l = 0; l < nl; ++l) {
          const int kl = b.owner[static_cast<std::size_t>(l)];
          for (Eigen::Index l2 = 0; l2 < nl; ++l2) {
            const int kl2 = b.owner[static_cast<std::size_t>(l2)];
            sm(kl, kl2) += b.coef(l) * b.coef(l2) * std::norm(gram[s](l, l2));
          }
          const double aw = b.coef(l) * (y[s].col(l).squaredNorm() -
                                         std::norm(y[s].col(l).dot(b.z)));
          sm(kl, wcol) += aw;
          sm(wcol, kl) += aw;
        }
        const CMat rw = r[s] * b.wm;
        for (Eigen::Index l = 0; l < nl; ++l) {
          rhs(b.owner[static_cast<std::size_t>(l)]) += b.coef(l) * b.wm.col(l).dot(rw.col(l)).real();
        }
        const double zxz = b.z.dot(xz[s]).real();
        sm(wcol, wcol) = x[s].squaredNorm() - 2.0 * xz[s].squaredNorm() + zxz * zxz;
        rhs(wcol) = r[s].trace().real() - b.z.dot(r[s] * b.z).real();
      }
      for (int c = 0; c < nb + ne; ++c) {
        const DiagCol& dc = dcols[static_cast<std::size_t>(c)];
        const int col = nd + c;
        for (int q = 0; q < dc.n; ++q) {
          const Entry& en = dc.e[q];
          const Block& b = blk_[en.space];
          for (Eigen::Index l = 0; l < b.wm.cols(); ++l) {
            const double v = en.c * b.coef(l) * std::norm(y[en.space](en.i, l));
            sm(b.owner[static_cast<std::size_t>(l)], col) += v;
            sm(col, b.owner[static_cast<std::size_t>(l)]) += v;
          }
          const double vw =
              en.c * (x[en.space].row(en.i).squaredNorm() - std::norm(xz[en.space](en.i)));
          sm(k + en.space, col) += vw;
          sm(col, k + en.space) += vw;
          rhs(col) += en.c * r[en.space](en.i, en.i).real();
        }
        for (int c2 = c; c2 < nb + ne; ++c2) {
          const DiagCol& dc2 = dcols[static_cast<std::size_t>(c2)];
          double v = 0.0;
          for (int q = 0; q < dc.n; ++q) {
            for (int q2 = 0; q2 < dc2.n; ++q2) {
              if (dc.e[q].space != dc2.e[q2].space) continue;
              v += dc.e[q].c * dc2.e[q2].c *
                   std::norm(x[dc.e[q].space](dc.e[q].i, dc2.e[q2].i));
            }
          }
          sm(col, c2 + nd) = v;
          sm(c2 + nd, col) = v;
        }
      }
      for (int q = 0; q < k; ++q) sm(q, q) += kLn2 * cur.s(q) * cur.s(q) / t;
      sm(k, k) += dinv_w[0];
      sm(k + 1, k + 1) += dinv_w[1];
      for (int q = 0; q < nb; ++q) sm(nd + q, nd + q) += dinv_b(q);
      for (int q = 0; q < ne; ++q) {
        const DiagCol& e = eqs_[static_cast<std::size_t>(q)];
        rhs(nd + nb + q) -= e.rhs - diag_value(e, x);
      }
      const RVec coef = sm.partialPivLu().solve(rhs);
      if (!coef.allFinite()) break;

      CMat dx[2];
      for (int s = 0; s < 2; ++s) {
        const Block& b = blk_[s];
        RVec w(b.wm.cols());
        for (Eigen::Index l = 0; l < b.wm.cols(); ++l) {
          w(l) = coef(b.owner[static_cast<std::size_t>(l)]) * b.coef(l);
        }
        dx[s] = r[s] - y[s] * w.cast<cdouble>().asDiagonal() * y[s].adjoint();
        dx[s] -= coef(k + s) * (x[s] * x[s] - xz[s] * xz[s].adjoint());
      }
      // Diagonal columns act through X diag(c) X.
      RVec dcoef[2] = {RVec::Zero(x[0].rows()), RVec::Zero(x[1].rows())};
      for (int c = 0; c < nb + ne; ++c) {
        const DiagCol& dc = dcols[static_cast<std::size_t>(c)];
        for (int q = 0; q < dc.n; ++q) dcoef[dc.e[q].space](dc.e[q].i) += coef(nd + c) * dc.e[q].c;
      }
      for (int s = 0; s < 2; ++s) {
        dx[s] -= x[s] * dcoef[s].cast<cdouble>().asDiagonal() * x[s];
      }
      for (auto& d : dx) d = hermitian_part(d);
      const double dec = -(herm_inner(g[0], dx[0]) + herm_inner(g[1], dx[1]));
      if (!(dec >= 0.0) || dec * 0.5 <= kNewtonTol) {
        centered = true;
        break;
      }
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        CMat xn[2] = {x[0] + step * dx[0], x[1] + step * dx[1]};
        Eval en;
        if (!evaluate(xn, t, en)) continue;
        if (en.phi <= cur.phi - 0.25 * step * dec) {
          x[0] = std::move(xn[0]);
          x[1] = std::move(xn[1]);
          cur = std::move(en);
          moved = true;
          break;
        }
      }
      if (!moved) {
        centered = true;
        break;
      }
    }
    if (!centered) break;
    if (m_barrier / t <= gap_tol) break;
    t *= kGrowth;
    if (!evaluate(x, t, cur)) break;
  }
  res.iterations = total;
  res.dual_residual = m_barrier / t;
  res.converged = centered && res.dual_residual <= gap_tol;
  double eq_err = 0.0;
  for (const DiagCol& e : eqs_) eq_err = std::max(eq_err, std::abs(diag_value(e, x) - e.rhs));
  res.primal_residual = eq_err;

  LiftedRisVariable cand = to_variable(x);
  // Rounding the diagonal can leave eigenvalues slightly below zero: clip them, shrink
  // rows whose diagonal grew, then restore the diagonal with a nonnegative addition.
  for (Space sp : {Space::kTransmit, Space::kReflect}) {
    CMat& psi = sp == Space::kTransmit ? cand.psi_t : cand.psi_r;
    if (min_eigenvalue(psi) >= 0.0) continue;
    const RVec target = psi.diagonal().real();
    CMat p = project_psd(psi);
    RVec scale = RVec::Ones(n_);
    for (int i = 0; i < n_; ++i) {
      const double cur_ii = p(i, i).real();
      if (cur_ii > target(i) && cur_ii > 0.0) scale(i) = std::sqrt(std::max(target(i), 0.0) / cur_ii);
    }
    p = scale.asDiagonal() * p * scale.asDiagonal();
    for (int i = 0; i < n_; ++i) p(i, i) = target(i);
    psi = std::move(p);
  }
  if (pull_into_caps(cand)) {
    const double sv = surrogate(cand);
    if (sv > res.anchor_surrogate) {
      res.solution = std::move(cand);
      res.surrogate = sv;
      res.kept_anchor = false;
    }
  }
  return res;
}

}  // namespace

LiftedCoefficients build_lifted(const ChannelSet& cs, const BeamformerSet& bf,
                                const EnergyPartition& a, const SystemConfig& cfg) {
  const int k_users = cs.num_users();
  const int m = cs.n_elements();
  LiftedCoefficients lc;
  lc.n_elements = m;
  lc.spaces = cs.spaces;
  lc.d.resize(k_users, k_users);
  lc.noise.resize(k_users);
  lc.powers = transmit_powers(a, cfg);
  lc.q.reserve(static_cast<std::size_t>(k_users * k_users));
  for (int k = 0; k < k_users; ++k) {
    const CVec& v = bf.v.at(k);
    lc.noise(k) = cfg.noise_power_w * v.squaredNorm();
    const CVec gv = cs.g_mat * v;  // (G v_k); h_{s,k,j}^H = gv .* conj(h_{s,j})
    for (int j = 0; j < k_users; ++j) {
      const cdouble d = v.dot(cs.h_d[j]);
      lc.d(k, j) = d;
      const CVec hv = gv.cwiseProduct(cs.h_s[j].conjugate());
      CMat q(m + 1, m + 1);
      q.topLeftCorner(m, m).noalias() = hv * hv.adjoint();
      q.topRightCorner(m, 1) = hv * d;
      q.bottomLeftCorner(1, m) = std::conj(d) * hv.adjoint();
      q(m, m) = 0.0;
      lc.q.push_back(std::move(q));
    }
  }
  return lc;
}

LiftedRisVariable lift_state(const StarRisState& state) {
  const int m = state.n_elements();
  LiftedRisVariable out;
  for (Space s : {Space::kTransmit, Space::kReflect}) {
    CVec phi(m + 1);
    phi.head(m) = state.coefficients(s);
    phi(m) = 1.0;
    CMat psi = phi * phi.adjoint();
    for (int i = 0; i <= m; ++i) psi(i, i) = std::norm(phi(i));
    (s == Space::kTransmit ? out.psi_t : out.psi_r) = std::move(psi);
  }
  out.rho_t = state.rho_t();
  out.rho_r = state.rho_r();
  for (int i = 0; i < m; ++i) {
    out.psi_t(i, i) = out.rho_t(i);
    out.psi_r(i, i) = out.rho_r(i);
  }
  return out;
}

RateTerms rate_terms(const LiftedCoefficients& lc, const CMat& psi_t, const CMat& psi_r) {
  const int k_users = lc.num_users();
  RateTerms rt{RVec(k_users), RVec(k_users)};
  for (int k = 0; k < k_users; ++k) {
    double own = 0.0;
    double others = 0.0;
    for (int j = 0; j < k_users; ++j) {
      const CMat& psi = lc.spaces[j] == Space::kTransmit ? psi_t : psi_r;
      const double g = herm_inner(lc.at(k, j), psi) + std::norm(lc.d(k, j));
      (j == k ? own : others) += lc.powers(j) * g;
    }
    const double den = others + lc.noise(k);
    const double num = den + own;
    if (!(den > 0.0) || !(num > 0.0)) {
      throw std::domain_error("rate_terms: nonpositive log argument for user " +
                              std::to_string(k));
    }
    rt.f1(k) = std::log2(num);
    rt.f2(k) = std::log2(den);
  }
  return rt;
}

double lifted_rate_objective(const LiftedCoefficients& lc, const CMat& psi_t,
                             const CMat& psi_r) {
  const RateTerms rt = rate_terms(lc, psi_t, psi_r);
  return (rt.f1 - rt.f2).sum();
}

double F2Linearization::evaluate(int k, const CMat& psi_t, const CMat& psi_r) const {
  return value(k) + herm_inner(grad_t[k], psi_t - anchor_t) +
         herm_inner(grad_r[k], psi_r - anchor_r);
}

F2Linearization linearize_f2(const LiftedCoefficients& lc, const CMat& anchor_t,
                             const CMat& anchor_r) {
  const int k_users = lc.num_users();
  const int n = lc.n_elements + 1;
  F2Linearization lin;
  lin.anchor_t = anchor_t;
  lin.anchor_r = anchor_r;
  lin.value.resize(k_users);
  lin.denominator.resize(k_users);
  const RateTerms rt = rate_terms(lc, anchor_t, anchor_r);
  for (int k = 0; k < k_users; ++k) {
    lin.value(k) = rt.f2(k);
    const double den = std::exp2(rt.f2(k));
    lin.denominator(k) = den;
    CMat gt = CMat::Zero(n, n);
    CMat gr = CMat::Zero(n, n);
    for (int i = 0; i < k_users; ++i) {
      if (i == k) continue;
      (lc.spaces[i] == Space::kTransmit ? gt : gr) += (lc.powers(i) / (kLn2 * den)) * lc.at(k, i);
    }
    lin.grad_t.push_back(std::move(gt));
    lin.grad_r.push_back(std::move(gr));
  }
  return lin;
}

double rank_one_surrogate(const CMat& psi, const CMat& anchor) {
  const PrincipalPair pp = principal_eigen(anchor);
  // Upsilon = ||anchor||_s + <psi - anchor, z z^H> = z^H psi z.
  const double upsilon = pp.value + herm_inner(pp.vector * pp.vector.adjoint(), psi - anchor);
  return psi.trace().real() - upsilon;
}

RVec binary_surrogate(const RVec& rho, const RVec& anchor) {
  if (rho.size() != anchor.size()) {
    throw std::invalid_argument("binary_surrogate: length mismatch");
  }
  RVec out(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (!(rho(i) >= 0.0 && rho(i) <= 1.0) || !(anchor(i) >= 0.0 && anchor(i) <= 1.0)) {
      throw std::domain_error("binary_surrogate: entry outside [0, 1]");
    }
    const double omega = anchor(i) * anchor(i) + 2.0 * anchor(i) * (rho(i) - anchor(i));
    out(i) = rho(i) - omega;
  }
  return out;
}

RisSolveOptions ris_options(const SystemConfig& cfg) {
  RisSolveOptions o;
  o.protocol = cfg.protocol;
  o.rank_tol = cfg.rank_tol;
  o.binary_tol = cfg.binary_tol;
  o.dc_max_iters = cfg.dc_max_iters;
  return o;
}

RisSubproblemResult solve_ris_subproblem(const LiftedCoefficients& lc,
                                         const RisSolveOptions& opts,
                                         const LiftedRisVariable& anchor) {
  SurfaceSubproblem sp(lc, opts, anchor);
  return sp.solve();
}

RisSubproblemResult solve_ris_subproblem(const LiftedCoefficients& lc, const SystemConfig& cfg,
                                         const LiftedRisVariable& anchor) {
  return solve_ris_subproblem(lc, ris_options(cfg), anchor);
}

DcResult dc_outer_loop(const LiftedCoefficients& lc, const RisSolveOptions& opts,
                       const LiftedRisVariable& init) {
  DcResult out;
  out.solution = init;
  double current = lifted_rate_objective(lc, init.psi_t, init.psi_r);
  out.trace.push_back(current);
  out.rank_residuals.push_back(
      std::max(rank_residual(init.psi_t), rank_residual(init.psi_r)));
  for (int l = 0; l < opts.dc_max_iters; ++l) {
    const RisSubproblemResult r = solve_ris_subproblem(lc, opts, out.solution);
    ++out.iterations;
    if (!r.converged) ++out.unconverged_inner;
    out.worst_inner_residual =
        std::max({out.worst_inner_residual, r.primal_residual, r.dual_residual});
    if (r.kept_anchor) break;
    const double next = lifted_rate_objective(lc, r.solution.psi_t, r.solution.psi_r);
    out.solution = r.solution;
    out.trace.push_back(next);
    out.rank_residuals.push_back(
        std::max(rank_residual(r.solution.psi_t), rank_residual(r.solution.psi_r)));
    const double gain = next - current;
    current = next;
    if (gain < opts.dc_rel_tol * std::max(1.0, std::abs(current))) break;
  }
  return out;
}

StarRisState extract_state(const LiftedRisVariable& lifted, Protocol protocol) {
  const int m = static_cast<int>(lifted.rho_t.size());
  RVec phases[2];
  RVec rho[2];
  for (int s = 0; s < 2; ++s) {
    const CMat& psi = s == 0 ? lifted.psi_t : lifted.psi_r;
    const CVec u = principal_eigen(psi).vector;
    if (std::abs(u(m)) < 1e-6) {
      throw std::runtime_error("extract_state: principal eigenvector has a vanishing last entry");
    }
    const CVec phi = u / u(m);
    phases[s].resize(m);
    rho[s].resize(m);
    for (int i = 0; i < m; ++i) {
      phases[s](i) = std::arg(phi(i));
      rho[s](i) = std::min(std::norm(phi(i)), 1.0);
    }
  }
  RVec rt = rho[0];
  RVec rr = rho[1];
  for (int i = 0; i < m; ++i) {
    const double sum = rt(i) + rr(i);
    if (std::abs(sum - 1.0) > 1e-8) {
      if (sum > 0.0) {
        rt(i) /= sum;
      } else {
        rt(i) = 0.5;
      }
    }
    rt(i) = std::clamp(rt(i), 0.0, 1.0);
    if (protocol == Protocol::kModeSwitching) rt(i) = rt(i) >= 0.5 ? 1.0 : 0.0;
    rr(i) = 1.0 - rt(i);
  }
  return StarRisState(phases[0], phases[1], rt, rr, protocol);
}

double coupling_residual(const LiftedRisVariable& lifted) {
  return (lifted.rho_t + lifted.rho_r - RVec::Ones(lifted.rho_t.size())).cwiseAbs().maxCoeff();
}

double binary_gap(const RVec& rho) {
  double worst = 0.0;
  for (double r : rho) worst = std::max(worst, std::min(r, 1.0 - r));
  return worst;
}

}  // namespace starmec
