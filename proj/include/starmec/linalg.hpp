#pragma once

#include <complex>

#include <Eigen/Dense>

namespace starmec {

using cdouble = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

// Real inner product <A, B> = Re tr(A^H B) on Hermitian matrices.
inline double herm_inner(const CMat& a, const CMat& b) {
  return (a.conjugate().cwiseProduct(b)).real().sum();
}

inline CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

struct PrincipalPair {
  double value = 0.0;
  CVec vector;  // unit norm
};

PrincipalPair principal_eigen(const CMat& herm);

double min_eigenvalue(const CMat& herm);

// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to zero).
CMat project_psd(const CMat& herm);

// Tr(X) - lambda_max(X); zero iff X is rank one (for PSD X).
double rank_residual(const CMat& psd);

}  // namespace starmec
