#include "starmec/linalg.hpp"

namespace starmec {

PrincipalPair principal_eigen(const CMat& herm) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(herm));
  const Eigen::Index last = herm.rows() - 1;
  return {es.eigenvalues()(last), es.eigenvectors().col(last)};
}

double min_eigenvalue(const CMat& herm) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(herm), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CMat project_psd(const CMat& herm) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(herm));
  const RVec& lambda = es.eigenvalues();
  if (lambda(0) >= 0.0) return hermitian_part(herm);
  const CMat& u = es.eigenvectors();
  return u * lambda.cwiseMax(0.0).asDiagonal() * u.adjoint();
}

double rank_residual(const CMat& psd) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(psd), Eigen::EigenvaluesOnly);
  return psd.trace().real() - es.eigenvalues()(psd.rows() - 1);
}

}  // namespace starmec
