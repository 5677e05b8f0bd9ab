#include "stapsdr/linalg.hpp"

#include <stdexcept>

namespace stapsdr {

VecC vec(const MatC& A) {
  return Eigen::Map<const VecC>(A.data(), A.size());
}

MatC unvec(const VecC& x, Eigen::Index rows, Eigen::Index cols) {
  if (x.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
  return Eigen::Map<const MatC>(x.data(), rows, cols);
}

MatC kron(const MatC& A, const MatC& B) {
  MatC out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

CommutationMatrix::CommutationMatrix(Eigen::Index p, Eigen::Index q) : p_(p), q_(q) {
  if (p < 1 || q < 1) throw std::invalid_argument("commutation: dims must be >= 1");
  perm_.resize(static_cast<size_t>(p * q));
  // vec(A^T)[j + i*q] = A(i, j) = vec(A)[i + j*p] for A of shape p x q.
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < q; ++j) perm_[static_cast<size_t>(j + i * q)] = i + j * p;
}

VecC CommutationMatrix::apply(const VecC& x) const {
  if (x.size() != size()) throw std::invalid_argument("commutation apply: size mismatch");
  VecC y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = x(perm_[static_cast<size_t>(i)]);
  return y;
}

VecC CommutationMatrix::apply_transpose(const VecC& x) const {
  if (x.size() != size()) throw std::invalid_argument("commutation apply: size mismatch");
  VecC y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(perm_[static_cast<size_t>(i)]) = x(i);
  return y;
}

MatR CommutationMatrix::dense() const {
  MatR K = MatR::Zero(size(), size());
  for (Eigen::Index i = 0; i < size(); ++i) K(i, perm_[static_cast<size_t>(i)]) = 1.0;
  return K;
}

MatC hermitian_part(const MatC& A) { return 0.5 * (A + A.adjoint()); }

MatC antihermitian_part(const MatC& A) { return 0.5 * (A - A.adjoint()); }

double hermitian_asymmetry(const MatC& A) {
  double n = A.norm();
  if (n == 0.0) return 0.0;
  return (A - A.adjoint().eval()).norm() / n;
}

MatC symmetrize(const MatC& A, double* asymmetry_out) {
  if (asymmetry_out) *asymmetry_out = hermitian_asymmetry(A);
  return hermitian_part(A);
}

VecR hermitian_eigenvalues(const MatC& A) {
  Eigen::SelfAdjointEigenSolver<MatC> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermitian eigensolver failed");
  return es.eigenvalues();
}

HermitianEig hermitian_eig(const MatC& A) {
  Eigen::SelfAdjointEigenSolver<MatC> es(A);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermitian eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

int numeric_rank_hermitian(const MatC& A, double tol) {
  VecR ev = hermitian_eigenvalues(A);
  double scale = ev.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) > tol * scale) ++r;
  return r;
}

int numeric_rank(const MatC& A, double tol) {
  Eigen::JacobiSVD<MatC> svd(A);
  const VecR& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}

double min_eigenvalue(const MatC& A) { return hermitian_eigenvalues(A).minCoeff(); }

bool is_psd(const MatC& A, double tol_rel) {
  VecR ev = hermitian_eigenvalues(A);
  double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  return ev.minCoeff() >= -tol_rel * scale;
}

MatR complex_to_real_embedding(const MatC& H) {
  const Eigen::Index n = H.rows();
  MatR E(2 * n, 2 * n);
  E.topLeftCorner(n, n) = H.real();
  E.topRightCorner(n, n) = -H.imag();
  E.bottomLeftCorner(n, n) = H.imag();
  E.bottomRightCorner(n, n) = H.real();
  return E;
}

MatC psd_project(const MatC& A, bool via_real_embedding) {
  if (!via_real_embedding) {
    HermitianEig eig = hermitian_eig(A);
    VecR clipped = eig.values.cwiseMax(0.0);
    return eig.vectors * clipped.asDiagonal() * eig.vectors.adjoint();
  }
  const Eigen::Index n = A.rows();
  Eigen::SelfAdjointEigenSolver<MatR> es(complex_to_real_embedding(A));
  if (es.info() != Eigen::Success) throw std::runtime_error("real eigensolver failed");
  VecR clipped = es.eigenvalues().cwiseMax(0.0);
  MatR P = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  // The embedding doubles every eigenvalue; average the two real copies back.
  MatC out(n, n);
  out.real() = 0.5 * (P.topLeftCorner(n, n) + P.bottomRightCorner(n, n));
  out.imag() = 0.5 * (P.bottomLeftCorner(n, n) - P.topRightCorner(n, n));
  return hermitian_part(out);
}

MatC nullspace_projector(const MatC& A, double tol) {
  HermitianEig eig = hermitian_eig(A);
  double scale = std::max(eig.values.cwiseAbs().maxCoeff(), 0.0);
  MatC P = MatC::Zero(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (scale == 0.0 || std::abs(eig.values(i)) <= tol * scale)
      P += eig.vectors.col(i) * eig.vectors.col(i).adjoint();
  }
  return P;
}

MatC range_projector(const MatC& A, double tol) {
  return MatC::Identity(A.rows(), A.cols()) - nullspace_projector(A, tol);
}

}  // namespace stapsdr
