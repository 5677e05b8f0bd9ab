#pragma once

#include <vector>

#include "stapsdr/types.hpp"

namespace stapsdr {

/// Column-major stacking of a matrix into a vector.
VecC vec(const MatC& A);

/// Inverse of vec for a matrix of known shape.
MatC unvec(const VecC& x, Eigen::Index rows, Eigen::Index cols);

MatC kron(const MatC& A, const MatC& B);

/// The (p,q) commutation permutation: K_{p,q} vec(A) = vec(A^T) for p x q A.
/// Held as an index map, never as a dense matrix.
class CommutationMatrix {
 public:
  CommutationMatrix(Eigen::Index p, Eigen::Index q);

  Eigen::Index p() const { return p_; }
  Eigen::Index q() const { return q_; }
  Eigen::Index size() const { return p_ * q_; }

  /// y = K_{p,q} x
  VecC apply(const VecC& x) const;
  /// y = K_{p,q}^T x = K_{q,p} x
  VecC apply_transpose(const VecC& x) const;

  /// Dense materialization, for tests and tiny sizes only.
  MatR dense() const;

 private:
  Eigen::Index p_, q_;
  std::vector<Eigen::Index> perm_;  // apply: y[i] = x[perm_[i]]
};

MatC hermitian_part(const MatC& A);
MatC antihermitian_part(const MatC& A);

/// Relative deviation of A from Hermitian symmetry: ||A - A^H|| / max(||A||, eps).
double hermitian_asymmetry(const MatC& A);

/// (A + A^H)/2. If asymmetry_out is non-null it receives the relative asymmetry.
MatC symmetrize(const MatC& A, double* asymmetry_out = nullptr);

/// Eigenvalues of a Hermitian matrix, ascending.
VecR hermitian_eigenvalues(const MatC& A);

struct HermitianEig {
  VecR values;   // ascending
  MatC vectors;  // columns
};
HermitianEig hermitian_eig(const MatC& A);

/// Count of eigenvalues of a Hermitian PSD-ish matrix above tol*max|eig|.
int numeric_rank_hermitian(const MatC& A, double tol = kRankTol);

/// Count of singular values above tol * sigma_max.
int numeric_rank(const MatC& A, double tol = kRankTol);

double min_eigenvalue(const MatC& A);

bool is_psd(const MatC& A, double tol_rel = 1e-10);

/// [[Re H, -Im H], [Im H, Re H]]: real symmetric embedding whose spectrum is
/// that of H with every eigenvalue doubled in multiplicity.
MatR complex_to_real_embedding(const MatC& H);

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
/// With via_real_embedding the eigendecomposition runs on the 2Jx2J real
/// embedding instead of the complex matrix.
MatC psd_project(const MatC& A, bool via_real_embedding = false);

/// Orthogonal projector onto the nullspace of a Hermitian PSD matrix,
/// I - A A^dagger at the shared numeric-rank threshold.
MatC nullspace_projector(const MatC& A, double tol = kRankTol);

/// Orthogonal projector onto the range of a Hermitian PSD matrix.
MatC range_projector(const MatC& A, double tol = kRankTol);

}  // namespace stapsdr
