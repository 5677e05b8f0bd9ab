#include "doctest.h"
#include "stapsdr/linalg.hpp"
#include "support/oracles.hpp"

using namespace stapsdr;

TEST_CASE("vec/unvec round trip") {
  auto gen = oracle::rng(11);
  MatC A = oracle::random_matrix(gen, 4, 3);
  CHECK((unvec(vec(A), 4, 3) - A).norm() == 0.0);
  CHECK(vec(A)(5) == A(1, 1));  // column-major stacking
}

TEST_CASE("kron matches brute-force oracle") {
  auto gen = oracle::rng(12);
  MatC A = oracle::random_matrix(gen, 3, 2);
  MatC B = oracle::random_matrix(gen, 2, 4);
  CHECK((kron(A, B) - oracle::dense_kron(A, B)).norm() < 1e-14 * A.norm() * B.norm());
}

TEST_CASE("commutation matrix") {
  SUBCASE("K_{1,q} is the identity") {
    CommutationMatrix k(1, 5);
    CHECK((k.dense() - MatR::Identity(5, 5)).norm() == 0.0);
  }
  SUBCASE("K_{p,q} K_{q,p} = I") {
    CommutationMatrix kpq(3, 4), kqp(4, 3);
    auto gen = oracle::rng(13);
    VecC x = oracle::random_vector(gen, 12);
    CHECK((kpq.apply(kqp.apply(x)) - x).norm() == 0.0);
  }
  SUBCASE("vec of transpose, p = q = 2") {
    auto gen = oracle::rng(14);
    MatC A = oracle::random_matrix(gen, 2, 2);
    CommutationMatrix k(2, 2);
    CHECK((k.apply(vec(A)) - vec(A.transpose().eval())).norm() == 0.0);
  }
  SUBCASE("orthogonal permutation") {
    CommutationMatrix k(3, 2);
    MatR K = k.dense();
    CHECK((K * K.transpose() - MatR::Identity(6, 6)).norm() == 0.0);
    auto gen = oracle::rng(15);
    VecC x = oracle::random_vector(gen, 6);
    CHECK((k.apply_transpose(k.apply(x)) - x).norm() == 0.0);
  }
}

TEST_CASE("hermitian part decomposition") {
  auto gen = oracle::rng(16);
  MatC A = oracle::random_matrix(gen, 5, 5);
  MatC H = hermitian_part(A), S = antihermitian_part(A);
  CHECK((H - H.adjoint().eval()).norm() < 1e-14 * H.norm());
  CHECK((S + S.adjoint().eval()).norm() < 1e-14 * S.norm());
  CHECK((H + S - A).norm() < 1e-14 * A.norm());
}

TEST_CASE("complex to real embedding") {
  SUBCASE("identity") {
    CHECK((complex_to_real_embedding(MatC::Identity(3, 3)) - MatR::Identity(6, 6)).norm() ==
          0.0);
  }
  SUBCASE("eigenvalue doubling on diag(1, -1)") {
    MatC H = MatC::Zero(2, 2);
    H(0, 0) = 1.0;
    H(1, 1) = -1.0;
    Eigen::SelfAdjointEigenSolver<MatR> es(complex_to_real_embedding(H));
    VecR ev = es.eigenvalues();
    CHECK(ev(0) == doctest::Approx(-1.0));
    CHECK(ev(1) == doctest::Approx(-1.0));
    CHECK(ev(2) == doctest::Approx(1.0));
    CHECK(ev(3) == doctest::Approx(1.0));
  }
  SUBCASE("random Hermitian spectrum matches complex eigensolver, J = 6") {
    auto gen = oracle::rng(17);
    MatC H = oracle::random_hermitian(gen, 6);
    VecR complex_ev = hermitian_eigenvalues(H);
    Eigen::SelfAdjointEigenSolver<MatR> es(complex_to_real_embedding(H));
    VecR real_ev = es.eigenvalues();
    for (int i = 0; i < 6; ++i) {
      CHECK(real_ev(2 * i) == doctest::Approx(complex_ev(i)).epsilon(1e-12));
      CHECK(real_ev(2 * i + 1) == doctest::Approx(complex_ev(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("psd projection agrees between complex and embedded routes") {
  auto gen = oracle::rng(18);
  MatC A = oracle::random_hermitian(gen, 7);
  MatC p1 = psd_project(A, false);
  MatC p2 = psd_project(A, true);
  CHECK((p1 - p2).norm() < 1e-10 * (1.0 + A.norm()));
  CHECK(min_eigenvalue(p1) > -1e-12 * A.norm());
}

TEST_CASE("numeric rank and projectors") {
  auto gen = oracle::rng(19);
  MatC low = oracle::random_psd(gen, 6, 2);
  CHECK(numeric_rank_hermitian(low) == 2);
  CHECK(numeric_rank(low) == 2);
  MatC pn = nullspace_projector(low);
  MatC pr = range_projector(low);
  CHECK((pn + pr - MatC::Identity(6, 6)).norm() < 1e-12);
  CHECK((pn * low).norm() < 1e-12 * low.norm());
  CHECK((pr * low - low).norm() < 1e-12 * low.norm());
}

TEST_CASE("symmetrize reports asymmetry") {
  auto gen = oracle::rng(20);
  MatC A = oracle::random_hermitian(gen, 4);
  A(0, 1) += cxd(1e-3, 0.0);
  double asym = 0.0;
  MatC H = symmetrize(A, &asym);
  CHECK(asym > 1e-5);
  CHECK(hermitian_asymmetry(H) < 1e-15);
}
