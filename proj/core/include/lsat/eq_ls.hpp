#pragma once

#include <optional>
#include <vector>

#include "lsat/dense_ls.hpp"
#include "lsat/matrix.hpp"

namespace lsat::eq {

// KKT systems whose reciprocal condition estimate falls below this are
// reported as singular.
inline constexpr double kSingularRcond = 1e-14;

// Solution of
//   minimize ||A theta - B||_F^2  subject to  C theta = D
// through the KKT system
//   M [theta; nu] = [A'B; D],   M = [A'A  C'; C  0],
// with the factorization of M kept for the backward pass. With no
// constraints (d = 0) this is the unconstrained Cholesky solve.
class KktSolution {
 public:
  const DenseMatrix& theta() const noexcept { return theta_; }
  const DenseMatrix& nu() const noexcept { return nu_; }
  const DenseMatrix& a() const noexcept { return a_; }
  const DenseMatrix& b() const noexcept { return b_; }
  const DenseMatrix& c() const noexcept { return c_; }
  const DenseMatrix& d() const noexcept { return d_; }
  Eigen::Index constraints() const noexcept { return c_.rows(); }

  // Solves M [x1; x2] = [top; bottom] with the cached factorization.
  void solve_system(const Eigen::Ref<const DenseMatrix>& top, const Eigen::Ref<const DenseMatrix>& bottom,
                    DenseMatrix& x1, DenseMatrix& x2) const;

  const dense::LsFactorization* unconstrained() const noexcept {
    return unconstrained_ ? &*unconstrained_ : nullptr;
  }

 private:
  friend KktSolution solve_kkt(DenseMatrix a, DenseMatrix b, DenseMatrix c, DenseMatrix d);
  KktSolution() = default;

  DenseMatrix theta_, nu_;
  DenseMatrix a_, b_, c_, d_;
  std::optional<dense::LsFactorization> unconstrained_;
  Eigen::MatrixXd ldl_;  // Bunch-Kaufman factor of M, column-major LAPACK layout
  std::vector<int> pivots_;
};

// Throws DimensionMismatch for non-conforming shapes, SingularKkt when M is
// numerically singular (C rank deficient, or A rank deficient on the
// nullspace of C), and for d = 0 the errors of dense::solve.
KktSolution solve_kkt(DenseMatrix a, DenseMatrix b, DenseMatrix c, DenseMatrix d);

struct KktGradients {
  DenseMatrix d_a, d_b, d_c, d_d;
};

// Adjoint of the KKT solve. With [H1; H2] = M^{-1} [dTheta; dNu]:
//   dA = (B - A theta) H1' - A H1 theta'
//   dB = A H1
//   dC = -nu H1' - H2 theta'
//   dD = H2
KktGradients backward_kkt(const KktSolution& s, const Eigen::Ref<const DenseMatrix>& d_theta,
                          const Eigen::Ref<const DenseMatrix>& d_nu);

}  // namespace lsat::eq
