#pragma once

#include "lsat/matrix.hpp"

namespace lsat::dense {

// Relative pivot tolerance for the Gram Cholesky: a pivot is rejected when it
// is <= kPivotTolerance * max(diag(G)).
inline constexpr double kPivotTolerance = 1e-12;

// G = A'A, exactly symmetric.
DenseMatrix gram(const Eigen::Ref<const DenseMatrix>& a);

// Result of a dense least squares solve: the minimizer theta of ||A theta - B||_F^2
// together with the upper Cholesky factor U of A'A = U'U and the problem data,
// all kept for the backward pass.
class LsFactorization {
 public:
  const DenseMatrix& theta() const noexcept { return theta_; }
  const DenseMatrix& a() const noexcept { return a_; }
  const DenseMatrix& b() const noexcept { return b_; }
  const DenseMatrix& upper_factor() const noexcept { return upper_; }

  Eigen::Index rows() const noexcept { return a_.rows(); }
  Eigen::Index features() const noexcept { return a_.cols(); }
  Eigen::Index outputs() const noexcept { return b_.cols(); }

  // Solves (A'A) X = rhs with the cached factor, one column at a time.
  DenseMatrix solve_gram(const Eigen::Ref<const DenseMatrix>& rhs) const;

 private:
  friend LsFactorization solve(DenseMatrix a, DenseMatrix b);
  LsFactorization() = default;

  DenseMatrix a_;
  DenseMatrix b_;
  DenseMatrix upper_;
  DenseMatrix theta_;
};

// Solves min ||A theta - B||_F^2 through the Gram matrix and its Cholesky
// factorization. Takes A and B by value so callers can move large operands in.
//
// Throws DimensionMismatch if A and B have different row counts,
// NonFiniteInput on NaN/Inf data and RankDeficient when a Cholesky pivot is
// not above kPivotTolerance * max(diag(A'A)).
//
// Each column of theta depends only on the matching column of B: the products
// A'b_j and both triangular solves run per column, so solving column by
// column gives bitwise identical results.
LsFactorization solve(DenseMatrix a, DenseMatrix b);

struct LsGradients {
  DenseMatrix d_a;  // k x n
  DenseMatrix d_b;  // k x m
};

// Pulls a cotangent dTheta on theta back to (A, B):
//   C  = (A'A)^{-1} dTheta
//   dA = (B - A theta) C' - A C theta'
//   dB = A C
LsGradients backward(const LsFactorization& f, const Eigen::Ref<const DenseMatrix>& d_theta);

}  // namespace lsat::dense
