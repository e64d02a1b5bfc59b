#include "lsat/dense_ls.hpp"

#include <Eigen/Cholesky>

#include <algorithm>

#include "lsat/errors.hpp"

namespace lsat::dense {

namespace {

using ColMajor = Eigen::MatrixXd;

// Right-looking unblocked Cholesky, only used to locate the offending pivot
// after the blocked factorization has failed.
RankDeficient locate_bad_pivot(const DenseMatrix& g, double threshold) {
  ColMajor l = g;
  const Eigen::Index n = l.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = l(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > threshold)) return RankDeficient(static_cast<std::size_t>(j), pivot, threshold);
    double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (l(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
    }
  }
  return RankDeficient(static_cast<std::size_t>(n), 0.0, threshold);
}

// Solves U'U x = rhs in place for each column of x.
void solve_upper_pair(const DenseMatrix& upper, ColMajor& x) {
  const auto u = upper.triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd col = x.col(j);
    u.transpose().solveInPlace(col);
    u.solveInPlace(col);
    x.col(j) = col;
  }
}

}  // namespace

DenseMatrix gram(const Eigen::Ref<const DenseMatrix>& a) {
  const Eigen::Index n = a.cols();
  DenseMatrix g = DenseMatrix::Zero(n, n);
  g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

DenseMatrix LsFactorization::solve_gram(const Eigen::Ref<const DenseMatrix>& rhs) const {
  require_shape(rhs, upper_.rows(), rhs.cols(), "right-hand side");
  ColMajor x = rhs;
  solve_upper_pair(upper_, x);
  return x;
}

LsFactorization solve(DenseMatrix a, DenseMatrix b) {
  if (a.rows() != b.rows()) {
    throw DimensionMismatch("A has " + std::to_string(a.rows()) + " rows but B has " +
                            std::to_string(b.rows()));
  }
  require_finite(a, "A");
  require_finite(b, "B");

  const Eigen::Index n = a.cols();
  const DenseMatrix g = gram(a);
  const double max_diag = n > 0 ? g.diagonal().maxCoeff() : 0.0;
  const double threshold = kPivotTolerance * max_diag;
  if (a.rows() < n || (n > 0 && !(max_diag > 0.0))) {
    throw RankDeficient(static_cast<std::size_t>(std::min(a.rows(), n)), 0.0, threshold);
  }

  Eigen::LLT<DenseMatrix, Eigen::Upper> llt(g);
  if (llt.info() != Eigen::Success) throw locate_bad_pivot(g, threshold);

  LsFactorization f;
  f.upper_ = llt.matrixU();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pivot = f.upper_(i, i) * f.upper_(i, i);
    if (!(pivot > threshold)) throw RankDeficient(static_cast<std::size_t>(i), pivot, threshold);
  }

  // Column-major copy of B so that A'b_j is the same matrix-vector kernel
  // whatever the number of columns.
  const ColMajor b_cols = b;
  ColMajor h(n, b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    h.col(j).noalias() = a.transpose() * b_cols.col(j);
  }
  solve_upper_pair(f.upper_, h);

  f.theta_ = h;
  f.a_ = std::move(a);
  f.b_ = std::move(b);
  return f;
}

LsGradients backward(const LsFactorization& f, const Eigen::Ref<const DenseMatrix>& d_theta) {
  require_shape(d_theta, f.features(), f.outputs(), "dTheta");

  const DenseMatrix c = f.solve_gram(d_theta);
  const DenseMatrix& a = f.a();

  LsGradients out;
  out.d_b.noalias() = a * c;

  DenseMatrix residual = f.b();
  residual.noalias() -= a * f.theta();

  // A C theta' is evaluated as (A C) theta', which reuses dB and costs k n m
  // instead of k n^2.
  out.d_a.noalias() = residual * c.transpose();
  out.d_a.noalias() -= out.d_b * f.theta().transpose();
  return out;
}

}  // namespace lsat::dense
