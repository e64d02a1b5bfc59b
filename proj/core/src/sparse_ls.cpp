#include "lsat/sparse_ls.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <tuple>

#include "lsat/errors.hpp"

namespace lsat::sparse {

namespace {

constexpr double kAdjointTolerance = 1e-10;
constexpr std::uint64_t kProbeSeed = 0x1d0b5e11a5ULL;

Vector apply_checked(const LinearOperator& a, const Vector& x) {
  Vector y = a.apply(x);
  if (y.size() != a.rows) throw DimensionMismatch("operator apply returned a vector of wrong length");
  return y;
}

Vector apply_transpose_checked(const LinearOperator& a, const Vector& y) {
  Vector x = a.apply_transpose(y);
  if (x.size() != a.cols) {
    throw DimensionMismatch("operator apply_transpose returned a vector of wrong length");
  }
  return x;
}

Vector normal_apply(const LinearOperator& a, const Vector& x) {
  return apply_transpose_checked(a, apply_checked(a, x));
}

struct ColumnResult {
  Vector x;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> history;
};

// Conjugate residual iteration on the SPD system K x = rhs, K = A'A. It
// minimizes ||rhs - K x|| over the growing Krylov space, so the recursively
// updated residual norm is non-increasing.
ColumnResult conjugate_residual(const LinearOperator& a, const Vector& rhs, double tol,
                                std::size_t max_iter, bool keep_history) {
  ColumnResult out;
  const double threshold = tol * (1.0 + rhs.norm());
  out.x = Vector::Zero(a.cols);

  Vector r = rhs;
  double res = r.norm();
  if (keep_history) out.history.push_back(res);
  if (res <= threshold) {
    out.residual = res;
    out.converged = true;
    return out;
  }

  Vector kr = normal_apply(a, r);
  Vector p = r;
  Vector kp = kr;
  double rkr = r.dot(kr);

  while (out.iterations < max_iter) {
    const double denom = kp.squaredNorm();
    if (!(denom > 0.0)) break;
    const double alpha = rkr / denom;
    out.x.noalias() += alpha * p;
    r.noalias() -= alpha * kp;
    ++out.iterations;
    res = r.norm();
    if (keep_history) out.history.push_back(res);

    if (res <= threshold) {
      // The recursive residual drifts from the true one; confirm and restart
      // from the true residual if needed.
      Vector true_r = rhs - normal_apply(a, out.x);
      const double true_res = true_r.norm();
      if (true_res <= threshold) {
        out.residual = true_res;
        out.converged = true;
        return out;
      }
      r = std::move(true_r);
      kr = normal_apply(a, r);
      p = r;
      kp = kr;
      rkr = r.dot(kr);
      continue;
    }

    kr = normal_apply(a, r);
    const double rkr_next = r.dot(kr);
    const double beta = rkr_next / rkr;
    rkr = rkr_next;
    p = r + beta * p;
    kp = kr + beta * kp;
  }

  out.residual = (rhs - normal_apply(a, out.x)).norm();
  out.converged = out.residual <= threshold;
  return out;
}

SparseSolveState solve_columns(const LinearOperator& a, const Eigen::Ref<const DenseMatrix>& rhs,
                               const CgOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("CG tolerance must be positive");
  const std::size_t max_iter =
      options.max_iter > 0 ? options.max_iter : std::max<std::size_t>(1, 10 * static_cast<std::size_t>(a.cols));

  SparseSolveState state;
  state.theta.resize(a.cols, rhs.cols());
  std::vector<std::size_t> failed;
  for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
    ColumnResult col = conjugate_residual(a, rhs.col(j), options.tol, max_iter, options.keep_history);
    state.theta.col(j) = col.x;
    state.per_column_iterations.push_back(col.iterations);
    state.per_column_residuals.push_back(col.residual);
    if (options.keep_history) state.residual_history.push_back(std::move(col.history));
    if (!col.converged) failed.push_back(static_cast<std::size_t>(j));
  }
  if (!failed.empty()) throw NoConvergence(std::move(failed));
  return state;
}

DenseMatrix apply_columns(const LinearOperator& a, const Eigen::Ref<const DenseMatrix>& x) {
  DenseMatrix y(a.rows, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) = apply_checked(a, x.col(j));
  return y;
}

}  // namespace

LinearOperator make_operator(const SparseMatrix& m) {
  return {m.rows(), m.cols(), [&m](const Vector& x) -> Vector { return m * x; },
          [&m](const Vector& y) -> Vector { return m.transpose() * y; }};
}

LinearOperator make_operator(const DenseMatrix& m) {
  return {m.rows(), m.cols(), [&m](const Vector& x) -> Vector { return m * x; },
          [&m](const Vector& y) -> Vector { return m.transpose() * y; }};
}

void check_adjoint(const LinearOperator& a) {
  if (!a.apply || !a.apply_transpose) throw std::invalid_argument("operator callbacks are empty");
  std::mt19937_64 rng(kProbeSeed);
  std::normal_distribution<double> normal;
  Vector u(a.cols), v(a.rows);
  for (auto& x : u) x = normal(rng);
  for (auto& x : v) x = normal(rng);
  const Vector au = apply_checked(a, u);
  const Vector atv = apply_transpose_checked(a, v);
  const double lhs = au.dot(v);
  const double rhs = u.dot(atv);
  const double scale = au.norm() * v.norm() + u.norm() * atv.norm();
  if (!(std::abs(lhs - rhs) <= kAdjointTolerance * scale)) throw AdjointInconsistent(lhs, rhs);
}

SparsityPattern::SparsityPattern(std::vector<Entry> entries, Eigen::Index rows, Eigen::Index cols)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      throw DimensionMismatch("sparsity pattern entry (" + std::to_string(e.row) + ", " +
                              std::to_string(e.col) + ") is out of bounds");
    }
    if (i > 0) {
      const auto& prev = entries_[i - 1];
      if (std::tie(prev.row, prev.col) >= std::tie(e.row, e.col)) {
        throw std::invalid_argument("sparsity pattern must be sorted without duplicates");
      }
    }
  }
}

SparsityPattern SparsityPattern::from_matrix(const SparseMatrix& m) {
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
      entries.push_back({it.row(), it.col(), it.value()});
    }
  }
  return SparsityPattern(std::move(entries), m.rows(), m.cols());
}

SparseSolveState solve_cg(const LinearOperator& a, const Eigen::Ref<const DenseMatrix>& b,
                          const CgOptions& options) {
  require_shape(b, a.rows, b.cols(), "B");
  require_finite(b, "B");
  check_adjoint(a);
  DenseMatrix rhs(a.cols, b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) rhs.col(j) = apply_transpose_checked(a, b.col(j));
  return solve_columns(a, rhs, options);
}

SparseSolveState solve_normal(const LinearOperator& a, const Eigen::Ref<const DenseMatrix>& rhs,
                              const CgOptions& options) {
  require_shape(rhs, a.cols, rhs.cols(), "right-hand side");
  require_finite(rhs, "right-hand side");
  return solve_columns(a, rhs, options);
}

RestrictedGradients backward_restricted(const LinearOperator& a, const SparsityPattern& pattern,
                                        const Eigen::Ref<const DenseMatrix>& b,
                                        const Eigen::Ref<const DenseMatrix>& theta,
                                        const Eigen::Ref<const DenseMatrix>& d_theta,
                                        const CgOptions& options) {
  require_shape(b, a.rows, b.cols(), "B");
  require_shape(theta, a.cols, b.cols(), "theta");
  require_shape(d_theta, a.cols, b.cols(), "dTheta");
  for (const auto& e : pattern.entries()) {
    if (e.row >= a.rows || e.col >= a.cols) throw DimensionMismatch("sparsity pattern exceeds operator shape");
  }

  const DenseMatrix c = solve_normal(a, d_theta, options).theta;

  RestrictedGradients out;
  out.d_b = apply_columns(a, c);
  const DenseMatrix residual = b - apply_columns(a, theta);

  out.d_a_on_pattern.reserve(pattern.size());
  for (const auto& e : pattern.entries()) {
    out.d_a_on_pattern.push_back(residual.row(e.row).dot(c.row(e.col)) -
                                 out.d_b.row(e.row).dot(theta.row(e.col)));
  }
  return out;
}

}  // namespace lsat::sparse
