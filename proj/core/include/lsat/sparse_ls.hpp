#pragma once

#include <Eigen/SparseCore>

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "lsat/matrix.hpp"

namespace lsat::sparse {

// Matrix-free k x n operator. Both callbacks must be safe to call
// concurrently and deterministic.
struct LinearOperator {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::function<Vector(const Vector&)> apply;            // R^n -> R^k
  std::function<Vector(const Vector&)> apply_transpose;  // R^k -> R^n
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Wraps a stored sparse matrix. The operator refers to `m`, which must
// outlive it.
LinearOperator make_operator(const SparseMatrix& m);
LinearOperator make_operator(const DenseMatrix& m);

// Probes <A u, v> against <u, A' v> with fixed-seed random vectors. Throws
// AdjointInconsistent when they differ by more than 1e-10 relative.
void check_adjoint(const LinearOperator& a);

// Entries (row, col) of A through which the hyper-parameters act, sorted
// lexicographically without duplicates, together with A's values there.
class SparsityPattern {
 public:
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    double value;
  };

  SparsityPattern() = default;
  // Throws DimensionMismatch for out-of-bounds indices and std::invalid_argument
  // for unsorted or duplicated entries.
  SparsityPattern(std::vector<Entry> entries, Eigen::Index rows, Eigen::Index cols);

  // Every stored nonzero of `m`, in row-major order.
  static SparsityPattern from_matrix(const SparseMatrix& m);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

struct CgOptions {
  double tol = 1e-10;
  // 0 selects the default of 10 * n.
  std::size_t max_iter = 0;
  // Record the residual norm after each iteration in SparseSolveState.
  bool keep_history = false;
};

struct SparseSolveState {
  DenseMatrix theta;
  std::vector<std::size_t> per_column_iterations;
  // Final ||A'A theta_j - A'b_j||_2, recomputed from scratch.
  std::vector<double> per_column_residuals;
  // Per column: residual norm at iteration 0, 1, ... (only with keep_history).
  std::vector<std::vector<double>> residual_history;
};

// Solves the normal equations A'A theta = A'B column by column with a
// conjugate-residual Krylov iteration, to
//   ||A'A theta_j - A'b_j|| <= tol * (1 + ||A'b_j||).
// Throws NoConvergence listing the failed columns, AdjointInconsistent from
// the initial probe.
SparseSolveState solve_cg(const LinearOperator& a, const Eigen::Ref<const DenseMatrix>& b,
                          const CgOptions& options = {});

// Solves (A'A) X = rhs column by column with the same iteration.
SparseSolveState solve_normal(const LinearOperator& a, const Eigen::Ref<const DenseMatrix>& rhs,
                              const CgOptions& options = {});

struct RestrictedGradients {
  std::vector<double> d_a_on_pattern;  // aligned with pattern.entries()
  DenseMatrix d_b;                     // k x m
};

// Gradient of the solution map restricted to the entries of `pattern`:
// C = (A'A)^{-1} dTheta, dB = A C and for (i, j) in the pattern
//   dA_ij = <(B - A theta)_i, C_j> - <(A C)_i, theta_j>
// (rows of the k x m and n x m matrices), i.e. entry (i, j) of
// (B - A theta) C' - A C theta'. Entries outside the pattern are never formed.
RestrictedGradients backward_restricted(const LinearOperator& a, const SparsityPattern& pattern,
                                        const Eigen::Ref<const DenseMatrix>& b,
                                        const Eigen::Ref<const DenseMatrix>& theta,
                                        const Eigen::Ref<const DenseMatrix>& d_theta,
                                        const CgOptions& options = {});

}  // namespace lsat::sparse
