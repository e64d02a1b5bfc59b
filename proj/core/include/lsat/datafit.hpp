#pragma once

#include <string>
#include <vector>

#include "lsat/featurize.hpp"
#include "lsat/hyper.hpp"
#include "lsat/matrix.hpp"

namespace lsat::fit {

// Raw inputs u_i (one per row) and targets y_i (one per row; one-hot rows
// for classification).
struct Dataset {
  DenseMatrix inputs;
  DenseMatrix targets;

  Eigen::Index rows() const noexcept { return inputs.rows(); }
  // Throws DimensionMismatch/NonFiniteInput.
  void validate() const;
  // Throws std::invalid_argument unless every target row is a unit basis vector.
  void require_one_hot() const;
};

struct RegularizerTerm {
  DenseMatrix matrix;
  std::string label;
};

struct Penalty {
  enum class Kind { square, huber, bisquare, cross_entropy };
  Kind kind = Kind::square;
  double m = 1.0;  // knee for huber and bisquare

  static Penalty square() { return {Kind::square, 1.0}; }
  static Penalty huber(double m) { return {Kind::huber, m}; }
  static Penalty bisquare(double m) { return {Kind::bisquare, m}; }
  static Penalty cross_entropy() { return {Kind::cross_entropy, 1.0}; }

  // Throws std::invalid_argument for a non-positive or non-finite knee.
  void validate() const;
};

const char* to_string(Penalty::Kind kind) noexcept;

// Loss of one prediction yhat against target y. For cross_entropy, y must be
// a unit vector.
double penalty_value(const Penalty& pen, const Eigen::Ref<const Vector>& yhat, const Eigen::Ref<const Vector>& y);
// Gradient of penalty_value in yhat. At ||r|| = M the inner branch is used.
Vector penalty_grad(const Penalty& pen, const Eigen::Ref<const Vector>& yhat, const Eigen::Ref<const Vector>& y);

// Hyper-parametrized data-fitting problem
//   A = [diag(e^{w_data}) Phi(U, w_feat); e^{w_reg_1} R_1; ...],
//   B = [diag(e^{w_data}) Y; 0].
// Data and reg weights can be frozen at 1 (weight exponent 0), in which case
// their layout segment is empty.
struct FitProblem {
  Dataset train;
  Dataset val;
  feat::FeaturizerPtr featurizer;
  std::vector<RegularizerTerm> reg_terms;
  Penalty penalty;
  bool tune_data_weights = false;
  bool tune_reg_weights = true;

  // Throws DimensionMismatch on inconsistent shapes.
  void validate() const;
};

// Segments "feat", "data", "reg" sized for the problem, all zero.
HyperVector layout(const FitProblem& p);

struct Assembly {
  DenseMatrix a;
  DenseMatrix b;
};

// Throws DimensionMismatch if omega does not match layout(p).
Assembly assemble(const FitProblem& p, const HyperVector& omega);

struct FitEvaluation {
  double psi = 0.0;
  Vector gradient;
  DenseMatrix theta;
};

// psi = mean validation penalty of the least squares fit at omega, and its
// exact gradient in omega. RankDeficient propagates from the solve.
FitEvaluation objective_and_gradient(const FitProblem& p, const HyperVector& omega);

// Fitted theta at omega without the gradient.
DenseMatrix fit_theta(const FitProblem& p, const HyperVector& omega);

// Mean penalty of predictions Phi(inputs, w_feat) theta on `data`.
double mean_loss(const Penalty& pen, const DenseMatrix& theta, const feat::Featurizer& featurizer,
                 const Eigen::Ref<const Vector>& omega_feat, const Dataset& data);

// Fraction of rows whose argmax prediction differs from the target's hot
// index. Ties go to the lowest index.
double test_error(const DenseMatrix& theta, const feat::Featurizer& featurizer,
                  const Eigen::Ref<const Vector>& omega_feat, const Dataset& test);

// Index of the largest entry; the first one on ties.
Eigen::Index argmax(const Eigen::Ref<const Vector>& v);

}  // namespace lsat::fit
