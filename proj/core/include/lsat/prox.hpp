#pragma once

#include <memory>
#include <vector>

#include "lsat/hyper.hpp"
#include "lsat/matrix.hpp"

namespace lsat::prox {

// Hyper-parameter regularizer r together with its proximal operator
//   prox_{t r}(nu) = argmin_w  t r(w) + 1/2 ||w - nu||^2.
// value() returns +infinity outside the domain; prox() always lands inside it.
class ProxRegularizer {
 public:
  virtual ~ProxRegularizer() = default;
  virtual double value(const Eigen::Ref<const Vector>& w) const = 0;
  virtual Vector prox(const Eigen::Ref<const Vector>& nu, double t) const = 0;
};

// prox of lambda ||w||_2^2: nu / (1 + 2 t lambda).
Vector prox_sum_l2(const Eigen::Ref<const Vector>& nu, double t, double lambda);

// prox of lambda ||w||_1: soft-thresholding at t lambda.
Vector prox_l1(const Eigen::Ref<const Vector>& nu, double t, double lambda);

// prox of lambda ||w||_2^2 restricted to {1'w = 0}:
// (nu - mean(nu) 1) / (1 + 2 t lambda).
Vector prox_zero_sum_l2(const Eigen::Ref<const Vector>& nu, double t, double lambda);

// r = 0 on all of R^p.
class Zero final : public ProxRegularizer {
 public:
  double value(const Eigen::Ref<const Vector>&) const override { return 0.0; }
  Vector prox(const Eigen::Ref<const Vector>& nu, double) const override { return nu; }
};

class SumSquares final : public ProxRegularizer {
 public:
  explicit SumSquares(double lambda);
  double value(const Eigen::Ref<const Vector>& w) const override;
  Vector prox(const Eigen::Ref<const Vector>& nu, double t) const override;

 private:
  double lambda_;
};

class L1 final : public ProxRegularizer {
 public:
  explicit L1(double lambda);
  double value(const Eigen::Ref<const Vector>& w) const override;
  Vector prox(const Eigen::Ref<const Vector>& nu, double t) const override;

 private:
  double lambda_;
};

// lambda ||w||^2 plus the indicator of {1'w = 0}. lambda = 0 gives plain
// projection onto the zero-sum hyperplane.
class ZeroSumSquares final : public ProxRegularizer {
 public:
  explicit ZeroSumSquares(double lambda);
  double value(const Eigen::Ref<const Vector>& w) const override;
  Vector prox(const Eigen::Ref<const Vector>& nu, double t) const override;

  // |1'w| above this counts as infeasible.
  static double feasibility_tolerance(const Eigen::Ref<const Vector>& w);

 private:
  double lambda_;
};

// Sum of regularizers acting on disjoint named segments of a HyperVector.
// Segments without a term are unregularized (identity prox).
class Separable final : public ProxRegularizer {
 public:
  explicit Separable(const HyperVector& layout) : segments_(layout.segments()) {}

  // Attaches `r` to segment `name`; throws std::invalid_argument for an
  // unknown segment.
  Separable& set(const std::string& name, std::shared_ptr<const ProxRegularizer> r);

  double value(const Eigen::Ref<const Vector>& w) const override;
  Vector prox(const Eigen::Ref<const Vector>& nu, double t) const override;

 private:
  struct Term {
    Segment segment;
    std::shared_ptr<const ProxRegularizer> reg;
  };
  std::vector<Segment> segments_;
  std::vector<Term> terms_;
};

}  // namespace lsat::prox
