#include "lsat/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lsat::prox {

namespace {

void require_nonnegative(double t, double lambda) {
  if (!(t >= 0.0) || !(lambda >= 0.0)) {
    throw std::invalid_argument("prox step size and weight must be non-negative");
  }
}

}  // namespace

Vector prox_sum_l2(const Eigen::Ref<const Vector>& nu, double t, double lambda) {
  require_nonnegative(t, lambda);
  return nu / (1.0 + 2.0 * t * lambda);
}

Vector prox_l1(const Eigen::Ref<const Vector>& nu, double t, double lambda) {
  require_nonnegative(t, lambda);
  const double thr = t * lambda;
  Vector out(nu.size());
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    const double v = nu[i];
    out[i] = v > thr ? v - thr : (v < -thr ? v + thr : 0.0);
  }
  return out;
}

Vector prox_zero_sum_l2(const Eigen::Ref<const Vector>& nu, double t, double lambda) {
  require_nonnegative(t, lambda);
  if (nu.size() == 0) return Vector();
  // Block elimination of the KKT system
  //   [(1 + 2 t lambda) I  1] [w]   [nu]
  //   [1'                  0] [y] = [0 ]
  // gives y = mean(nu) and w = (nu - y 1) / (1 + 2 t lambda). The second
  // centering pass removes the rounding left by the first.
  Vector w = nu.array() - nu.mean();
  w.array() -= w.mean();
  return w / (1.0 + 2.0 * t * lambda);
}

SumSquares::SumSquares(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("SumSquares weight must be non-negative");
}

double SumSquares::value(const Eigen::Ref<const Vector>& w) const { return lambda_ * w.squaredNorm(); }

Vector SumSquares::prox(const Eigen::Ref<const Vector>& nu, double t) const {
  return prox_sum_l2(nu, t, lambda_);
}

L1::L1(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("L1 weight must be non-negative");
}

double L1::value(const Eigen::Ref<const Vector>& w) const { return lambda_ * w.lpNorm<1>(); }

Vector L1::prox(const Eigen::Ref<const Vector>& nu, double t) const { return prox_l1(nu, t, lambda_); }

ZeroSumSquares::ZeroSumSquares(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("ZeroSumSquares weight must be non-negative");
}

double ZeroSumSquares::feasibility_tolerance(const Eigen::Ref<const Vector>& w) {
  const double scale = w.size() > 0 ? 1.0 + w.cwiseAbs().maxCoeff() : 1.0;
  return 1e-10 * static_cast<double>(std::max<Eigen::Index>(1, w.size())) * scale;
}

double ZeroSumSquares::value(const Eigen::Ref<const Vector>& w) const {
  if (std::abs(w.sum()) > feasibility_tolerance(w)) return std::numeric_limits<double>::infinity();
  return lambda_ * w.squaredNorm();
}

Vector ZeroSumSquares::prox(const Eigen::Ref<const Vector>& nu, double t) const {
  return prox_zero_sum_l2(nu, t, lambda_);
}

Separable& Separable::set(const std::string& name, std::shared_ptr<const ProxRegularizer> r) {
  for (const auto& s : segments_) {
    if (s.name == name) {
      for (auto& term : terms_) {
        if (term.segment.name == name) {
          term.reg = std::move(r);
          return *this;
        }
      }
      terms_.push_back({s, std::move(r)});
      return *this;
    }
  }
  throw std::invalid_argument("no hyper-parameter segment named '" + name + "'");
}

double Separable::value(const Eigen::Ref<const Vector>& w) const {
  double total = 0.0;
  for (const auto& term : terms_) {
    total += term.reg->value(w.segment(term.segment.offset, term.segment.length));
  }
  return total;
}

Vector Separable::prox(const Eigen::Ref<const Vector>& nu, double t) const {
  Vector out = nu;
  for (const auto& term : terms_) {
    out.segment(term.segment.offset, term.segment.length) =
        term.reg->prox(nu.segment(term.segment.offset, term.segment.length), t);
  }
  return out;
}

}  // namespace lsat::prox
