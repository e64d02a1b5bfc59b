#include "lsat/eq_ls.hpp"

#include <lapacke.h>

#include "lsat/errors.hpp"

namespace lsat::eq {

static_assert(sizeof(lapack_int) == sizeof(int), "LP64 LAPACK expected");

void KktSolution::solve_system(const Eigen::Ref<const DenseMatrix>& top,
                               const Eigen::Ref<const DenseMatrix>& bottom, DenseMatrix& x1,
                               DenseMatrix& x2) const {
  const Eigen::Index n = theta_.rows();
  const Eigen::Index d = c_.rows();
  require_shape(top, n, top.cols(), "KKT right-hand side (top block)");
  require_shape(bottom, d, top.cols(), "KKT right-hand side (bottom block)");

  if (unconstrained_) {
    x1 = unconstrained_->solve_gram(top);
    x2.resize(0, top.cols());
    return;
  }

  Eigen::MatrixXd rhs(n + d, top.cols());
  rhs.topRows(n) = top;
  rhs.bottomRows(d) = bottom;
  const lapack_int info = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(n + d),
                                         static_cast<lapack_int>(rhs.cols()), ldl_.data(),
                                         static_cast<lapack_int>(ldl_.rows()), pivots_.data(),
                                         rhs.data(), static_cast<lapack_int>(rhs.rows()));
  if (info != 0) throw SingularKkt("LAPACK dsytrs failed with info " + std::to_string(info));
  x1 = rhs.topRows(n);
  x2 = rhs.bottomRows(d);
}

KktSolution solve_kkt(DenseMatrix a, DenseMatrix b, DenseMatrix c, DenseMatrix d) {
  const Eigen::Index n = a.cols();
  const Eigen::Index m = b.cols();
  const Eigen::Index dc = c.rows();
  if (a.rows() != b.rows()) throw DimensionMismatch("A and B row counts differ");
  require_shape(c, dc, n, "C");
  require_shape(d, dc, m, "D");
  require_finite(a, "A");
  require_finite(b, "B");
  require_finite(c, "C");
  require_finite(d, "D");

  KktSolution s;
  if (dc == 0) {
    auto f = dense::solve(std::move(a), std::move(b));
    s.theta_ = f.theta();
    s.nu_.resize(0, m);
    s.a_ = f.a();
    s.b_ = f.b();
    s.c_ = std::move(c);
    s.d_ = std::move(d);
    s.unconstrained_.emplace(std::move(f));
    return s;
  }

  const Eigen::Index size = n + dc;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(size, size);
  kkt.topLeftCorner(n, n) = dense::gram(a);
  kkt.bottomLeftCorner(dc, n) = c;
  kkt.topRightCorner(n, dc) = c.transpose();

  // 1-norm of the symmetric M, needed by the condition estimator.
  const double anorm = kkt.cwiseAbs().colwise().sum().maxCoeff();

  s.pivots_.assign(static_cast<std::size_t>(size), 0);
  lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(size), kkt.data(),
                                   static_cast<lapack_int>(size), s.pivots_.data());
  if (info > 0) throw SingularKkt("KKT matrix has an exactly zero pivot block at " + std::to_string(info));
  if (info < 0) throw SingularKkt("LAPACK dsytrf rejected argument " + std::to_string(-info));

  double rcond = 0.0;
  info = LAPACKE_dsycon(LAPACK_COL_MAJOR, 'L', static_cast<lapack_int>(size), kkt.data(),
                        static_cast<lapack_int>(size), s.pivots_.data(), anorm, &rcond);
  if (info != 0 || !(rcond >= kSingularRcond)) {
    throw SingularKkt("KKT matrix is numerically singular (rcond estimate " + std::to_string(rcond) + ")");
  }
  s.ldl_ = std::move(kkt);

  s.a_ = std::move(a);
  s.b_ = std::move(b);
  s.c_ = std::move(c);
  s.d_ = std::move(d);
  s.theta_.resize(n, m);

  DenseMatrix atb(n, m);
  atb.noalias() = s.a_.transpose() * s.b_;
  s.solve_system(atb, s.d_, s.theta_, s.nu_);
  return s;
}

KktGradients backward_kkt(const KktSolution& s, const Eigen::Ref<const DenseMatrix>& d_theta,
                          const Eigen::Ref<const DenseMatrix>& d_nu) {
  const Eigen::Index n = s.theta().rows();
  const Eigen::Index m = s.theta().cols();
  require_shape(d_theta, n, m, "dTheta");
  require_shape(d_nu, s.constraints(), m, "dNu");

  KktGradients out;
  if (const auto* f = s.unconstrained()) {
    auto g = dense::backward(*f, d_theta);
    out.d_a = std::move(g.d_a);
    out.d_b = std::move(g.d_b);
    out.d_c.resize(0, n);
    out.d_d.resize(0, m);
    return out;
  }

  DenseMatrix h1, h2;
  s.solve_system(d_theta, d_nu, h1, h2);

  const DenseMatrix& a = s.a();
  out.d_b.noalias() = a * h1;
  DenseMatrix residual = s.b();
  residual.noalias() -= a * s.theta();
  out.d_a.noalias() = residual * h1.transpose();
  out.d_a.noalias() -= out.d_b * s.theta().transpose();

  out.d_c.noalias() = -s.nu() * h1.transpose();
  out.d_c.noalias() -= h2 * s.theta().transpose();
  out.d_d = h2;
  return out;
}

}  // namespace lsat::eq
