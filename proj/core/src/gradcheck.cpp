#include "lsat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "lsat/datafit.hpp"
#include "lsat/dense_ls.hpp"
#include "lsat/eq_ls.hpp"
#include "lsat/featurize.hpp"
#include "lsat/sparse_ls.hpp"

namespace lsat::check {

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(const Eigen::Ref<const Vector>& analytic, const Eigen::Ref<const Vector>& reference) {
  if (analytic.size() != reference.size()) return std::numeric_limits<double>::infinity();
  if (reference.size() == 0) return 0.0;
  const double floor = std::max(1e-3 * reference.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < reference.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - reference[i]) / std::max(std::abs(reference[i]), floor));
  }
  return worst;
}

namespace {

using Rng = std::mt19937_64;

DenseMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  DenseMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Vector flatten(const DenseMatrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

DenseMatrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const DenseMatrix>(v.data(), rows, cols);
}

double pairing(const DenseMatrix& a, const DenseMatrix& b) { return (a.array() * b.array()).sum(); }

CheckResult dense_suite(Rng& rng) {
  CheckResult r{"dense_ls.backward", 0.0, 1e-6, 0};
  for (int c = 0; c < 10; ++c, ++r.cases) {
    const Eigen::Index k = 10 + c, n = 2 + c % 5, m = 1 + c % 3;
    const DenseMatrix a = random_matrix(rng, k, n), b = random_matrix(rng, k, m), w = random_matrix(rng, n, m);
    const dense::LsGradients g = dense::backward(dense::solve(a, b), w);
    const auto fa = [&](const Vector& x) { return pairing(w, dense::solve(unflatten(x, k, n), b).theta()); };
    const auto fb = [&](const Vector& x) { return pairing(w, dense::solve(a, unflatten(x, k, m)).theta()); };
    r.max_rel_error = std::max({r.max_rel_error, max_relative_error(flatten(g.d_a), central_difference(fa, flatten(a), 1e-6)),
                                max_relative_error(flatten(g.d_b), central_difference(fb, flatten(b), 1e-6))});
  }
  return r;
}

CheckResult sparse_suite(Rng& rng) {
  CheckResult r{"sparse_ls.backward_restricted", 0.0, 1e-7, 0};
  std::uniform_real_distribution<double> unit;
  for (int c = 0; c < 5; ++c, ++r.cases) {
    const Eigen::Index k = 30, n = 6, m = 2;
    DenseMatrix dense_a = random_matrix(rng, k, n);
    for (Eigen::Index i = 0; i < dense_a.size(); ++i) {
      if (unit(rng) < 0.6) dense_a.data()[i] = 0.0;
    }
    dense_a.diagonal().array() += 3.0;
    const sparse::SparseMatrix sa = dense_a.sparseView();
    const DenseMatrix b = random_matrix(rng, k, m), w = random_matrix(rng, n, m);
    const sparse::LinearOperator op = sparse::make_operator(sa);
    const sparse::SparseSolveState st = sparse::solve_cg(op, b);
    const sparse::SparsityPattern pattern = sparse::SparsityPattern::from_matrix(sa);
    const sparse::RestrictedGradients rg = sparse::backward_restricted(op, pattern, b, st.theta, w);
    const dense::LsGradients dg = dense::backward(dense::solve(dense_a, b), w);
    Vector sampled(static_cast<Eigen::Index>(pattern.size()));
    for (std::size_t e = 0; e < pattern.size(); ++e) {
      sampled[static_cast<Eigen::Index>(e)] = dg.d_a(pattern.entries()[e].row, pattern.entries()[e].col);
    }
    const Vector restricted = Eigen::Map<const Vector>(rg.d_a_on_pattern.data(), sampled.size());
    r.max_rel_error = std::max({r.max_rel_error, max_relative_error(restricted, sampled),
                                max_relative_error(flatten(rg.d_b), flatten(dg.d_b))});
  }
  return r;
}

CheckResult eq_suite(Rng& rng) {
  CheckResult r{"eq_ls.backward_kkt", 0.0, 1e-6, 0};
  for (int c = 0; c < 5; ++c, ++r.cases) {
    const Eigen::Index k = 12, n = 5, m = 2, p = 1 + c % 3;
    const DenseMatrix a = random_matrix(rng, k, n), b = random_matrix(rng, k, m);
    const DenseMatrix cm = random_matrix(rng, p, n), d = random_matrix(rng, p, m);
    const DenseMatrix wt = random_matrix(rng, n, m), wn = random_matrix(rng, p, m);
    const eq::KktGradients g = eq::backward_kkt(eq::solve_kkt(a, b, cm, d), wt, wn);
    const auto loss = [&](const eq::KktSolution& s) { return pairing(wt, s.theta()) + pairing(wn, s.nu()); };
    const auto fa = [&](const Vector& x) { return loss(eq::solve_kkt(unflatten(x, k, n), b, cm, d)); };
    const auto fb = [&](const Vector& x) { return loss(eq::solve_kkt(a, unflatten(x, k, m), cm, d)); };
    const auto fc = [&](const Vector& x) { return loss(eq::solve_kkt(a, b, unflatten(x, p, n), d)); };
    const auto fd = [&](const Vector& x) { return loss(eq::solve_kkt(a, b, cm, unflatten(x, p, m))); };
    r.max_rel_error = std::max({r.max_rel_error,
                                max_relative_error(flatten(g.d_a), central_difference(fa, flatten(a), 1e-6)),
                                max_relative_error(flatten(g.d_b), central_difference(fb, flatten(b), 1e-6)),
                                max_relative_error(flatten(g.d_c), central_difference(fc, flatten(cm), 1e-6)),
                                max_relative_error(flatten(g.d_d), central_difference(fd, flatten(d), 1e-6))});
  }
  return r;
}

CheckResult featurizer_suite(Rng& rng) {
  CheckResult r{"featurize.pullback", 0.0, 1e-6, 0};
  const Eigen::Index dim = 4;
  std::uniform_real_distribution<double> unit;
  feat::ArchetypeSet arch{random_matrix(rng, 6, dim), 3};
  const std::vector<feat::FeaturizerPtr> maps = {
      std::make_shared<feat::AffineScale>(dim),
      std::make_shared<feat::PowerTransform>(dim),
      std::make_shared<feat::LowRank>(dim, 2),
      std::make_shared<feat::ArchetypeSoftmax>(arch),
      std::make_shared<feat::Compose>(std::vector<feat::FeaturizerPtr>{
          std::make_shared<feat::AffineScale>(dim), std::make_shared<feat::ArchetypeSoftmax>(arch)}),
  };
  for (const auto& f : maps) {
    for (int c = 0; c < 4; ++c, ++r.cases) {
      const DenseMatrix x = random_matrix(rng, 3, dim);
      Vector params = flatten(random_matrix(rng, f->param_count(), 1));
      if (dynamic_cast<const feat::PowerTransform*>(f.get()) != nullptr) {
        // Keep exponents positive and the centres away from the inputs.
        for (Eigen::Index j = 0; j < dim; ++j) {
          params[j] = 5.0 + unit(rng);
          params[dim + j] = 0.5 + unit(rng);
        }
      }
      const DenseMatrix cot = random_matrix(rng, 3, f->output_dim());
      const Vector g = f->pullback(x, params, cot, nullptr);
      const auto fp = [&](const Vector& w) { return pairing(cot, f->map(x, w)); };
      r.max_rel_error = std::max(r.max_rel_error, max_relative_error(g, central_difference(fp, params, 1e-6)));
    }
  }
  return r;
}

CheckResult pipeline_suite(Rng& rng) {
  CheckResult r{"datafit.objective_and_gradient", 0.0, 1e-5, 0};
  std::uniform_int_distribution<int> label(0, 2);
  for (int c = 0; c < 3; ++c, ++r.cases) {
    const Eigen::Index dim = 4, n_train = 15, n_val = 10, classes = 3;
    fit::FitProblem p;
    p.train.inputs = random_matrix(rng, n_train, dim);
    p.val.inputs = random_matrix(rng, n_val, dim);
    p.train.targets = DenseMatrix::Zero(n_train, classes);
    p.val.targets = DenseMatrix::Zero(n_val, classes);
    for (Eigen::Index i = 0; i < n_train; ++i) p.train.targets(i, label(rng)) = 1.0;
    for (Eigen::Index i = 0; i < n_val; ++i) p.val.targets(i, label(rng)) = 1.0;
    feat::ArchetypeSet arch{random_matrix(rng, 3, dim), 1};
    p.featurizer = std::make_shared<feat::Concat>(std::vector<feat::FeaturizerPtr>{
        std::make_shared<feat::AffineScale>(dim), std::make_shared<feat::ArchetypeSoftmax>(arch)});
    const Eigen::Index n = p.featurizer->output_dim();
    p.reg_terms = {{DenseMatrix::Identity(n, n), "ridge"}, {random_matrix(rng, 2, n), "extra"}};
    p.penalty = c == 0 ? fit::Penalty::cross_entropy() : (c == 1 ? fit::Penalty::square() : fit::Penalty::huber(1.5));
    p.tune_data_weights = true;

    const HyperVector lay = fit::layout(p);
    Vector w0 = 0.3 * flatten(random_matrix(rng, lay.size(), 1));
    const Segment* fs = lay.find("feat");
    w0.segment(fs->offset, dim).array() += 1.0;  // affine scale near the identity
    const HyperVector omega = lay.with_values(w0);
    const fit::FitEvaluation ev = fit::objective_and_gradient(p, omega);
    const auto f = [&](const Vector& w) { return fit::objective_and_gradient(p, lay.with_values(w)).psi; };
    r.max_rel_error = std::max(r.max_rel_error, max_relative_error(ev.gradient, central_difference(f, w0, 1e-6)));
  }
  return r;
}

}  // namespace

std::vector<CheckResult> run_all(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckResult> out;
  out.push_back(dense_suite(rng));
  out.push_back(sparse_suite(rng));
  out.push_back(eq_suite(rng));
  out.push_back(featurizer_suite(rng));
  out.push_back(pipeline_suite(rng));
  return out;
}

}  // namespace lsat::check
