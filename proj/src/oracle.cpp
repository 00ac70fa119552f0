#include "vmckit/oracle.hpp"

#include "vmckit/parallel.hpp"

#include <cmath>

namespace vmckit {

Vector enumerate_expectation(const TupleEstimator& estimator, const Vector& probabilities, Index n) {
  const Index s = probabilities.size();
  require(s >= 1 && n >= 1, "enumerate_expectation: empty space or batch");
  require((probabilities.array() >= 0).all(), "enumerate_expectation: negative probability");
  if (std::abs(probabilities.sum() - 1.0) > 1e-10)
    throw InvalidArgument("enumerate_expectation: probabilities do not sum to 1");
  if (std::pow(static_cast<double>(s), static_cast<double>(n)) > kMaxTuples)
    throw InvalidArgument("enumerate_expectation: S^n exceeds the 1e6 tuple guard");

  // One slot per value of the first coordinate; the rest is enumerated in order.
  std::vector<Vector> partial(static_cast<std::size_t>(s));
  parallel_for(static_cast<std::size_t>(s), [&](std::size_t first) {
    std::vector<Index> tuple(static_cast<std::size_t>(n), 0);
    tuple[0] = static_cast<Index>(first);
    Vector acc;
    while (true) {
      double w = 1.0;
      for (Index x : tuple) w *= probabilities(x);
      if (w > 0) {
        const Vector v = estimator(tuple);
        if (acc.size() == 0) acc = Vector::Zero(v.size());
        require(v.size() == acc.size(), "enumerate_expectation: estimator output size changed");
        acc += w * v;
      }
      std::size_t k = tuple.size() - 1;
      while (k >= 1 && ++tuple[k] == s) tuple[k--] = 0;
      if (k == 0) break;
    }
    partial[first] = std::move(acc);
  });
  Vector total;
  for (const Vector& p : partial) {
    if (p.size() == 0) continue;
    if (total.size() == 0) total = Vector::Zero(p.size());
    require(p.size() == total.size(), "enumerate_expectation: estimator output size changed");
    total += p;
  }
  if (total.size() == 0) throw NumericalError("enumerate_expectation: every tuple has zero weight");
  return total;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& theta, double h) {
  Vector out(theta.size());
  Vector t = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    const double step = h > 0 ? h : default_fd_step(theta(i));
    t(i) = theta(i) + step;
    const double up = f(t);
    t(i) = theta(i) - step;
    const double down = f(t);
    t(i) = theta(i);
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericalError("fd_gradient: non-finite evaluation");
    out(i) = (up - down) / (2.0 * step);
  }
  return out;
}

double exact_norm(const Ansatz& psi, const Vector& theta, const Measure& rho) {
  const Vector& w = rho.weights();
  const Vector values = psi_vector(psi, theta, w.size());
  return std::sqrt(inner_product(values, values, w));
}

Fixture random_fixture(Rng& rng, Index size) {
  require(size >= 2, "random_fixture: size >= 2");
  Fixture f;
  f.h = Matrix(size, size);
  for (Index i = 0; i < size; ++i)
    for (Index j = 0; j <= i; ++j) f.h(i, j) = f.h(j, i) = 2.0 * rng.uniform() - 1.0;
  f.theta = Vector(size);
  for (Index i = 0; i < size; ++i) {
    const double mag = 0.2 + rng.uniform();
    f.theta(i) = rng.uniform() < 0.5 ? -mag : mag;
  }
  return f;
}

}  // namespace vmckit
