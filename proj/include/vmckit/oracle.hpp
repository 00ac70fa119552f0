#pragma once

#include "vmckit/ansatz.hpp"
#include "vmckit/model.hpp"
#include "vmckit/rng.hpp"

#include <functional>
#include <vector>

namespace vmckit {

using TupleEstimator = std::function<Vector(const std::vector<Index>&)>;

/// Guard on the number of ordered tuples S^n.
inline constexpr double kMaxTuples = 1e6;

/// sum over all ordered tuples (x_1..x_n) of prod_i p(x_i) * estimator(tuple).
/// Tuples of zero weight are skipped, so the estimator is never called on them.
Vector enumerate_expectation(const TupleEstimator& estimator, const Vector& probabilities, Index n);

/// Central differences of a scalar function of theta. h <= 0 picks default_fd_step per coordinate.
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& theta, double h = 0.0);

/// ||psi_theta||_rho by full sums (finite weights only).
double exact_norm(const Ansatz& psi, const Vector& theta, const Measure& rho);

/// Random finite-space fixture: symmetric H with entries in [-1, 1] and a
/// TableAnsatz parameter vector with |theta_x| in [0.2, 1.2] and random signs.
struct Fixture {
  Matrix h;
  Vector theta;
};
Fixture random_fixture(Rng& rng, Index size);

}  // namespace vmckit
