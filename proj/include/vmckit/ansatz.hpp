#pragma once

#include "vmckit/model.hpp"
#include "vmckit/rng.hpp"
#include "vmckit/types.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vmckit {

/// Parametric wave function psi_theta(x).
///
/// Implementations are stateless with respect to theta: every query takes the
/// parameter vector explicitly, so one ansatz object can be shared by threads
/// evaluating different samples.
class Ansatz {
 public:
  virtual ~Ansatz() = default;

  virtual std::string kind() const = 0;
  virtual Index num_params() const = 0;
  /// Spatial dimension D for box spaces, 0 for finite spaces.
  virtual Index spatial_dim() const = 0;

  virtual double value(const Vector& theta, const ConfigPoint& x) const = 0;
  virtual Vector grad_theta(const Vector& theta, const ConfigPoint& x) const = 0;

  /// value and grad_theta in one pass; the default calls both.
  virtual double value_and_grad(const Vector& theta, const ConfigPoint& x, Vector& grad) const;

  /// grad_theta / value. Throws NumericalError where psi vanishes.
  virtual Vector grad_log_abs(const Vector& theta, const ConfigPoint& x) const;

  /// Spatial Laplacian. The default uses central differences (laplacian_fallback).
  virtual double laplacian_x(const Vector& theta, const ConfigPoint& x) const;

  virtual bool has_hessian() const { return false; }
  /// Hessian of psi in theta. Throws unless has_hessian().
  virtual Matrix hessian_theta(const Vector& theta, const ConfigPoint& x) const;
};

using AnsatzPtr = std::shared_ptr<const Ansatz>;

/// psi_theta(x) = theta_x on a finite space of size S (d = S).
class TableAnsatz final : public Ansatz {
 public:
  explicit TableAnsatz(Index size);

  std::string kind() const override { return "table"; }
  Index num_params() const override { return size_; }
  Index spatial_dim() const override { return 0; }
  double value(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_theta(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_log_abs(const Vector& theta, const ConfigPoint& x) const override;
  double laplacian_x(const Vector& theta, const ConfigPoint& x) const override;
  bool has_hessian() const override { return true; }
  Matrix hessian_theta(const Vector& theta, const ConfigPoint& x) const override;

 private:
  Index size_;
};

/// One feature f_k of an exponential-family wave function on a box, with the
/// spatial derivatives needed for the analytic Laplacian.
struct Feature {
  std::string name;
  ScalarField value;
  std::function<Vector(const Vector&)> gradient;
  ScalarField laplacian;
};

/// f(x) = -|x|^2 / 2.
Feature gaussian_feature();
/// f(x) = -|x|.
Feature radial_feature();
Feature feature_by_name(const std::string& name);

/// psi_theta(x) = exp(sum_k theta_k f_k(x)); strictly positive.
///
/// On a finite space the features are the columns of an S x d table; on a box
/// they are closed-form functions with analytic spatial derivatives.
class ExpFamilyAnsatz final : public Ansatz {
 public:
  ExpFamilyAnsatz(std::vector<Feature> features, Index dim);
  explicit ExpFamilyAnsatz(Matrix feature_table);

  std::string kind() const override { return "expfamily"; }
  Index num_params() const override;
  Index spatial_dim() const override { return dim_; }
  double value(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_theta(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_log_abs(const Vector& theta, const ConfigPoint& x) const override;
  double laplacian_x(const Vector& theta, const ConfigPoint& x) const override;
  bool has_hessian() const override { return true; }
  Matrix hessian_theta(const Vector& theta, const ConfigPoint& x) const override;

  const std::vector<Feature>& features() const { return features_; }

 private:
  Vector feature_vector(const ConfigPoint& x) const;
  double exponent(const Vector& theta, const ConfigPoint& x) const;

  std::vector<Feature> features_;
  Matrix table_;
  Index dim_ = 0;
};

/// Dense tanh network R^in -> R^out with a linear last layer.
///
/// Parameters are packed layer by layer as [W (row-major), b]. backward() is a
/// hand-written reverse pass returning the vector-Jacobian product d(out . w)/d theta.
class Mlp {
 public:
  Mlp(Index inputs, std::vector<Index> hidden, Index outputs);

  Index num_params() const { return num_params_; }
  Index inputs() const { return inputs_; }
  Index outputs() const { return outputs_; }

  struct Tape {
    std::vector<Vector> activations;  // layer inputs; activations[0] is x
  };

  Vector forward(const Eigen::Ref<const Vector>& theta, const Vector& x, Tape* tape = nullptr) const;
  /// Accumulates d(output . upstream)/d theta into grad (size num_params).
  void backward(const Eigen::Ref<const Vector>& theta, const Tape& tape, const Vector& upstream,
                Eigen::Ref<Vector> grad) const;

  /// Gaussian weights with variance 1/fan_in, zero biases.
  void initialise(Eigen::Ref<Vector> theta, Rng& rng) const;

 private:
  struct Layer {
    Index in, out, offset;
  };
  std::vector<Layer> layers_;
  Index inputs_, outputs_, num_params_ = 0;
};

/// psi_theta(x) = s * net(x) with a trainable output scale s stored as the last parameter.
class MlpAnsatz final : public Ansatz {
 public:
  MlpAnsatz(Index dim, std::vector<Index> hidden = {16, 16});

  std::string kind() const override { return "mlp"; }
  Index num_params() const override { return net_.num_params() + 1; }
  Index spatial_dim() const override { return dim_; }
  double value(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_theta(const Vector& theta, const ConfigPoint& x) const override;
  double value_and_grad(const Vector& theta, const ConfigPoint& x, Vector& grad) const override;

  Index scale_index() const { return net_.num_params(); }
  Vector initial_parameters(Rng& rng) const;

 private:
  Index dim_;
  Mlp net_;
};

/// Orbital network for determinant pre-training.
///
/// For N electrons on a line and d determinants, each electron coordinate x_i is
/// passed through a shared per-electron MLP R -> R^{N d}; y^{(k)}_{ij} is output
/// k*N + j for electron i. The wave function is psi(x) = sum_k det y^{(k)}(x).
class MatrixMlpAnsatz final : public Ansatz {
 public:
  MatrixMlpAnsatz(Index electrons, Index determinants, std::vector<Index> hidden = {16, 16});

  std::string kind() const override { return "matrix_mlp"; }
  Index num_params() const override { return net_.num_params(); }
  Index spatial_dim() const override { return electrons_; }
  double value(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_theta(const Vector& theta, const ConfigPoint& x) const override;

  Index electrons() const { return electrons_; }
  Index determinants() const { return determinants_; }

  /// y^{(k)} for k = 0..d-1, each N x N (row = electron, column = orbital).
  std::vector<Matrix> orbitals(const Vector& theta, const Vector& x) const;
  /// Pull back dL/dy^{(k)} at configuration x to dL/dtheta (accumulated into grad).
  void orbital_vjp(const Vector& theta, const Vector& x, const std::vector<Matrix>& upstream,
                   Eigen::Ref<Vector> grad) const;
  Vector initial_parameters(Rng& rng) const;

 private:
  Index electrons_, determinants_;
  Mlp net_;
};

/// lambda * psi_theta for a fixed nonzero lambda; gradients and Hessians scale with lambda.
class ScaledAnsatz final : public Ansatz {
 public:
  ScaledAnsatz(AnsatzPtr base, double lambda);

  std::string kind() const override { return base_->kind(); }
  Index num_params() const override { return base_->num_params(); }
  Index spatial_dim() const override { return base_->spatial_dim(); }
  double value(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_theta(const Vector& theta, const ConfigPoint& x) const override;
  Vector grad_log_abs(const Vector& theta, const ConfigPoint& x) const override;
  double laplacian_x(const Vector& theta, const ConfigPoint& x) const override;
  bool has_hessian() const override { return base_->has_hessian(); }
  Matrix hessian_theta(const Vector& theta, const ConfigPoint& x) const override;

 private:
  AnsatzPtr base_;
  double lambda_;
};

/// psi_theta evaluated at every point of a finite space of the given size.
Vector psi_vector(const Ansatz& psi, const Vector& theta, Index size);

/// Default step for first derivatives: eps^(1/3) (1 + |t|).
double default_fd_step(double at);
/// Default step for second derivatives: eps^(1/4) (1 + |t|).
double default_laplacian_step(double at);

/// Central differences of value() in each parameter. h <= 0 selects default_fd_step per coordinate.
Vector finite_diff_gradient(const Ansatz& psi, const Vector& theta, const ConfigPoint& x,
                            double h = 0.0);

struct FdLaplacian {
  double value = 0.0;
  /// |value| h^2 < 1e3 eps |psi(x)|: the stencil is dominated by rounding.
  bool cancellation = false;
};

/// sum_i (psi(x + h e_i) - 2 psi(x) + psi(x - h e_i)) / h^2. h <= 0 selects default_laplacian_step.
FdLaplacian laplacian_fallback(const Ansatz& psi, const Vector& theta, const Vector& x,
                               double h = 0.0);

// Parameter checkpoints: a header line "# vmckit-checkpoint kind=<k> d=<d> seed=<s>"
// followed by d lines with one shortest round-trip decimal each.

struct Checkpoint {
  std::string kind;
  std::uint64_t seed = 0;
  Vector theta;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vmckit
