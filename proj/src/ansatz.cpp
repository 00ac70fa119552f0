#include "vmckit/ansatz.hpp"

#include "vmckit/numfmt.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace vmckit {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_theta(const Vector& theta, Index d, const char* who) {
  if (theta.size() != d)
    throw InvalidArgument(std::string(who) + ": parameter vector has size " +
                          std::to_string(theta.size()) + ", expected " + std::to_string(d));
}

Matrix cofactor(const Matrix& y) {
  const Index n = y.rows();
  if (n == 1) return Matrix::Ones(1, 1);
  Matrix c(n, n);
  Matrix minor(n - 1, n - 1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      for (Index r = 0, mr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Index s = 0, ms = 0; s < n; ++s) {
          if (s == j) continue;
          minor(mr, ms++) = y(r, s);
        }
        ++mr;
      }
      c(i, j) = (((i + j) % 2) ? -1.0 : 1.0) * minor.determinant();
    }
  }
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ansatz defaults

double Ansatz::value_and_grad(const Vector& theta, const ConfigPoint& x, Vector& grad) const {
  grad = grad_theta(theta, x);
  return value(theta, x);
}

Vector Ansatz::grad_log_abs(const Vector& theta, const ConfigPoint& x) const {
  Vector g;
  const double v = value_and_grad(theta, x, g);
  if (v == 0.0) throw NumericalError(kind() + ": log-derivative requested where psi = 0");
  return g / v;
}

double Ansatz::laplacian_x(const Vector& theta, const ConfigPoint& x) const {
  if (x.is_index()) throw InvalidArgument(kind() + ": Laplacian is undefined on finite spaces");
  return laplacian_fallback(*this, theta, x.coords()).value;
}

Matrix Ansatz::hessian_theta(const Vector&, const ConfigPoint&) const {
  throw InvalidArgument(kind() + ": parameter Hessian not provided");
}

// ---------------------------------------------------------------------------
// TableAnsatz

TableAnsatz::TableAnsatz(Index size) : size_(size) {
  require(size >= 2, "TableAnsatz: size >= 2");
}

double TableAnsatz::value(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, size_, "TableAnsatz");
  const Index i = x.index();
  require(i >= 0 && i < size_, "TableAnsatz: point out of range");
  return theta(i);
}

Vector TableAnsatz::grad_theta(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, size_, "TableAnsatz");
  const Index i = x.index();
  require(i >= 0 && i < size_, "TableAnsatz: point out of range");
  return Vector::Unit(size_, i);
}

Vector TableAnsatz::grad_log_abs(const Vector& theta, const ConfigPoint& x) const {
  const double v = value(theta, x);
  if (v == 0.0) throw NumericalError("table: log-derivative requested where psi = 0");
  return Vector::Unit(size_, x.index()) / v;
}

double TableAnsatz::laplacian_x(const Vector&, const ConfigPoint&) const {
  throw InvalidArgument("table: Laplacian is undefined on finite spaces");
}

Matrix TableAnsatz::hessian_theta(const Vector& theta, const ConfigPoint&) const {
  check_theta(theta, size_, "TableAnsatz");
  return Matrix::Zero(size_, size_);
}

// ---------------------------------------------------------------------------
// Exponential family

Feature gaussian_feature() {
  return Feature{
      "gaussian",
      [](const Vector& x) { return -0.5 * x.squaredNorm(); },
      [](const Vector& x) -> Vector { return -x; },
      [](const Vector& x) { return -static_cast<double>(x.size()); },
  };
}

Feature radial_feature() {
  auto radius = [](const Vector& x) {
    const double r = x.norm();
    if (r == 0.0) throw NumericalError("radial feature is not differentiable at the origin");
    return r;
  };
  return Feature{
      "radial",
      [](const Vector& x) { return -x.norm(); },
      [radius](const Vector& x) -> Vector { return -x / radius(x); },
      [radius](const Vector& x) { return -static_cast<double>(x.size() - 1) / radius(x); },
  };
}

Feature feature_by_name(const std::string& name) {
  if (name == "gaussian") return gaussian_feature();
  if (name == "radial") return radial_feature();
  throw InvalidArgument("unknown feature '" + name + "'");
}

ExpFamilyAnsatz::ExpFamilyAnsatz(std::vector<Feature> features, Index dim)
    : features_(std::move(features)), dim_(dim) {
  require(!features_.empty(), "ExpFamilyAnsatz: need at least one feature");
  require(dim >= 1, "ExpFamilyAnsatz: dim >= 1");
}

ExpFamilyAnsatz::ExpFamilyAnsatz(Matrix feature_table) : table_(std::move(feature_table)) {
  require(table_.rows() >= 2 && table_.cols() >= 1, "ExpFamilyAnsatz: feature table too small");
  require(table_.allFinite(), "ExpFamilyAnsatz: non-finite features");
}

Index ExpFamilyAnsatz::num_params() const {
  return dim_ > 0 ? static_cast<Index>(features_.size()) : table_.cols();
}

Vector ExpFamilyAnsatz::feature_vector(const ConfigPoint& x) const {
  if (dim_ == 0) {
    const Index i = x.index();
    require(i >= 0 && i < table_.rows(), "ExpFamilyAnsatz: point out of range");
    return table_.row(i).transpose();
  }
  const Vector& r = x.coords();
  require(r.size() == dim_, "ExpFamilyAnsatz: point has wrong dimension");
  Vector f(static_cast<Index>(features_.size()));
  for (std::size_t k = 0; k < features_.size(); ++k) f(static_cast<Index>(k)) = features_[k].value(r);
  return f;
}

double ExpFamilyAnsatz::exponent(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, num_params(), "ExpFamilyAnsatz");
  return feature_vector(x).dot(theta);
}

double ExpFamilyAnsatz::value(const Vector& theta, const ConfigPoint& x) const {
  return std::exp(exponent(theta, x));
}

Vector ExpFamilyAnsatz::grad_theta(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, num_params(), "ExpFamilyAnsatz");
  const Vector f = feature_vector(x);
  return std::exp(f.dot(theta)) * f;
}

Vector ExpFamilyAnsatz::grad_log_abs(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, num_params(), "ExpFamilyAnsatz");
  return feature_vector(x);
}

double ExpFamilyAnsatz::laplacian_x(const Vector& theta, const ConfigPoint& x) const {
  if (dim_ == 0) throw InvalidArgument("expfamily: Laplacian is undefined on finite spaces");
  check_theta(theta, num_params(), "ExpFamilyAnsatz");
  const Vector& r = x.coords();
  // psi = exp(F), lap psi = psi (|grad F|^2 + lap F)
  Vector grad_f = Vector::Zero(dim_);
  double lap_f = 0.0;
  for (std::size_t k = 0; k < features_.size(); ++k) {
    const double t = theta(static_cast<Index>(k));
    grad_f += t * features_[k].gradient(r);
    lap_f += t * features_[k].laplacian(r);
  }
  return value(theta, x) * (grad_f.squaredNorm() + lap_f);
}

Matrix ExpFamilyAnsatz::hessian_theta(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, num_params(), "ExpFamilyAnsatz");
  const Vector f = feature_vector(x);
  return std::exp(f.dot(theta)) * f * f.transpose();
}

// ---------------------------------------------------------------------------
// MLP

Mlp::Mlp(Index inputs, std::vector<Index> hidden, Index outputs)
    : inputs_(inputs), outputs_(outputs) {
  require(inputs >= 1 && outputs >= 1, "Mlp: inputs and outputs must be >= 1");
  Index in = inputs;
  hidden.push_back(outputs);
  for (Index out : hidden) {
    require(out >= 1, "Mlp: layer widths must be >= 1");
    layers_.push_back(Layer{in, out, num_params_});
    num_params_ += in * out + out;
    in = out;
  }
}

Vector Mlp::forward(const Eigen::Ref<const Vector>& theta, const Vector& x, Tape* tape) const {
  require(theta.size() == num_params_, "Mlp: wrong parameter count");
  require(x.size() == inputs_, "Mlp: wrong input size");
  Vector a = x;
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(a);
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    RowMajorMap w(theta.data() + layer.offset, layer.out, layer.in);
    Eigen::Map<const Vector> b(theta.data() + layer.offset + layer.in * layer.out, layer.out);
    Vector z = w * a + b;
    a = (l + 1 < layers_.size()) ? Vector(z.array().tanh()) : z;
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

void Mlp::backward(const Eigen::Ref<const Vector>& theta, const Tape& tape, const Vector& upstream,
                   Eigen::Ref<Vector> grad) const {
  require(grad.size() == num_params_, "Mlp: gradient buffer has wrong size");
  require(tape.activations.size() == layers_.size() + 1, "Mlp: tape does not match network");
  Vector delta = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const Vector& input = tape.activations[l];
    RowMajorMutMap gw(grad.data() + layer.offset, layer.out, layer.in);
    gw.noalias() += delta * input.transpose();
    grad.segment(layer.offset + layer.in * layer.out, layer.out) += delta;
    if (l > 0) {
      RowMajorMap w(theta.data() + layer.offset, layer.out, layer.in);
      delta = (w.transpose() * delta).cwiseProduct((1.0 - input.array().square()).matrix());
    }
  }
}

void Mlp::initialise(Eigen::Ref<Vector> theta, Rng& rng) const {
  require(theta.size() == num_params_, "Mlp: wrong parameter count");
  for (const Layer& layer : layers_) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (Index i = 0; i < layer.in * layer.out; ++i) theta(layer.offset + i) = sd * rng.normal();
    theta.segment(layer.offset + layer.in * layer.out, layer.out).setZero();
  }
}

MlpAnsatz::MlpAnsatz(Index dim, std::vector<Index> hidden) : dim_(dim), net_(dim, std::move(hidden), 1) {}

double MlpAnsatz::value(const Vector& theta, const ConfigPoint& x) const {
  check_theta(theta, num_params(), "MlpAnsatz");
  const Index np = net_.num_params();
  return theta(np) * net_.forward(theta.head(np), x.coords())(0);
}

Vector MlpAnsatz::grad_theta(const Vector& theta, const ConfigPoint& x) const {
  Vector g;
  value_and_grad(theta, x, g);
  return g;
}

double MlpAnsatz::value_and_grad(const Vector& theta, const ConfigPoint& x, Vector& grad) const {
  check_theta(theta, num_params(), "MlpAnsatz");
  const Index np = net_.num_params();
  Mlp::Tape tape;
  const double raw = net_.forward(theta.head(np), x.coords(), &tape)(0);
  const double scale = theta(np);
  grad = Vector::Zero(num_params());
  net_.backward(theta.head(np), tape, Vector::Constant(1, scale), grad.head(np));
  grad(np) = raw;
  return scale * raw;
}

Vector MlpAnsatz::initial_parameters(Rng& rng) const {
  Vector theta(num_params());
  net_.initialise(theta.head(net_.num_params()), rng);
  theta(scale_index()) = 1.0;
  return theta;
}

MatrixMlpAnsatz::MatrixMlpAnsatz(Index electrons, Index determinants, std::vector<Index> hidden)
    : electrons_(electrons), determinants_(determinants),
      net_(1, std::move(hidden), electrons * determinants) {
  require(electrons >= 1 && determinants >= 1, "MatrixMlpAnsatz: need N >= 1 and d >= 1");
}

std::vector<Matrix> MatrixMlpAnsatz::orbitals(const Vector& theta, const Vector& x) const {
  check_theta(theta, num_params(), "MatrixMlpAnsatz");
  require(x.size() == electrons_, "MatrixMlpAnsatz: configuration has wrong dimension");
  std::vector<Matrix> y(static_cast<std::size_t>(determinants_), Matrix(electrons_, electrons_));
  for (Index i = 0; i < electrons_; ++i) {
    const Vector out = net_.forward(theta, Vector::Constant(1, x(i)));
    for (Index k = 0; k < determinants_; ++k)
      y[static_cast<std::size_t>(k)].row(i) = out.segment(k * electrons_, electrons_).transpose();
  }
  return y;
}

void MatrixMlpAnsatz::orbital_vjp(const Vector& theta, const Vector& x,
                                  const std::vector<Matrix>& upstream, Eigen::Ref<Vector> grad) const {
  check_theta(theta, num_params(), "MatrixMlpAnsatz");
  require(static_cast<Index>(upstream.size()) == determinants_, "MatrixMlpAnsatz: upstream count");
  Mlp::Tape tape;
  Vector u(electrons_ * determinants_);
  for (Index i = 0; i < electrons_; ++i) {
    net_.forward(theta, Vector::Constant(1, x(i)), &tape);
    for (Index k = 0; k < determinants_; ++k)
      u.segment(k * electrons_, electrons_) = upstream[static_cast<std::size_t>(k)].row(i).transpose();
    net_.backward(theta, tape, u, grad);
  }
}

double MatrixMlpAnsatz::value(const Vector& theta, const ConfigPoint& x) const {
  double total = 0.0;
  for (const Matrix& y : orbitals(theta, x.coords())) total += y.determinant();
  return total;
}

Vector MatrixMlpAnsatz::grad_theta(const Vector& theta, const ConfigPoint& x) const {
  const auto y = orbitals(theta, x.coords());
  std::vector<Matrix> upstream;
  upstream.reserve(y.size());
  for (const Matrix& m : y) upstream.push_back(cofactor(m));  // d det / dy = cofactor
  Vector g = Vector::Zero(num_params());
  orbital_vjp(theta, x.coords(), upstream, g);
  return g;
}

Vector MatrixMlpAnsatz::initial_parameters(Rng& rng) const {
  Vector theta(num_params());
  net_.initialise(theta, rng);
  return theta;
}

// ---------------------------------------------------------------------------
// ScaledAnsatz

ScaledAnsatz::ScaledAnsatz(AnsatzPtr base, double lambda) : base_(std::move(base)), lambda_(lambda) {
  require(base_ != nullptr, "ScaledAnsatz: null base");
  require(lambda != 0.0 && std::isfinite(lambda), "ScaledAnsatz: lambda must be finite and nonzero");
}

double ScaledAnsatz::value(const Vector& theta, const ConfigPoint& x) const {
  return lambda_ * base_->value(theta, x);
}
Vector ScaledAnsatz::grad_theta(const Vector& theta, const ConfigPoint& x) const {
  return lambda_ * base_->grad_theta(theta, x);
}
Vector ScaledAnsatz::grad_log_abs(const Vector& theta, const ConfigPoint& x) const {
  return base_->grad_log_abs(theta, x);
}
double ScaledAnsatz::laplacian_x(const Vector& theta, const ConfigPoint& x) const {
  return lambda_ * base_->laplacian_x(theta, x);
}
Matrix ScaledAnsatz::hessian_theta(const Vector& theta, const ConfigPoint& x) const {
  return lambda_ * base_->hessian_theta(theta, x);
}

// ---------------------------------------------------------------------------
// Free functions

Vector psi_vector(const Ansatz& psi, const Vector& theta, Index size) {
  Vector out(size);
  for (Index i = 0; i < size; ++i) out(i) = psi.value(theta, ConfigPoint(i));
  return out;
}

double default_fd_step(double at) { return std::cbrt(kEps) * (1.0 + std::abs(at)); }

double default_laplacian_step(double at) { return std::pow(kEps, 0.25) * (1.0 + std::abs(at)); }

Vector finite_diff_gradient(const Ansatz& psi, const Vector& theta, const ConfigPoint& x, double h) {
  Vector grad(theta.size());
  Vector probe = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    const double step = h > 0 ? h : default_fd_step(theta(i));
    probe(i) = theta(i) + step;
    const double up = psi.value(probe, x);
    probe(i) = theta(i) - step;
    const double down = psi.value(probe, x);
    probe(i) = theta(i);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("finite_diff_gradient: non-finite value in stencil");
    grad(i) = (up - down) / (2.0 * step);
  }
  return grad;
}

FdLaplacian laplacian_fallback(const Ansatz& psi, const Vector& theta, const Vector& x, double h) {
  const double centre = psi.value(theta, ConfigPoint(x));
  FdLaplacian out;
  Vector probe = x;
  double min_step = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.size(); ++i) {
    const double step = h > 0 ? h : default_laplacian_step(x(i));
    min_step = std::min(min_step, step);
    probe(i) = x(i) + step;
    const double up = psi.value(theta, ConfigPoint(probe));
    probe(i) = x(i) - step;
    const double down = psi.value(theta, ConfigPoint(probe));
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("laplacian_fallback: non-finite value in stencil");
    out.value += (up - 2.0 * centre + down) / (step * step);
  }
  out.cancellation = std::abs(out.value) * min_step * min_step < 1e3 * kEps * std::abs(centre);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << "# vmckit-checkpoint kind=" << ck.kind << " d=" << ck.theta.size() << " seed=" << ck.seed
      << "\n";
  for (Index i = 0; i < ck.theta.size(); ++i) out << format_double(ck.theta(i)) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string hash, tag, kind, d, seed;
  hs >> hash >> tag >> kind >> d >> seed;
  if (hash != "#" || tag != "vmckit-checkpoint" || kind.rfind("kind=", 0) != 0 ||
      d.rfind("d=", 0) != 0 || seed.rfind("seed=", 0) != 0)
    throw ConfigError(path.string() + ":1: malformed checkpoint header");
  Checkpoint ck;
  ck.kind = kind.substr(5);
  ck.seed = static_cast<std::uint64_t>(parse_int(seed.substr(5)));
  const auto n = parse_int(d.substr(2));
  if (n < 1) throw ConfigError(path.string() + ": d must be >= 1");
  ck.theta.resize(n);
  std::string line;
  for (long long i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw ConfigError(path.string() + ": expected " + std::to_string(n) + " values");
    ck.theta(i) = parse_double(line);
  }
  return ck;
}

}  // namespace vmckit
