#include "fmprior/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

#include "fmprior/error.hpp"

namespace fmprior::ad {
namespace {

void check_same_tape(Var a, Var b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), ErrorCode::kInvalidArgument,
          "operands live on different tapes");
}

void check_shape(bool ok, const char* op) {
  require(ok, ErrorCode::kShapeMismatch, std::string(op) + ": incompatible shapes");
}

}  // namespace

const Matrix& Var::value() const { return tape_->nodes_[static_cast<std::size_t>(id_)].value; }

const Matrix& Var::grad() const {
  auto& node = tape_->nodes_[static_cast<std::size_t>(id_)];
  if (!node.has_grad) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
  return node.grad;
}

double Var::scalar() const {
  const Matrix& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorCode::kShapeMismatch, "scalar(): value is not 1x1");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->nodes_[static_cast<std::size_t>(id_)].requires_grad; }

Var Tape::leaf(Matrix value, bool requires_grad) {
  require(value.allFinite(), ErrorCode::kNonFinite, "non-finite leaf value");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::vector<Var> parents, BackwardFn backward_fn) {
  if (!value.allFinite()) fail(ErrorCode::kNonFinite, "operation produced a non-finite value");
  bool needs = false;
  for (const Var& p : parents) needs = needs || p.requires_grad();
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var target, const Matrix& grad) {
  auto& node = nodes_[static_cast<std::size_t>(target.id_)];
  if (!node.requires_grad) return;
  if (!node.has_grad) {
    node.grad = grad;
    node.has_grad = true;
  } else {
    node.grad += grad;
  }
}

void Tape::zero_grad() {
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad.resize(0, 0);
  }
}

void Tape::backward(Var loss) {
  require(loss.tape() == this, ErrorCode::kInvalidArgument, "loss belongs to another tape");
  require(loss.rows() == 1 && loss.cols() == 1, ErrorCode::kShapeMismatch, "backward needs a 1x1 loss");
  zero_grad();
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id_; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.has_grad || !node.backward_fn) continue;
    // Copy: the callback may grow nothing, but it reads parents' slots.
    const Matrix upstream = node.grad;
    node.backward_fn(*this, upstream);
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  return a.tape()->record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g * b.value().transpose());
    t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  return a.tape()->record(s * a.value(), {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, s * g); });
}

Var scale_rows(Var a, const Eigen::VectorXd& weights) {
  check_shape(weights.size() == a.rows(), "scale_rows");
  return a.tape()->record(weights.asDiagonal() * a.value(), {a}, [a, weights](Tape& t, const Matrix& g) {
    t.accumulate(a, weights.asDiagonal() * g);
  });
}

Var add_const(Var a, const Matrix& c) {
  check_shape(c.rows() == a.rows() && c.cols() == a.cols(), "add_const");
  return a.tape()->record(a.value() + c, {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var hadamard(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var hadamard_const(Var a, const Matrix& c) {
  check_shape(c.rows() == a.rows() && c.cols() == a.cols(), "hadamard_const");
  return a.tape()->record(a.value().cwiseProduct(c), {a}, [a, c](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(c));
  });
}

Var transpose(Var a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var elementwise_abs(Var a) {
  return a.tape()->record(a.value().cwiseAbs(), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix sign = a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    t.accumulate(a, g.cwiseProduct(sign));
  });
}

Var relu(Var a) {
  return a.tape()->record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix mask = a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

namespace {

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Var gelu(Var a) {
  return a.tape()->record(a.value().unaryExpr(&gelu_value), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(&gelu_slope)));
  });
}

Var frobenius_sq(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape()->record(std::move(out), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, (2.0 * g(0, 0)) * a.value()); });
}

Var dot_const(Var a, const Matrix& c) {
  check_shape(c.rows() == a.rows() && c.cols() == a.cols(), "dot_const");
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(c).sum();
  return a.tape()->record(std::move(out), {a}, [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g(0, 0) * c); });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var psd_solve(Var A, Var B) {
  check_same_tape(A, B);
  check_shape(A.rows() == A.cols() && A.rows() == B.rows(), "psd_solve");
  const Matrix sym = 0.5 * (A.value() + A.value().transpose());
  auto llt = std::make_shared<Eigen::LLT<Matrix>>(sym);
  if (llt->info() != Eigen::Success) fail(ErrorCode::kSingularSystem, "psd_solve: matrix is not positive definite");
  Matrix X = llt->solve(B.value());
  return A.tape()->record(X, {A, B}, [A, B, llt, X](Tape& t, const Matrix& g) {
    const Matrix gb = llt->solve(g);
    t.accumulate(B, gb);
    const Matrix ga = gb * X.transpose();
    t.accumulate(A, -0.5 * (ga + ga.transpose()));
  });
}

Var detach(Var a) { return a.tape()->constant(a.value()); }

// ---------------------------------------------------------------------------

std::size_t MLPParams::num_parameters() const {
  std::size_t count = 0;
  for (const auto& w : weights) count += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) count += static_cast<std::size_t>(b.size());
  return count;
}

std::vector<Matrix*> MLPParams::tensors() {
  std::vector<Matrix*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

std::vector<const Matrix*> MLPParams::tensors() const {
  std::vector<const Matrix*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

MLPParams make_mlp(std::vector<int> dims, Activation activation, bool residual) {
  require(dims.size() >= 2, ErrorCode::kInvalidArgument, "MLP needs input and output dimensions");
  for (int d : dims) require(d >= 1, ErrorCode::kInvalidArgument, "MLP dimensions must be positive");
  MLPParams p;
  p.dims = std::move(dims);
  p.activation = activation;
  p.residual = residual;
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    p.weights.push_back(Matrix::Zero(p.dims[l], p.dims[l + 1]));
    p.biases.push_back(Matrix::Zero(1, p.dims[l + 1]));
  }
  return p;
}

void init_normal(MLPParams& params, double stddev, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& w : params.weights)
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
  for (auto& b : params.biases) b.setZero();
}

void init_fan_in(MLPParams& params, double gain, double last_gain, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    auto& w = params.weights[l];
    double s = gain / std::sqrt(static_cast<double>(w.rows()));
    if (l + 1 == params.weights.size()) s *= last_gain;
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = s * normal(rng);
    params.biases[l].setZero();
  }
}

std::vector<Matrix> MLPBinding::grads() const {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l].grad());
    out.push_back(biases[l].grad());
  }
  return out;
}

MLPBinding bind(Tape& tape, const MLPParams& params, bool requires_grad) {
  MLPBinding b;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    b.weights.push_back(tape.leaf(params.weights[l], requires_grad));
    b.biases.push_back(tape.leaf(params.biases[l], requires_grad));
  }
  return b;
}

namespace {

bool skip_connection(const MLPParams& p, std::size_t layer) {
  return p.residual && layer + 1 < p.weights.size() && layer > 0 && p.dims[layer] == p.dims[layer + 1];
}

}  // namespace

Var mlp_forward(const MLPParams& params, const MLPBinding& binding, Var X) {
  check_shape(X.cols() == params.input_dim(), "mlp_forward");
  Var h = X;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    Var z = add_row(matmul(h, binding.weights[l]), binding.biases[l]);
    if (l + 1 < params.weights.size()) {
      z = params.activation == Activation::kGelu ? gelu(z) : relu(z);
      if (skip_connection(params, l)) z = add(h, z);
    }
    h = z;
  }
  return h;
}

Matrix mlp_forward(const MLPParams& params, const Matrix& X) {
  check_shape(X.cols() == params.input_dim(), "mlp_forward");
  Matrix h = X;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    Matrix z = (h * params.weights[l]).rowwise() + params.biases[l].row(0);
    if (l + 1 < params.weights.size()) {
      if (params.activation == Activation::kGelu)
        z = z.unaryExpr(&gelu_value);
      else
        z = z.cwiseMax(0.0);
      if (skip_connection(params, l)) z += h;
    }
    h = std::move(z);
  }
  return h;
}

// ---------------------------------------------------------------------------

OptimState make_optim_state(const std::vector<Matrix*>& params, double learning_rate) {
  OptimState s;
  s.learning_rate = learning_rate;
  for (const Matrix* p : params) {
    s.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void optim_step(OptimState& state, const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                double learning_rate) {
  require(params.size() == grads.size() && params.size() == state.first_moment.size(),
          ErrorCode::kShapeMismatch, "optimizer: parameter/gradient count mismatch");
  const double lr = learning_rate > 0.0 ? learning_rate : state.learning_rate;
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(grads[i].rows() == params[i]->rows() && grads[i].cols() == params[i]->cols(),
            ErrorCode::kShapeMismatch, "optimizer: gradient shape differs from parameter");
    if (!grads[i].allFinite()) fail(ErrorCode::kNonFinite, "optimizer received a non-finite gradient");
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i].cwiseAbs2();
    params[i]->array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
  }
}

}  // namespace fmprior::ad
