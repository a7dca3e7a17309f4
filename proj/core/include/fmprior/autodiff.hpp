#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace fmprior::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Gradient of the last backward pass; zeros if none reached this node.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Ordered record of executed operations. Nodes are appended in execution
/// order, so reverse order is a valid topological order for backward.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every requires-grad node.
  // `loss` must be 1x1.
  void backward(Var loss);
  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }

  // Extension point for operations; `backward_fn` receives the node's
  // upstream gradient and must accumulate into parents via `accumulate`.
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;
  Var record(Matrix value, std::vector<Var> parents, BackwardFn backward_fn);
  void accumulate(Var target, const Matrix& grad);

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward_fn;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (r x c) plus a 1 x c row broadcast over rows.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
// Row r of `a` multiplied by weights[r] (constant).
Var scale_rows(Var a, const Eigen::VectorXd& weights);
Var add_const(Var a, const Matrix& c);
Var hadamard(Var a, Var b);
Var hadamard_const(Var a, const Matrix& c);
Var transpose(Var a);
// Subgradient 0 at 0.
Var elementwise_abs(Var a);
Var relu(Var a);
Var gelu(Var a);
// Sum of squares, 1x1.
Var frobenius_sq(Var a);
// sum(g o a) for constant g, 1x1. Injects g as a fixed cotangent at `a`.
Var dot_const(Var a, const Matrix& g);
Var sum(Var a);
// Solves A X = B for symmetric positive-definite A (symmetrized before the
// Cholesky factorization).
Var psd_solve(Var A, Var B);
// Same value, no gradient flows back.
Var detach(Var a);

// ---------------------------------------------------------------------------
// Feed-forward network

enum class Activation { kGelu, kRelu };

/// Dense layer stack `in -> widths... -> out`; hidden layers use the
/// activation, the output layer is linear. With `residual`, hidden layers of
/// equal input/output width add their input back.
struct MLPParams {
  std::vector<int> dims;  // dims.front() = input, dims.back() = output
  Activation activation = Activation::kGelu;
  bool residual = false;
  std::vector<Matrix> weights;  // dims[l] x dims[l+1]
  std::vector<Matrix> biases;   // 1 x dims[l+1]

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  std::size_t num_parameters() const;

  // Flat list [W0, b0, W1, b1, ...] for the optimizer.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
};

MLPParams make_mlp(std::vector<int> dims, Activation activation, bool residual);

// Weights ~ Normal(0, stddev^2) from a seeded engine, biases zero.
void init_normal(MLPParams& params, double stddev, unsigned long long seed);
// Weights ~ Normal(0, gain^2 / fan_in), biases zero; the last layer is scaled
// by `last_gain`.
void init_fan_in(MLPParams& params, double gain, double last_gain, unsigned long long seed);

struct MLPBinding {
  std::vector<Var> weights;
  std::vector<Var> biases;

  // Gradients in the order of MLPParams::tensors().
  std::vector<Matrix> grads() const;
};

MLPBinding bind(Tape& tape, const MLPParams& params, bool requires_grad = true);
Var mlp_forward(const MLPParams& params, const MLPBinding& binding, Var X);

// Tape-free evaluation.
Matrix mlp_forward(const MLPParams& params, const Matrix& X);

// ---------------------------------------------------------------------------
// Adaptive-moment optimizer

struct OptimState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

OptimState make_optim_state(const std::vector<Matrix*>& params, double learning_rate);

// One bias-corrected update; `learning_rate` overrides state.learning_rate
// when positive.
void optim_step(OptimState& state, const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                double learning_rate = -1.0);

}  // namespace fmprior::ad
