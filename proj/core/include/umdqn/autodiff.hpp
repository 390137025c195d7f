#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "umdqn/rng.hpp"

namespace umdqn {

/// Dense row-major matrix of doubles. Vectors are n x 1.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// A trainable tensor: values plus a gradient accumulator of equal shape.
/// Gradients accumulate across backward calls and are reset to zero by the
/// optimiser step.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
  void zero_grad() { grad.fill(0.0); }
};

enum class Activation {
  Relu,
  Elu,
  Identity,
  /// Positivity head for integrand outputs: elu(x) + 1 + delta keeps the
  /// value strictly above zero without the dead region of a plain relu.
  Positive,
};

double activate(Activation act, double x);
double activate_deriv(Activation act, double x);

/// Draws values uniformly in [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))];
/// gradients start at zero.
Parameter xavier_init(std::string name, int rows, int cols, Rng& rng);

struct Layer {
  Parameter weight;  // out x in
  Parameter bias;    // out x 1
  Activation act = Activation::Identity;
};

/// Fully connected network. Adjacent layer widths must agree.
struct Mlp {
  std::vector<Layer> layers;

  int input_width() const { return layers.empty() ? 0 : layers.front().weight.value.cols; }
  int output_width() const { return layers.empty() ? 0 : layers.back().weight.value.rows; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void validate() const;
};

Mlp make_mlp(const std::string& name, std::span<const int> widths,
             std::span<const Activation> acts, Rng& rng);

/// Intermediate state retained by forward() so that backward() can run.
struct ForwardRecord {
  std::vector<std::vector<double>> inputs;   // input of each layer
  std::vector<std::vector<double>> preacts;  // pre-activation of each layer
  bool valid = false;
};

/// Evaluates the network. When record is non-null, retains what backward
/// needs. Throws DimensionError on width mismatch and NumericError on
/// non-finite input.
std::vector<double> forward(const Mlp& mlp, std::span<const double> input,
                            ForwardRecord* record = nullptr);

/// Accumulates dLoss/dParameter into every parameter's gradient and returns
/// dLoss/dInput. Requires a record produced by forward(); repeated calls
/// keep accumulating.
std::vector<double> backward(Mlp& mlp, const ForwardRecord& record,
                             std::span<const double> upstream);

/// Adam first/second moment estimates, lazily shaped on the first step.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;

/// Standard Adam update with bias correction; zeroes gradients afterwards.
/// Throws NumericError (before touching any value) if a gradient is not
/// finite; the step counter is not advanced in that case.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, double eps);

/// Rescales gradients so their global L2 norm is at most max_norm,
/// preserving direction. Returns the pre-clip norm.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

double global_grad_norm(std::span<const Parameter* const> params);
void zero_grads(std::span<Parameter* const> params);

}  // namespace umdqn
