#include "umdqn/autodiff.hpp"

#include <cmath>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

namespace {
constexpr double kPositiveDelta = 1e-6;
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Elu:
      return x > 0.0 ? x : fast_exp(x) - 1.0;
    case Activation::Identity:
      return x;
    case Activation::Positive:
      return (x > 0.0 ? x : fast_exp(x) - 1.0) + 1.0 + kPositiveDelta;
  }
  return x;
}

double activate_deriv(Activation act, double x) {
  switch (act) {
    case Activation::Relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::Elu:
    case Activation::Positive:
      return x > 0.0 ? 1.0 : fast_exp(x);
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

Parameter xavier_init(std::string name, int rows, int cols, Rng& rng) {
  if (rows < 1 || cols < 1) {
    throw DimensionError("xavier_init: dimensions must be >= 1 for \"" + name + "\"");
  }
  Parameter p(std::move(name), rows, cols);
  const double bound = std::sqrt(6.0 / (rows + cols));
  for (double& v : p.value.data) v = rng.uniform(-bound, bound);
  return p;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> ps;
  ps.reserve(layers.size() * 2);
  for (Layer& l : layers) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  return ps;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> ps;
  ps.reserve(layers.size() * 2);
  for (const Layer& l : layers) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  return ps;
}

void Mlp::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.bias.value.rows != l.weight.value.rows || l.bias.value.cols != 1) {
      throw DimensionError("Mlp: bias shape mismatch at layer " + std::to_string(i));
    }
    if (i > 0 && layers[i - 1].weight.value.rows != l.weight.value.cols) {
      throw DimensionError("Mlp: adjacent layer widths disagree at layer " + std::to_string(i));
    }
  }
}

Mlp make_mlp(const std::string& name, std::span<const int> widths,
             std::span<const Activation> acts, Rng& rng) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1) {
    throw DimensionError("make_mlp: need n+1 widths for n activations");
  }
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.weight = xavier_init(name + ".w" + std::to_string(i), widths[i + 1], widths[i], rng);
    l.bias = Parameter(name + ".b" + std::to_string(i), widths[i + 1], 1);
    l.act = acts[i];
    mlp.layers.push_back(std::move(l));
  }
  mlp.validate();
  return mlp;
}

std::vector<double> forward(const Mlp& mlp, std::span<const double> input, ForwardRecord* record) {
  if (static_cast<int>(input.size()) != mlp.input_width()) {
    throw DimensionError("forward: input width " + std::to_string(input.size()) +
                         " != network input width " + std::to_string(mlp.input_width()));
  }
  if (!all_finite(input)) throw NumericError("forward: non-finite input");

  if (record != nullptr) {
    record->inputs.assign(mlp.layers.size(), {});
    record->preacts.assign(mlp.layers.size(), {});
    record->valid = true;
  }

  std::vector<double> x(input.begin(), input.end());
  for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
    const Layer& l = mlp.layers[li];
    const int out = l.weight.value.rows;
    const int in = l.weight.value.cols;
    std::vector<double> pre(out);
    const double* w = l.weight.value.data.data();
    for (int r = 0; r < out; ++r) {
      double acc = l.bias.value.data[r];
      const double* wr = w + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) acc += wr[c] * x[c];
      pre[r] = acc;
    }
    if (record != nullptr) {
      record->inputs[li] = std::move(x);
      record->preacts[li] = pre;
    }
    x.resize(pre.size());
    for (int r = 0; r < out; ++r) x[r] = activate(l.act, pre[r]);
  }
  return x;
}

std::vector<double> backward(Mlp& mlp, const ForwardRecord& record,
                             std::span<const double> upstream) {
  if (!record.valid || record.inputs.size() != mlp.layers.size()) {
    throw UsageError("backward: no forward record");
  }
  if (static_cast<int>(upstream.size()) != mlp.output_width()) {
    throw DimensionError("backward: upstream width mismatch");
  }

  std::vector<double> grad(upstream.begin(), upstream.end());
  for (int li = static_cast<int>(mlp.layers.size()) - 1; li >= 0; --li) {
    Layer& l = mlp.layers[li];
    const int out = l.weight.value.rows;
    const int in = l.weight.value.cols;
    const std::vector<double>& pre = record.preacts[li];
    const std::vector<double>& x = record.inputs[li];

    std::vector<double> dpre(out);
    for (int r = 0; r < out; ++r) dpre[r] = grad[r] * activate_deriv(l.act, pre[r]);

    double* gw = l.weight.grad.data.data();
    for (int r = 0; r < out; ++r) {
      const double d = dpre[r];
      l.bias.grad.data[r] += d;
      double* gwr = gw + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) gwr[c] += d * x[c];
    }

    std::vector<double> dx(in, 0.0);
    const double* w = l.weight.value.data.data();
    for (int r = 0; r < out; ++r) {
      const double d = dpre[r];
      const double* wr = w + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) dx[c] += d * wr[c];
    }
    grad = std::move(dx);
  }
  return grad;
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, double eps) {
  if (lr <= 0.0) throw DomainError("adam_step: lr must be > 0");
  if (eps <= 0.0) throw DomainError("adam_step: eps must be > 0");

  for (const Parameter* p : params) {
    for (double g : p->grad.data) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in \"" + p->name + "\"; step aborted");
      }
    }
  }

  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.rows, p->value.cols);
      state.v.emplace_back(p->value.rows, p->value.cols);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: parameter list does not match optimiser state");
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (state.m[i].size() != p.value.size()) {
      throw DimensionError("adam_step: moment shape mismatch for \"" + p.name + "\"");
    }
    double* m = state.m[i].data.data();
    double* v = state.v[i].data.data();
    double* val = p.value.data.data();
    double* g = p.grad.data.data();
    const std::size_t n = p.value.size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
      v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      g[j] = 0.0;
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  if (max_norm <= 0.0) throw DomainError("clip_grad_norm: max_norm must be > 0");
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad.data) g *= scale;
    }
  }
  return norm;
}

double global_grad_norm(std::span<const Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data) sq += g * g;
  }
  return std::sqrt(sq);
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace umdqn
