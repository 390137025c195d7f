#include "umdqn/umnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

namespace {

constexpr double kPositiveDelta = 1e-6;
constexpr double kInvertRange = 1e6;
constexpr int kInvertMaxBisections = 200;

void check_integrand_shape(const UmnnModel& model) {
  if (model.integrand.layers.size() != 2) {
    throw DimensionError("UmnnModel: integrand must have one hidden layer");
  }
  if (model.integrand.input_width() != 1 + model.embed_width()) {
    throw DimensionError("UmnnModel: integrand input must be [t, c]");
  }
}

/// Fused forward of the integrand at many scalar nodes sharing one
/// conditioning fold. Equivalent to forward(integrand, [t, c]) per node.
void integrand_nodes(const UmnnModel& model, const Conditioning& cond,
                     std::span<const double> ts, std::span<double> out) {
  const int h = model.hidden_width();
  const double* wt = cond.wt.data();
  const double* hc = cond.hc.data();
  const Layer& head = model.integrand.layers[1];
  const double* w2 = head.weight.value.data.data();
  const double b2 = head.bias.value.data[0];

  std::vector<double> hbuf(h);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = ts[k];
    double* hv = hbuf.data();
    for (int i = 0; i < h; ++i) {
      const double a = wt[i] * t + hc[i];
      const double e = fast_exp(a < 0.0 ? a : 0.0) - 1.0;
      hv[i] = a > 0.0 ? a : e;
    }
    double acc = b2;
    for (int i = 0; i < h; ++i) acc += w2[i] * hv[i];
    const double eh = fast_exp(acc < 0.0 ? acc : 0.0) - 1.0;
    out[k] = (acc > 0.0 ? acc : eh) + 1.0 + kPositiveDelta;
  }
}

/// Reverse pass of integrand_nodes: recomputes the per-node hidden state,
/// accumulates integrand parameter gradients and the shared conditioning
/// gradient dhc.
void integrand_nodes_backward(UmnnModel& model, const Conditioning& cond,
                              std::span<const double> ts, std::span<const double> dg,
                              std::span<double> dhc) {
  const int h = model.hidden_width();
  const double* wt = cond.wt.data();
  const double* hc = cond.hc.data();
  Layer& l1 = model.integrand.layers[0];
  Layer& head = model.integrand.layers[1];
  const double* w2 = head.weight.value.data.data();
  const double b2 = head.bias.value.data[0];
  double* gw2 = head.weight.grad.data.data();
  double& gb2 = head.bias.grad.data[0];

  const int in1 = l1.weight.value.cols;  // 1 + embed width
  double* gw1 = l1.weight.grad.data.data();
  double* gb1 = l1.bias.grad.data.data();

  std::vector<double> hbuf(h), dbuf(h);
  std::vector<double> dwt(h, 0.0), dhc_local(h, 0.0);

  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = ts[k];
    double* hv = hbuf.data();
    double* dv = dbuf.data();
    for (int i = 0; i < h; ++i) {
      const double a = wt[i] * t + hc[i];
      const double e = fast_exp(a < 0.0 ? a : 0.0);
      hv[i] = a > 0.0 ? a : e - 1.0;
      dv[i] = a > 0.0 ? 1.0 : e;
    }
    double acc = b2;
    for (int i = 0; i < h; ++i) acc += w2[i] * hv[i];
    const double head_deriv = acc > 0.0 ? 1.0 : fast_exp(acc);
    const double dyraw = dg[k] * head_deriv;

    gb2 += dyraw;
    for (int i = 0; i < h; ++i) {
      gw2[i] += dyraw * hv[i];
      const double da = dyraw * w2[i] * dv[i];
      dwt[i] += t * da;
      dhc_local[i] += da;
    }
  }

  // Scatter the shared accumulators: t column of W1, bias, and dhc for the
  // caller's conditioning backward.
  for (int i = 0; i < h; ++i) {
    gw1[static_cast<std::size_t>(i) * in1] += dwt[i];
    gb1[i] += dhc_local[i];
    dhc[i] += dhc_local[i];
  }
}

/// Completes the conditioning backward: routes dhc through the c columns of
/// the integrand's first layer, adds the offset head contribution and runs
/// the embedding backward.
void conditioning_backward(UmnnModel& model, const Conditioning& cond,
                           std::span<const double> dhc, double dbeta) {
  const int h = model.hidden_width();
  const int e = model.embed_width();
  Layer& l1 = model.integrand.layers[0];
  const int in1 = l1.weight.value.cols;
  double* gw1 = l1.weight.grad.data.data();
  const double* w1 = l1.weight.value.data.data();
  const double* c = cond.c.data();

  std::vector<double> dc(e, 0.0);
  for (int i = 0; i < h; ++i) {
    const double d = dhc[i];
    if (d == 0.0) continue;
    double* gw_row = gw1 + static_cast<std::size_t>(i) * in1 + 1;
    const double* w_row = w1 + static_cast<std::size_t>(i) * in1 + 1;
    for (int j = 0; j < e; ++j) {
      gw_row[j] += d * c[j];
      dc[j] += d * w_row[j];
    }
  }

  if (dbeta != 0.0) {
    const std::vector<double> up{dbeta};
    std::vector<double> dc_beta = backward(model.offset, cond.offset_record, up);
    for (int j = 0; j < e; ++j) dc[j] += dc_beta[j];
  }
  backward(model.embedding, cond.embed_record, dc);
}

}  // namespace

std::vector<Parameter*> UmnnModel::parameters() {
  std::vector<Parameter*> ps;
  for (Parameter* p : embedding.parameters()) ps.push_back(p);
  for (Parameter* p : integrand.parameters()) ps.push_back(p);
  for (Parameter* p : offset.parameters()) ps.push_back(p);
  return ps;
}

std::vector<const Parameter*> UmnnModel::parameters() const {
  std::vector<const Parameter*> ps;
  for (const Parameter* p : embedding.parameters()) ps.push_back(p);
  for (const Parameter* p : integrand.parameters()) ps.push_back(p);
  for (const Parameter* p : offset.parameters()) ps.push_back(p);
  return ps;
}

UmnnModel UmnnModel::clone() const { return *this; }

void UmnnModel::assign_values(const UmnnModel& other) {
  auto dst = parameters();
  auto src = other.parameters();
  if (dst.size() != src.size()) throw DimensionError("assign_values: model shapes differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.size() != src[i]->value.size()) {
      throw DimensionError("assign_values: parameter shape mismatch for " + dst[i]->name);
    }
    dst[i]->value.data = src[i]->value.data;
  }
}

UmnnModel make_umnn_model(int feature_width, int embed_width, int hidden_width, int n_cc,
                          Rng& rng) {
  UmnnModel model;
  {
    const int widths[] = {feature_width, embed_width};
    const Activation acts[] = {Activation::Relu};
    model.embedding = make_mlp("embed", widths, acts, rng);
  }
  {
    const int widths[] = {1 + embed_width, hidden_width, 1};
    const Activation acts[] = {Activation::Elu, Activation::Positive};
    model.integrand = make_mlp("integrand", widths, acts, rng);
  }
  {
    const int widths[] = {embed_width, 1};
    const Activation acts[] = {Activation::Identity};
    model.offset = make_mlp("offset", widths, acts, rng);
  }
  model.n_cc = n_cc;
  return model;
}

Conditioning condition(const UmnnModel& model, std::span<const double> features) {
  check_integrand_shape(model);
  Conditioning cond;
  cond.features.assign(features.begin(), features.end());
  cond.c = forward(model.embedding, features, &cond.embed_record);
  cond.beta = forward(model.offset, cond.c, &cond.offset_record)[0];

  const Layer& l1 = model.integrand.layers[0];
  const int h = l1.weight.value.rows;
  const int in1 = l1.weight.value.cols;
  const int e = in1 - 1;
  cond.wt.resize(h);
  cond.hc.resize(h);
  const double* w1 = l1.weight.value.data.data();
  for (int i = 0; i < h; ++i) {
    const double* row = w1 + static_cast<std::size_t>(i) * in1;
    cond.wt[i] = row[0];
    double acc = l1.bias.value.data[i];
    for (int j = 0; j < e; ++j) acc += row[1 + j] * cond.c[j];
    cond.hc[i] = acc;
  }
  return cond;
}

UmnnEval umnn_eval(const UmnnModel& model, const Conditioning& cond, std::span<const double> xs,
                   bool want_g) {
  if (!all_finite(xs)) throw NumericError("umnn_eval: non-finite evaluation point");
  UmnnEval ev;
  ev.xs.assign(xs.begin(), xs.end());
  ev.want_g = want_g;
  ev.G.resize(xs.size());
  if (xs.empty()) return ev;

  double lo = 0.0, hi = 0.0;
  for (double x : xs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  ev.lo = lo;
  ev.hi = hi;

  if (hi == lo) {
    // Every point sits at zero: the integral is empty and G reduces to the
    // offset.
    ev.degenerate = true;
    std::fill(ev.G.begin(), ev.G.end(), cond.beta);
    if (want_g) {
      ev.gx.resize(xs.size());
      const double z = 0.0;
      double g0 = 0.0;
      integrand_nodes(model, cond, std::span<const double>(&z, 1), std::span<double>(&g0, 1));
      std::fill(ev.gx.begin(), ev.gx.end(), g0);
    }
    return ev;
  }

  const auto& rule = ClenshawCurtisRule::make(model.n_cc);
  const auto& ops = ChebyshevOps::cached(model.n_cc);
  const int n = model.n_cc;
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);

  ev.ts.resize(n);
  for (int k = 0; k < n; ++k) ev.ts[k] = mid + half * rule.nodes[k];

  std::vector<double> gvals(n);
  integrand_nodes(model, cond, ev.ts, gvals);
  for (double g : gvals) {
    if (!std::isfinite(g)) throw NumericError("umnn_eval: non-finite integrand value");
  }

  // Chebyshev coefficients of the integrand interpolant and of its
  // antiderivative (scaled to the physical interval).
  std::vector<double> a(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const double* row = ops.vals_to_coeffs.data.data() + static_cast<std::size_t>(k) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * gvals[j];
    a[k] = acc;
  }
  std::vector<double> b(n + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    const double* row = ops.antiderivative.data.data() + static_cast<std::size_t>(k) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * a[j];
    b[k] = half * acc;
  }

  const double xhat0 = (0.0 - mid) / half;
  const double p0 = cheb_eval(b, xhat0);
  if (want_g) ev.gx.resize(xs.size());
  for (std::size_t q = 0; q < xs.size(); ++q) {
    const double xhat = (xs[q] - mid) / half;
    ev.G[q] = cheb_eval(b, xhat) - p0 + cond.beta;
    if (want_g) ev.gx[q] = cheb_eval(a, xhat);
  }
  return ev;
}

void umnn_eval_backward(UmnnModel& model, const Conditioning& cond, const UmnnEval& eval,
                        std::span<const double> dG, std::span<const double> dgx) {
  if (dG.size() != eval.xs.size()) throw DimensionError("umnn_eval_backward: dG size mismatch");
  if (eval.want_g && !dgx.empty() && dgx.size() != eval.xs.size()) {
    throw DimensionError("umnn_eval_backward: dgx size mismatch");
  }
  if (eval.xs.empty()) return;

  double dbeta = 0.0;
  for (double d : dG) dbeta += d;

  const int h = model.hidden_width();
  std::vector<double> dhc(h, 0.0);

  if (eval.degenerate) {
    if (eval.want_g && !dgx.empty()) {
      double dsum = 0.0;
      for (double d : dgx) dsum += d;
      const double z = 0.0;
      integrand_nodes_backward(model, cond, std::span<const double>(&z, 1),
                               std::span<const double>(&dsum, 1), dhc);
    }
    conditioning_backward(model, cond, dhc, dbeta);
    return;
  }

  const auto& ops = ChebyshevOps::cached(model.n_cc);
  const int n = model.n_cc;
  const double half = 0.5 * (eval.hi - eval.lo);
  const double mid = 0.5 * (eval.hi + eval.lo);
  const double xhat0 = (0.0 - mid) / half;

  // Adjoint of the query evaluations: accumulate upstream into the
  // antiderivative coefficients (db) and interpolant coefficients (da).
  std::vector<double> db(n + 1, 0.0);
  std::vector<double> da(n, 0.0);
  std::vector<double> basis(n + 1);
  cheb_basis(xhat0, basis);
  for (int k = 0; k <= n; ++k) db[k] -= dbeta * basis[k];
  // dbeta collected the sum of dG; reuse it for the -P(xhat0) term above,
  // then accumulate the per-query +P(xhat) terms.
  for (std::size_t q = 0; q < eval.xs.size(); ++q) {
    const double up = dG[q];
    const double upg = (eval.want_g && !dgx.empty()) ? dgx[q] : 0.0;
    if (up == 0.0 && upg == 0.0) continue;
    const double xhat = (eval.xs[q] - mid) / half;
    cheb_basis(xhat, basis);
    for (int k = 0; k <= n; ++k) db[k] += up * basis[k];
    if (upg != 0.0) {
      for (int k = 0; k < n; ++k) da[k] += upg * basis[k];
    }
  }

  // Adjoint of the antiderivative map and of the node-to-coefficient
  // transform.
  std::vector<double> dgnodes(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
      acc += ops.antiderivative(k, j) * db[k];
    }
    da[j] += half * acc;
  }
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += ops.vals_to_coeffs(k, j) * da[k];
    dgnodes[j] = acc;
  }

  integrand_nodes_backward(model, cond, eval.ts, dgnodes, dhc);
  conditioning_backward(model, cond, dhc, dbeta);
}

double umnn_forward(const UmnnModel& model, const Conditioning& cond, double x) {
  const double xs[] = {x};
  return umnn_eval(model, cond, xs, false).G[0];
}

UmnnRecord umnn_forward_record(const UmnnModel& model, std::span<const double> features,
                               double x) {
  UmnnRecord rec;
  rec.cond = condition(model, features);
  const double xs[] = {x};
  rec.eval = umnn_eval(model, rec.cond, xs, true);
  rec.x = x;
  rec.value = rec.eval.G[0];
  return rec;
}

void umnn_backward(UmnnModel& model, const UmnnRecord& record, double upstream) {
  const double dG[] = {upstream};
  const double dg[] = {0.0};
  umnn_eval_backward(model, record.cond, record.eval, dG, dg);
}

double umnn_grad_x(const UmnnRecord& record) { return record.eval.gx[0]; }

std::vector<double> integrand_values(const UmnnModel& model, const Conditioning& cond,
                                     std::span<const double> ts) {
  std::vector<double> out(ts.size());
  integrand_nodes(model, cond, ts, out);
  return out;
}

double latent_cdf(Latent latent, double u) {
  return latent == Latent::Logistic ? sigmoid(u) : normal_cdf(u);
}

double latent_pdf(Latent latent, double u) {
  return latent == Latent::Logistic ? sigmoid_deriv(u) : normal_pdf(u);
}

double cdf_eval(const UmnnModel& model, const Conditioning& cond, double z) {
  return latent_cdf(model.latent, umnn_forward(model, cond, z));
}

double pdf_eval(const UmnnModel& model, const Conditioning& cond, double z) {
  const double xs[] = {z};
  const UmnnEval ev = umnn_eval(model, cond, xs, true);
  return ev.gx[0] * latent_pdf(model.latent, ev.G[0]);
}

double qf_eval(const UmnnModel& model, const Conditioning& cond, double tau) {
  if (tau < 0.0 || tau > 1.0) {
    throw DomainError("qf_eval: quantile fraction " + std::to_string(tau) + " outside [0, 1]");
  }
  return umnn_forward(model, cond, tau);
}

double umnn_invert(const UmnnModel& model, const Conditioning& cond, double y, double tol) {
  if (tol <= 0.0) throw DomainError("umnn_invert: tol must be > 0");

  double width = 1.0;
  double lo = y - width;
  double hi = y + width;
  double glo = umnn_forward(model, cond, lo);
  double ghi = umnn_forward(model, cond, hi);
  while (glo > y || ghi < y) {
    width *= 2.0;
    lo = y - width;
    hi = y + width;
    if (std::abs(lo) > kInvertRange || std::abs(hi) > kInvertRange) {
      throw DomainError("umnn_invert: no bracket for y = " + std::to_string(y) +
                        " within |x| <= 1e6");
    }
    glo = umnn_forward(model, cond, lo);
    ghi = umnn_forward(model, cond, hi);
  }

  double x = 0.5 * (lo + hi);
  for (int it = 0; it < kInvertMaxBisections; ++it) {
    x = 0.5 * (lo + hi);
    const double gx = umnn_forward(model, cond, x);
    if (std::abs(gx - y) <= tol) return x;
    if (gx < y) {
      lo = x;
    } else {
      hi = x;
    }
  }
  const double gfinal = umnn_forward(model, cond, x);
  if (std::abs(gfinal - y) <= tol) return x;
  throw NumericError("umnn_invert: bisection failed to reach tolerance");
}

}  // namespace umdqn
