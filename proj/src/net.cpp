#include "leafnav/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "leafnav/rng.hpp"

namespace leafnav {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::runtime_error("NetParams: need at least [n, C]");
  for (int d : dims)
    if (d < 1) throw std::runtime_error("NetParams: nonpositive layer dimension");
}

void check_input(const NetParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.input_dim())
    throw std::runtime_error("input dimension mismatch: got " + std::to_string(x.size()) +
                             ", net expects " + std::to_string(params.input_dim()));
}

// y = W x + b with W row-major out x in.
void affine(const std::vector<double>& w, const std::vector<double>& b,
            std::span<const double> x, std::vector<double>& y) {
  const std::size_t out = b.size();
  const std::size_t in = x.size();
  y.assign(out, 0.0);
  for (std::size_t r = 0; r < out; ++r) {
    const double* wr = w.data() + r * in;
    double acc = b[r];
    for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

}  // namespace

std::size_t NetParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool NetParams::all_finite() const {
  for (const auto& w : weights)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

NetParams NetParams::zeros(std::vector<int> dims) {
  check_dims(dims);
  NetParams p;
  p.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    p.weights.emplace_back(std::size_t(p.layer_dims[l + 1]) * p.layer_dims[l], 0.0);
    p.biases.emplace_back(std::size_t(p.layer_dims[l + 1]), 0.0);
  }
  return p;
}

NetParams NetParams::random_init(std::vector<int> dims, Rng& rng) {
  NetParams p = zeros(std::move(dims));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_dims[l]));
    for (auto& v : p.weights[l]) v = rng.uniform(-bound, bound);
    for (auto& v : p.biases[l]) v = rng.uniform(-bound, bound);
  }
  return p;
}

void NetParams::axpy(double a, const NetParams& g) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += a * g.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += a * g.biases[l][i];
  }
}

std::vector<double> NetParams::flatten() const {
  std::vector<double> out;
  out.reserve(num_scalars());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].begin(), weights[l].end());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

Activations forward_cached(const NetParams& params, std::span<const double> x) {
  check_input(params, x);
  const int L = params.num_layers();
  Activations acts;
  acts.inputs.resize(L);
  acts.pre.resize(L);
  acts.inputs[0].assign(x.begin(), x.end());
  for (int l = 0; l < L; ++l) {
    affine(params.weights[l], params.biases[l], acts.inputs[l], acts.pre[l]);
    if (l + 1 < L) {
      acts.inputs[l + 1] = acts.pre[l];
      for (auto& v : acts.inputs[l + 1]) v = std::max(v, 0.0);
    }
  }
  return acts;
}

std::vector<double> forward(const NetParams& params, std::span<const double> x) {
  check_input(params, x);
  const int L = params.num_layers();
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (int l = 0; l < L; ++l) {
    affine(params.weights[l], params.biases[l], cur, next);
    if (l + 1 < L)
      for (auto& v : next) v = std::max(v, 0.0);
    cur.swap(next);
  }
  return cur;
}

std::vector<double> log_softmax(std::span<const double> scores) {
  double m = scores[0];
  for (double s : scores) m = std::max(m, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out = log_softmax(scores);
  for (auto& v : out) v = std::exp(v);
  return out;
}

std::vector<std::uint8_t> relu_pattern(const NetParams& params, std::span<const double> x) {
  const Activations acts = forward_cached(params, x);
  std::vector<std::uint8_t> pattern;
  for (int l = 0; l + 1 < params.num_layers(); ++l)
    for (double z : acts.pre[l]) pattern.push_back(z > 0.0 ? 1 : 0);
  return pattern;
}

std::vector<double> backprop_input(const NetParams& params, const Activations& acts,
                                   std::span<const double> score_seed) {
  const int L = params.num_layers();
  std::vector<double> delta(score_seed.begin(), score_seed.end());
  std::vector<double> grad;
  for (int l = L - 1; l >= 0; --l) {
    // grad = W_l^T delta
    const std::size_t out = params.biases[l].size();
    const std::size_t in = acts.inputs[l].size();
    grad.assign(in, 0.0);
    const auto& w = params.weights[l];
    for (std::size_t r = 0; r < out; ++r) {
      const double* wr = w.data() + r * in;
      const double d = delta[r];
      if (d == 0.0) continue;
      for (std::size_t c = 0; c < in; ++c) grad[c] += wr[c] * d;
    }
    if (l > 0) {
      // gate through ReLU of the previous layer's pre-activation
      for (std::size_t c = 0; c < in; ++c)
        if (acts.pre[l - 1][c] <= 0.0) grad[c] = 0.0;
      delta.swap(grad);
    }
  }
  return grad;
}

NetParams backprop_params(const NetParams& params, const Activations& acts,
                          std::span<const double> score_seed) {
  const int L = params.num_layers();
  NetParams g = NetParams::zeros(params.layer_dims);
  std::vector<double> delta(score_seed.begin(), score_seed.end());
  std::vector<double> prev;
  for (int l = L - 1; l >= 0; --l) {
    const std::size_t out = params.biases[l].size();
    const std::size_t in = acts.inputs[l].size();
    auto& gw = g.weights[l];
    for (std::size_t r = 0; r < out; ++r) {
      const double d = delta[r];
      g.biases[l][r] = d;
      if (d == 0.0) continue;
      double* gwr = gw.data() + r * in;
      const auto& a = acts.inputs[l];
      for (std::size_t c = 0; c < in; ++c) gwr[c] = d * a[c];
    }
    if (l > 0) {
      prev.assign(in, 0.0);
      const auto& w = params.weights[l];
      for (std::size_t r = 0; r < out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const double* wr = w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) prev[c] += wr[c] * d;
      }
      for (std::size_t c = 0; c < in; ++c)
        if (acts.pre[l - 1][c] <= 0.0) prev[c] = 0.0;
      delta.swap(prev);
    }
  }
  return g;
}

InputJacobian input_jacobian(const NetParams& params, std::span<const double> x) {
  const Activations acts = forward_cached(params, x);
  const int C = params.num_classes();
  InputJacobian jac;
  jac.probs = softmax(acts.scores());
  jac.rows.resize(C);
  std::vector<double> seed(C);
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) seed[j] = (i == j ? 1.0 : 0.0) - jac.probs[j];
    jac.rows[i] = backprop_input(params, acts, seed);
  }
  return jac;
}

NetParams param_gradient(const NetParams& params, std::span<const double> x, int label) {
  if (label < 0 || label >= params.num_classes())
    throw std::runtime_error("param_gradient: label " + std::to_string(label) +
                             " out of range [0," + std::to_string(params.num_classes()) + ")");
  const Activations acts = forward_cached(params, x);
  std::vector<double> seed = softmax(acts.scores());
  seed[label] -= 1.0;  // p - e_y
  return backprop_params(params, acts, seed);
}

std::vector<NetParams> param_log_jacobian(const NetParams& params, std::span<const double> x) {
  const Activations acts = forward_cached(params, x);
  const int C = params.num_classes();
  const std::vector<double> probs = softmax(acts.scores());
  std::vector<NetParams> factors;
  factors.reserve(C);
  std::vector<double> seed(C);
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) seed[j] = (i == j ? 1.0 : 0.0) - probs[j];
    factors.push_back(backprop_params(params, acts, seed));
  }
  return factors;
}

}  // namespace leafnav
