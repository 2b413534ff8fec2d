#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace leafnav {

class Rng;

// Dense ReLU classifier. layer_dims = [n, h_1, ..., h_L, C]; hidden
// activations are ReLU, the last layer is linear and emits the scores
// s(x,w). ReLU derivative at exactly 0 is defined as 0.
struct NetParams {
  std::vector<int> layer_dims;
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;   // per layer, length out

  int input_dim() const { return layer_dims.front(); }
  int num_classes() const { return layer_dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t num_scalars() const;
  bool all_finite() const;

  static NetParams zeros(std::vector<int> dims);
  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
  static NetParams random_init(std::vector<int> dims, Rng& rng);

  void axpy(double a, const NetParams& g);  // *this += a * g, same shapes
  std::vector<double> flatten() const;
};

// Forward cache: inputs[l] is the input vector of layer l, pre[l] its
// pre-activation. pre.back() are the scores.
struct Activations {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
  std::span<const double> scores() const { return pre.back(); }
};

std::vector<double> forward(const NetParams& params, std::span<const double> x);
Activations forward_cached(const NetParams& params, std::span<const double> x);

// Max-subtraction stabilized; exp of the outputs sums to 1.
std::vector<double> log_softmax(std::span<const double> scores);
std::vector<double> softmax(std::span<const double> scores);

// Pattern of strict ReLU activations (pre > 0), one bool per hidden unit.
// Two points share a linear region iff their patterns agree.
std::vector<std::uint8_t> relu_pattern(const NetParams& params, std::span<const double> x);

// Gradient w.r.t. the input of <seed, s(x,w)> given a forward cache.
std::vector<double> backprop_input(const NetParams& params, const Activations& acts,
                                   std::span<const double> score_seed);
// Gradient w.r.t. every weight and bias of <seed, s(x,w)>.
NetParams backprop_params(const NetParams& params, const Activations& acts,
                          std::span<const double> score_seed);

// Rows are grad_x log p_i(y|x,w); generator of the distribution D_x.
struct InputJacobian {
  std::vector<std::vector<double>> rows;  // C x n
  std::vector<double> probs;              // C, strictly positive, sums to 1
  int num_classes() const { return static_cast<int>(rows.size()); }
  int dim() const { return rows.empty() ? 0 : static_cast<int>(rows.front().size()); }
};

// One shared forward pass, C backward passes with seeds e_i - p.
InputJacobian input_jacobian(const NetParams& params, std::span<const double> x);

// Exact gradient of the softmax cross-entropy -s_y + log sum_j e^{s_j}.
NetParams param_gradient(const NetParams& params, std::span<const double> x, int label);

// The C factors grad_w log p_i; the p-weighted sum is ~0 (the expectation
// of the score identity).
std::vector<NetParams> param_log_jacobian(const NetParams& params, std::span<const double> x);

}  // namespace leafnav
