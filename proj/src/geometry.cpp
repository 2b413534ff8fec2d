#include "leafnav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "leafnav/jacobi.hpp"

namespace leafnav {

namespace {

constexpr double kRankTol = 1e-8;       // soft-rank threshold, relative to lambda_max
constexpr double kPinvCutoff = 1e-10;   // pseudo-inverse eigenvalue cutoff
constexpr double kResidualFloor = 1e-30;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> displaced(std::span<const double> x, std::span<const double> dir,
                              double step) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += step * dir[i];
  return out;
}

// Second differences of the scores vanish inside one linear region; a
// crossing along the probe direction shows up as a nonzero kink.
bool same_region_probe(const std::vector<double>& s_minus, const std::vector<double>& s_zero,
                       const std::vector<double>& s_plus) {
  double sec = 0.0, first = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < s_zero.size(); ++k) {
    const double d2 = s_plus[k] - 2.0 * s_zero[k] + s_minus[k];
    const double d1 = s_plus[k] - s_minus[k];
    sec += d2 * d2;
    first += d1 * d1;
    scale = std::max(scale, std::abs(s_zero[k]));
  }
  sec = std::sqrt(sec);
  first = std::sqrt(first);
  return sec <= std::max(1e-6 * first, 1e-11 * (1.0 + scale));
}

}  // namespace

std::vector<double> FactoredPSD::apply(std::span<const double> v) const {
  std::vector<double> out(v.size(), 0.0);
  for (int i = 0; i < num_factors(); ++i) {
    const double c = weights[i] * dot(factors[i], v);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += c * factors[i][k];
  }
  return out;
}

double FactoredPSD::trace() const {
  double tr = 0.0;
  for (int i = 0; i < num_factors(); ++i) tr += weights[i] * dot(factors[i], factors[i]);
  return tr;
}

FactoredPSD local_data_matrix(const NetParams& params, std::span<const double> x) {
  InputJacobian jac = input_jacobian(params, x);
  FactoredPSD m;
  m.weights = std::move(jac.probs);
  m.factors = std::move(jac.rows);
  return m;
}

FactoredPSD local_fisher_matrix(const NetParams& params, std::span<const double> x) {
  const Activations acts = forward_cached(params, x);
  FactoredPSD m;
  m.weights = softmax(acts.scores());
  std::vector<NetParams> factors = param_log_jacobian(params, x);
  m.factors.reserve(factors.size());
  for (const auto& f : factors) m.factors.push_back(f.flatten());
  return m;
}

Spectrum spectrum(const FactoredPSD& m) {
  const int c = m.num_factors();
  Spectrum out;
  out.eigenvalues.assign(c, 0.0);
  out.trace = m.trace();
  if (c == 0) return out;

  std::vector<double> gram(std::size_t(c) * c);
  for (int i = 0; i < c; ++i)
    for (int j = i; j < c; ++j) {
      const double k = std::sqrt(m.weights[i] * m.weights[j]) * dot(m.factors[i], m.factors[j]);
      gram[std::size_t(i) * c + j] = k;
      gram[std::size_t(j) * c + i] = k;
    }
  SymEigen eig = jacobi_eigh(std::move(gram), c);
  out.eigenvalues = std::move(eig.values);
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), std::greater<double>());

  const double lambda_max = out.eigenvalues.front();
  if (lambda_max > 0.0)
    for (double l : out.eigenvalues)
      if (l > kRankTol * lambda_max) ++out.soft_rank;
  return out;
}

std::vector<double> project_onto_span(std::span<const double> v,
                                      const std::vector<std::vector<double>>& rows) {
  const int c = static_cast<int>(rows.size());
  std::vector<double> proj(v.size(), 0.0);
  if (c == 0) return proj;

  std::vector<double> gram(std::size_t(c) * c);
  std::vector<double> rhs(c);
  for (int i = 0; i < c; ++i) {
    rhs[i] = dot(rows[i], v);
    for (int j = i; j < c; ++j) {
      const double k = dot(rows[i], rows[j]);
      gram[std::size_t(i) * c + j] = k;
      gram[std::size_t(j) * c + i] = k;
    }
  }
  SymEigen eig = jacobi_eigh(std::move(gram), c);
  const double lambda_max = *std::max_element(eig.values.begin(), eig.values.end());
  if (lambda_max <= 0.0) return proj;
  const double cutoff = kPinvCutoff * lambda_max;

  // coeffs = Q diag(1/lambda on kept modes) Q^T rhs
  std::vector<double> coeffs(c, 0.0);
  for (int k = 0; k < c; ++k) {
    if (eig.values[k] <= cutoff) continue;
    double proj_k = 0.0;
    for (int i = 0; i < c; ++i) proj_k += eig.vectors[std::size_t(i) * c + k] * rhs[i];
    proj_k /= eig.values[k];
    for (int i = 0; i < c; ++i) coeffs[i] += eig.vectors[std::size_t(i) * c + k] * proj_k;
  }
  for (int i = 0; i < c; ++i) {
    if (coeffs[i] == 0.0) continue;
    for (std::size_t k = 0; k < proj.size(); ++k) proj[k] += coeffs[i] * rows[i][k];
  }
  return proj;
}

std::vector<double> project_onto_distribution(std::span<const double> v,
                                              const InputJacobian& jac) {
  if (static_cast<int>(v.size()) != jac.dim())
    throw std::runtime_error("project_onto_distribution: vector/Jacobian dimension mismatch");
  return project_onto_span(v, jac.rows);
}

std::vector<double> project_onto_kernel(std::span<const double> v, const InputJacobian& jac) {
  std::vector<double> p = project_onto_distribution(v, jac);
  std::vector<double> out(v.begin(), v.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= p[i];
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::runtime_error("kl_divergence: size mismatch");
  double sum_p = 0.0, sum_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0) || !(q[i] > 0.0))
      throw std::runtime_error("kl_divergence: inputs must be strictly positive");
    sum_p += p[i];
    sum_q += q[i];
  }
  if (std::abs(sum_p - 1.0) > 1e-9 || std::abs(sum_q - 1.0) > 1e-9)
    throw std::runtime_error("kl_divergence: inputs must sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

double kl_from_log_probs(std::span<const double> log_p, std::span<const double> log_q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    const double pi = std::exp(log_p[i]);
    if (pi > 0.0) kl += pi * (log_p[i] - log_q[i]);
  }
  return kl;
}

KlQuadratic kl_quadratic_check(const NetParams& params, std::span<const double> x,
                               std::span<const double> u, double t) {
  if (x.size() != u.size())
    throw std::runtime_error("kl_quadratic_check: point/direction dimension mismatch");
  if (t < 0.0) throw std::runtime_error("kl_quadratic_check: t must be >= 0");
  KlQuadratic out;
  if (t == 0.0) return out;

  const std::vector<double> x_mid = displaced(x, u, 0.5 * t);
  const std::vector<double> x_end = displaced(x, u, t);
  if (relu_pattern(params, x) != relu_pattern(params, x_end) ||
      relu_pattern(params, x) != relu_pattern(params, x_mid))
    throw std::runtime_error(
        "kl_quadratic_check: linear region crossing between x and x+tu; reduce t");

  const InputJacobian jac = input_jacobian(params, x);
  const std::vector<double> lp0 = log_softmax(forward(params, x));
  const std::vector<double> lp1 = log_softmax(forward(params, x_end));
  out.measured = kl_from_log_probs(lp1, lp0);

  double quad = 0.0;
  for (int i = 0; i < jac.num_classes(); ++i) {
    const double gi_u = dot(jac.rows[i], u);
    quad += jac.probs[i] * gi_u * gi_u;
  }
  out.predicted = 0.5 * t * t * quad;
  out.rel_error = std::abs(out.measured - out.predicted) /
                  std::max(std::abs(out.measured), kResidualFloor);
  return out;
}

namespace {

// Shared bracket machinery over an abstract field evaluator: fields(point)
// returns all C field vectors at that point. The base point supplies the
// probe directions and the span used for the projection.
BracketResidual bracket_residual(
    const std::vector<std::vector<double>>& base_fields, std::span<const double> base_point,
    int i, int j, double h,
    const std::function<std::vector<std::vector<double>>(const std::vector<double>&)>& fields,
    const std::function<bool(std::span<const double>, std::span<const double>, double)>&
        region_guard) {
  const int c = static_cast<int>(base_fields.size());
  if (i < 0 || j < 0 || i >= c || j >= c)
    throw std::runtime_error("involutivity_residual: class index out of range");
  if (i == j) throw std::runtime_error("involutivity_residual: need two distinct classes");
  if (h <= 0.0) throw std::runtime_error("involutivity_residual: step must be > 0");

  const double ni = norm(base_fields[i]);
  const double nj = norm(base_fields[j]);
  if (ni < kResidualFloor || nj < kResidualFloor)
    throw std::runtime_error("involutivity_residual: degenerate (near-zero) field direction");

  std::vector<double> unit_i(base_fields[i].begin(), base_fields[i].end());
  for (auto& v : unit_i) v /= ni;
  std::vector<double> unit_j(base_fields[j].begin(), base_fields[j].end());
  for (auto& v : unit_j) v /= nj;

  if (!region_guard(base_point, unit_i, h) || !region_guard(base_point, unit_j, h))
    throw std::runtime_error(
        "involutivity_residual: linear region crossing within the probe; retry with smaller h");

  const auto fields_ip = fields(displaced(base_point, unit_i, h));
  const auto fields_im = fields(displaced(base_point, unit_i, -h));
  const auto fields_jp = fields(displaced(base_point, unit_j, h));
  const auto fields_jm = fields(displaced(base_point, unit_j, -h));

  // b = D_{g_i} g_j - D_{g_j} g_i, directional derivatives scaled back to
  // the unnormalized fields.
  const std::size_t dim = base_fields[i].size();
  std::vector<double> bracket(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const double d_j_along_i = ni * (fields_ip[j][k] - fields_im[j][k]) / (2.0 * h);
    const double d_i_along_j = nj * (fields_jp[i][k] - fields_jm[i][k]) / (2.0 * h);
    bracket[k] = d_j_along_i - d_i_along_j;
  }

  const std::vector<double> in_span = project_onto_span(bracket, base_fields);
  std::vector<double> residual(dim);
  for (std::size_t k = 0; k < dim; ++k) residual[k] = bracket[k] - in_span[k];

  BracketResidual out;
  out.in_span = norm(in_span);
  out.out_of_span = norm(residual);
  out.relative = out.out_of_span / std::max(norm(bracket), kResidualFloor);
  return out;
}

}  // namespace

BracketResidual involutivity_residual(const NetParams& params, std::span<const double> x,
                                      int i, int j, double h) {
  const InputJacobian base = input_jacobian(params, x);
  auto fields = [&params](const std::vector<double>& point) {
    return input_jacobian(params, point).rows;
  };
  auto guard = [&params](std::span<const double> point, std::span<const double> dir,
                         double step) {
    const auto s_minus = forward(params, displaced(point, dir, -step));
    const auto s_zero = forward(params, point);
    const auto s_plus = forward(params, displaced(point, dir, step));
    return same_region_probe(s_minus, s_zero, s_plus);
  };
  return bracket_residual(base.rows, x, i, j, h, fields, guard);
}

BracketResidual param_involutivity_residual(const NetParams& params,
                                            std::span<const double> x, int i, int j,
                                            double h) {
  auto at_params = [&params](std::span<const double> w) {
    NetParams shifted = params;
    std::size_t k = 0;
    for (std::size_t l = 0; l < shifted.weights.size(); ++l) {
      for (auto& v : shifted.weights[l]) v = w[k++];
      for (auto& v : shifted.biases[l]) v = w[k++];
    }
    return shifted;
  };

  const std::vector<double> w0 = params.flatten();
  const std::vector<double> x_copy(x.begin(), x.end());

  std::vector<std::vector<double>> base;
  for (const auto& f : param_log_jacobian(params, x)) base.push_back(f.flatten());

  auto fields = [&](const std::vector<double>& w) {
    std::vector<std::vector<double>> out;
    for (const auto& f : param_log_jacobian(at_params(w), x_copy)) out.push_back(f.flatten());
    return out;
  };
  // Scores are multilinear, not affine, in w, so the second-difference
  // probe does not apply here; compare ReLU patterns at the probe points.
  auto guard = [&](std::span<const double> w, std::span<const double> dir, double step) {
    const auto base_pattern = relu_pattern(at_params(w), x_copy);
    return relu_pattern(at_params(displaced(w, dir, -step)), x_copy) == base_pattern &&
           relu_pattern(at_params(displaced(w, dir, step)), x_copy) == base_pattern;
  };
  return bracket_residual(base, w0, i, j, h, fields, guard);
}

}  // namespace leafnav
