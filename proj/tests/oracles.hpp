// Test-only oracles, kept independent of the library code paths they
// check: a plain re-implementation of the forward pass, explicit
// gate-matrix Jacobians, central finite differences, classical (largest
// pivot) Jacobi for dense matrices, and a modified Gram-Schmidt projector.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "leafnav/geometry.hpp"
#include "leafnav/net.hpp"

namespace oracles {

using leafnav::FactoredPSD;
using leafnav::NetParams;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Straightforward per-neuron forward pass, no shared code with the library.
inline std::vector<double> ref_forward(const NetParams& p, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  for (int l = 0; l < p.num_layers(); ++l) {
    const int out = p.layer_dims[l + 1];
    const int in = p.layer_dims[l];
    std::vector<double> z(out);
    for (int r = 0; r < out; ++r) {
      double acc = p.biases[l][r];
      for (int c = 0; c < in; ++c) acc += p.weights[l][std::size_t(r) * in + c] * a[c];
      z[r] = acc;
    }
    if (l + 1 < p.num_layers())
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    a = std::move(z);
  }
  return a;
}

inline std::vector<double> ref_softmax(std::span<const double> s) {
  double m = s[0];
  for (double v : s) m = std::max(m, v);
  std::vector<double> p(s.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    p[i] = std::exp(s[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// ds/dx as the explicit product of weight and 0/1 gate matrices along the
// active region of x: rows k = grad_x s_k. C x n row-major.
inline std::vector<std::vector<double>> explicit_score_jacobian_x(const NetParams& p,
                                                                  std::span<const double> x) {
  const int L = p.num_layers();
  // running = ds/dz_l, initialized at the score layer.
  const int c = p.num_classes();
  std::vector<std::vector<double>> running(c, std::vector<double>(c, 0.0));
  for (int i = 0; i < c; ++i) running[i][i] = 1.0;

  // recompute pre-activations with the reference forward
  std::vector<std::vector<double>> pre;
  {
    std::vector<double> a(x.begin(), x.end());
    for (int l = 0; l < L; ++l) {
      const int out = p.layer_dims[l + 1];
      const int in = p.layer_dims[l];
      std::vector<double> z(out);
      for (int r = 0; r < out; ++r) {
        double acc = p.biases[l][r];
        for (int cc = 0; cc < in; ++cc) acc += p.weights[l][std::size_t(r) * in + cc] * a[cc];
        z[r] = acc;
      }
      pre.push_back(z);
      if (l + 1 < L) {
        a = z;
        for (auto& v : a) v = v > 0.0 ? v : 0.0;
      }
    }
  }

  for (int l = L - 1; l >= 0; --l) {
    const int out = p.layer_dims[l + 1];
    const int in = p.layer_dims[l];
    std::vector<std::vector<double>> next(c, std::vector<double>(in, 0.0));
    for (int k = 0; k < c; ++k)
      for (int r = 0; r < out; ++r) {
        const double coef = running[k][r];
        if (coef == 0.0) continue;
        for (int cc = 0; cc < in; ++cc)
          next[k][cc] += coef * p.weights[l][std::size_t(r) * in + cc];
      }
    if (l > 0)
      for (int k = 0; k < c; ++k)
        for (int cc = 0; cc < in; ++cc)
          if (pre[l - 1][cc] <= 0.0) next[k][cc] = 0.0;
    running = std::move(next);
  }
  return running;
}

// Rows grad_x log p_i = sum_k (delta_ik - p_k) grad_x s_k from the explicit
// score Jacobian.
inline std::vector<std::vector<double>> explicit_logp_jacobian_x(const NetParams& p,
                                                                 std::span<const double> x) {
  const auto score_jac = explicit_score_jacobian_x(p, x);
  const std::vector<double> probs = ref_softmax(ref_forward(p, x));
  const int c = p.num_classes();
  const std::size_t n = x.size();
  std::vector<std::vector<double>> rows(c, std::vector<double>(n, 0.0));
  for (int i = 0; i < c; ++i)
    for (int k = 0; k < c; ++k) {
      const double coef = (i == k ? 1.0 : 0.0) - probs[k];
      for (std::size_t j = 0; j < n; ++j) rows[i][j] += coef * score_jac[k][j];
    }
  return rows;
}

// ds/dw by the same explicit route; rows k are flattened like
// NetParams::flatten (per layer: weights row-major, then biases).
inline std::vector<std::vector<double>> explicit_score_jacobian_w(const NetParams& p,
                                                                  std::span<const double> x) {
  const int L = p.num_layers();
  const int c = p.num_classes();

  // layer inputs and pre-activations from the reference forward
  std::vector<std::vector<double>> inputs, pre;
  {
    std::vector<double> a(x.begin(), x.end());
    for (int l = 0; l < L; ++l) {
      inputs.push_back(a);
      const int out = p.layer_dims[l + 1];
      const int in = p.layer_dims[l];
      std::vector<double> z(out);
      for (int r = 0; r < out; ++r) {
        double acc = p.biases[l][r];
        for (int cc = 0; cc < in; ++cc) acc += p.weights[l][std::size_t(r) * in + cc] * a[cc];
        z[r] = acc;
      }
      pre.push_back(z);
      a = z;
      if (l + 1 < L)
        for (auto& v : a) v = v > 0.0 ? v : 0.0;
    }
  }

  // ds/dz_l for every layer via backward accumulation of explicit products
  std::vector<std::vector<std::vector<double>>> ds_dz(L);
  ds_dz[L - 1].assign(c, std::vector<double>(c, 0.0));
  for (int i = 0; i < c; ++i) ds_dz[L - 1][i][i] = 1.0;
  for (int l = L - 1; l > 0; --l) {
    const int out = p.layer_dims[l + 1];
    const int in = p.layer_dims[l];
    ds_dz[l - 1].assign(c, std::vector<double>(in, 0.0));
    for (int k = 0; k < c; ++k)
      for (int r = 0; r < out; ++r) {
        const double coef = ds_dz[l][k][r];
        if (coef == 0.0) continue;
        for (int cc = 0; cc < in; ++cc)
          ds_dz[l - 1][k][cc] += coef * p.weights[l][std::size_t(r) * in + cc];
      }
    for (int k = 0; k < c; ++k)
      for (int cc = 0; cc < in; ++cc)
        if (pre[l - 1][cc] <= 0.0) ds_dz[l - 1][k][cc] = 0.0;
  }

  std::vector<std::vector<double>> rows(c);
  for (int k = 0; k < c; ++k) {
    auto& row = rows[k];
    for (int l = 0; l < L; ++l) {
      const int out = p.layer_dims[l + 1];
      const int in = p.layer_dims[l];
      for (int r = 0; r < out; ++r)
        for (int cc = 0; cc < in; ++cc) row.push_back(ds_dz[l][k][r] * inputs[l][cc]);
      for (int r = 0; r < out; ++r) row.push_back(ds_dz[l][k][r]);
    }
  }
  return rows;
}

inline std::vector<std::vector<double>> explicit_logp_jacobian_w(const NetParams& p,
                                                                 std::span<const double> x) {
  const auto score_jac = explicit_score_jacobian_w(p, x);
  const std::vector<double> probs = ref_softmax(ref_forward(p, x));
  const int c = p.num_classes();
  const std::size_t d = score_jac.front().size();
  std::vector<std::vector<double>> rows(c, std::vector<double>(d, 0.0));
  for (int i = 0; i < c; ++i)
    for (int k = 0; k < c; ++k) {
      const double coef = (i == k ? 1.0 : 0.0) - probs[k];
      for (std::size_t j = 0; j < d; ++j) rows[i][j] += coef * score_jac[k][j];
    }
  return rows;
}

// Central finite difference of log p_i along coordinate k.
inline double fd_logp_input(const NetParams& p, std::span<const double> x, int i,
                            std::size_t k, double h) {
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  xp[k] += h;
  xm[k] -= h;
  const auto lp = leafnav::log_softmax(ref_forward(p, xp));
  const auto lm = leafnav::log_softmax(ref_forward(p, xm));
  return (lp[i] - lm[i]) / (2.0 * h);
}

// Central finite difference of f(params) over every parameter coordinate.
template <typename F>
std::vector<double> fd_param_gradient(const NetParams& p, F&& f, double h) {
  std::vector<double> grad;
  NetParams q = p;
  for (std::size_t l = 0; l < q.weights.size(); ++l) {
    for (auto* vecp : {&q.weights[l], &q.biases[l]}) {
      for (auto& v : *vecp) {
        const double keep = v;
        v = keep + h;
        const double fp = f(q);
        v = keep - h;
        const double fm = f(q);
        v = keep;
        grad.push_back((fp - fm) / (2.0 * h));
      }
    }
  }
  return grad;
}

// Classical Jacobi (largest off-diagonal pivot), independent of the
// library's cyclic-sweep version. Returns eigenvalues sorted descending.
inline std::vector<double> dense_sym_eig(std::vector<double> a, int m) {
  for (int iter = 0; iter < 100 * m * m; ++iter) {
    int p = 0, q = 1;
    double big = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (std::abs(a[std::size_t(i) * m + j]) > big) {
          big = std::abs(a[std::size_t(i) * m + j]);
          p = i;
          q = j;
        }
    double diag = 0.0;
    for (int i = 0; i < m; ++i) diag = std::max(diag, std::abs(a[std::size_t(i) * m + i]));
    if (big <= 1e-15 * std::max(diag, 1e-300)) break;

    const double app = a[std::size_t(p) * m + p];
    const double aqq = a[std::size_t(q) * m + q];
    const double apq = a[std::size_t(p) * m + q];
    const double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    for (int k = 0; k < m; ++k) {
      const double akp = a[std::size_t(k) * m + p];
      const double akq = a[std::size_t(k) * m + q];
      a[std::size_t(k) * m + p] = c * akp - s * akq;
      a[std::size_t(k) * m + q] = s * akp + c * akq;
    }
    for (int k = 0; k < m; ++k) {
      const double apk = a[std::size_t(p) * m + k];
      const double aqk = a[std::size_t(q) * m + k];
      a[std::size_t(p) * m + k] = c * apk - s * aqk;
      a[std::size_t(q) * m + k] = s * apk + c * aqk;
    }
  }
  std::vector<double> vals(m);
  for (int i = 0; i < m; ++i) vals[i] = a[std::size_t(i) * m + i];
  std::sort(vals.begin(), vals.end(), std::greater<double>());
  return vals;
}

inline std::vector<double> densify(const FactoredPSD& m) {
  const int n = m.dim();
  std::vector<double> a(std::size_t(n) * n, 0.0);
  for (int i = 0; i < m.num_factors(); ++i)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        a[std::size_t(r) * n + c] += m.weights[i] * m.factors[i][r] * m.factors[i][c];
  return a;
}

// Projection of v onto span(rows) by modified Gram-Schmidt.
inline std::vector<double> gram_schmidt_project(std::span<const double> v,
                                                const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> basis;
  for (const auto& row : rows) {
    std::vector<double> u(row.begin(), row.end());
    for (const auto& q : basis) {
      const double c = dot(u, q);
      for (std::size_t k = 0; k < u.size(); ++k) u[k] -= c * q[k];
    }
    const double nu = norm(u);
    if (nu > 1e-12 * std::max(1.0, norm(row))) {
      for (auto& c : u) c /= nu;
      basis.push_back(std::move(u));
    }
  }
  std::vector<double> proj(v.size(), 0.0);
  for (const auto& q : basis) {
    const double c = dot(v, q);
    for (std::size_t k = 0; k < proj.size(); ++k) proj[k] += c * q[k];
  }
  return proj;
}

}  // namespace oracles
