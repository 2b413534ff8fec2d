#include "leafnav/jacobi.hpp"

#include <cmath>
#include <stdexcept>

namespace leafnav {

namespace {

double off_diagonal_norm(const std::vector<double>& a, int m) {
  double s = 0.0;
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q)
      if (p != q) s += a[std::size_t(p) * m + q] * a[std::size_t(p) * m + q];
  return std::sqrt(s);
}

double frobenius_norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SymEigen jacobi_eigh(std::vector<double> a, int m) {
  if (m < 0 || a.size() != std::size_t(m) * m)
    throw std::runtime_error("jacobi_eigh: matrix size does not match dimension");
  SymEigen out;
  out.vectors.assign(std::size_t(m) * m, 0.0);
  for (int i = 0; i < m; ++i) out.vectors[std::size_t(i) * m + i] = 1.0;
  if (m == 0) return out;

  const double scale = frobenius_norm(a);
  const double tol = 1e-12 * scale;

  for (int sweep = 0; sweep < 64; ++sweep) {
    if (off_diagonal_norm(a, m) <= tol) break;
    for (int p = 0; p < m - 1; ++p) {
      for (int q = p + 1; q < m; ++q) {
        const double apq = a[std::size_t(p) * m + q];
        if (apq == 0.0) continue;
        const double app = a[std::size_t(p) * m + p];
        const double aqq = a[std::size_t(q) * m + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a[std::size_t(p) * m + p] = app - t * apq;
        a[std::size_t(q) * m + q] = aqq + t * apq;
        a[std::size_t(p) * m + q] = 0.0;
        a[std::size_t(q) * m + p] = 0.0;
        for (int r = 0; r < m; ++r) {
          if (r != p && r != q) {
            const double arp = a[std::size_t(r) * m + p];
            const double arq = a[std::size_t(r) * m + q];
            a[std::size_t(r) * m + p] = arp - s * (arq + tau * arp);
            a[std::size_t(p) * m + r] = a[std::size_t(r) * m + p];
            a[std::size_t(r) * m + q] = arq + s * (arp - tau * arq);
            a[std::size_t(q) * m + r] = a[std::size_t(r) * m + q];
          }
          const double vrp = out.vectors[std::size_t(r) * m + p];
          const double vrq = out.vectors[std::size_t(r) * m + q];
          out.vectors[std::size_t(r) * m + p] = vrp - s * (vrq + tau * vrp);
          out.vectors[std::size_t(r) * m + q] = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  out.values.resize(m);
  for (int i = 0; i < m; ++i) out.values[i] = a[std::size_t(i) * m + i];
  return out;
}

}  // namespace leafnav
