#pragma once

#include <vector>

namespace leafnav {

// Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi
// rotations, run until the off-diagonal Frobenius norm falls below 1e-12
// of the matrix norm. values are unsorted; column k of vectors (row-major
// m x m) is the eigenvector for values[k].
struct SymEigen {
  std::vector<double> values;
  std::vector<double> vectors;
};

SymEigen jacobi_eigh(std::vector<double> a, int m);

}  // namespace leafnav
