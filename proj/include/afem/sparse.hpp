#pragma once

#include <span>
#include <vector>

#include "afem/kernels.hpp"

namespace afem {

/// Compressed-row sparse matrix.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;
  bool symmetric = false;

  void multiply(std::span<const double> x, std::span<double> y, Exec exec = Exec::parallel) const;
  std::vector<double> multiply(std::span<const double> x, Exec exec = Exec::parallel) const;
  double at(int i, int j) const;
  std::vector<double> diagonal() const;
  /// max |A_ij - A_ji| <= tol * max |A_ij|
  bool is_symmetric(double tol = 1e-12) const;

  static CsrMatrix identity(int n);
  /// Dense row-major input; zeros dropped.
  static CsrMatrix from_dense(int n, std::span<const double> dense);
};

}  // namespace afem
