#include "afem/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace afem {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y, Exec exec) const {
  if (exec == Exec::parallel) kernels::spmv_parallel(row_ptr, col, val, x, y);
  else kernels::spmv_serial(row_ptr, col, val, x, y);
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x, Exec exec) const {
  std::vector<double> y(n);
  multiply(x, y, exec);
  return y;
}

double CsrMatrix::at(int i, int j) const {
  auto b = col.begin() + row_ptr[i], e = col.begin() + row_ptr[i + 1];
  auto it = std::lower_bound(b, e, j);
  return (it != e && *it == j) ? val[it - col.begin()] : 0.0;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = at(i, i);
  return d;
}

bool CsrMatrix::is_symmetric(double tol) const {
  double scale = 0.0;
  for (double v : val) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < n; ++i)
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      if (std::abs(val[k] - at(col[k], i)) > tol * scale) return false;
  return true;
}

CsrMatrix CsrMatrix::identity(int n) {
  CsrMatrix m;
  m.n = n;
  m.symmetric = true;
  m.row_ptr.resize(n + 1);
  for (int i = 0; i <= n; ++i) m.row_ptr[i] = i;
  m.col.resize(n);
  m.val.assign(n, 1.0);
  for (int i = 0; i < n; ++i) m.col[i] = i;
  return m;
}

CsrMatrix CsrMatrix::from_dense(int n, std::span<const double> dense) {
  CsrMatrix m;
  m.n = n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (dense[i * n + j] != 0.0) {
        m.col.push_back(j);
        m.val.push_back(dense[i * n + j]);
      }
    m.row_ptr.push_back(static_cast<int>(m.col.size()));
  }
  m.symmetric = m.is_symmetric(0.0);
  return m;
}

}  // namespace afem
