#include "afem/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace afem::kernels {

double dot_serial(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dot_parallel(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t nblocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (long blk = 0; blk < static_cast<long>(nblocks); ++blk) {
    const std::size_t lo = blk * kReductionBlock, hi = std::min(n, lo + kReductionBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[blk] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b, Exec exec) {
  return exec == Exec::parallel ? dot_parallel(a, b) : dot_serial(a, b);
}

double compensated_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

void spmv_serial(std::span<const int> row_ptr, std::span<const int> col, std::span<const double> val,
                 std::span<const double> x, std::span<double> y) {
  const std::size_t n = row_ptr.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

void spmv_parallel(std::span<const int> row_ptr, std::span<const int> col, std::span<const double> val,
                   std::span<const double> x, std::span<double> y) {
  const long n = static_cast<long>(row_ptr.size()) - 1;
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[i] = s;
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y, Exec exec) {
  for_each_index(x.size(), exec, [&](std::size_t i) { y[i] += a * x[i]; });
}

void gather(std::span<const int> offsets, std::span<const int> list, std::span<const double> contrib,
            std::span<double> out, Exec exec) {
  for_each_index(out.size(), exec, [&](std::size_t i) {
    double s = 0.0;
    for (int k = offsets[i]; k < offsets[i + 1]; ++k) s += contrib[list[k]];
    out[i] = s;
  });
}

}  // namespace afem::kernels
