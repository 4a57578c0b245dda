#pragma once

#include <span>
#include <vector>

namespace afem {

/// Selects the serial reference kernels or their OpenMP counterparts. Both
/// produce bit-identical results for element loops; reductions in the
/// parallel path use fixed-size blocks so results do not depend on the
/// thread count.
enum class Exec { serial, parallel };

namespace kernels {

inline constexpr std::size_t kReductionBlock = 4096;

double dot_serial(std::span<const double> a, std::span<const double> b);
double dot_parallel(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b, Exec exec);

/// y = A x for a CSR matrix.
void spmv_serial(std::span<const int> row_ptr, std::span<const int> col, std::span<const double> val,
                 std::span<const double> x, std::span<double> y);
void spmv_parallel(std::span<const int> row_ptr, std::span<const int> col, std::span<const double> val,
                   std::span<const double> x, std::span<double> y);

/// Neumaier-compensated sum in index order.
double compensated_sum(std::span<const double> v);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y, Exec exec);

/// out[i] = sum of contrib[list[k]] for k in [offsets[i], offsets[i+1]), in
/// list order. Used to scatter element contributions deterministically.
void gather(std::span<const int> offsets, std::span<const int> list, std::span<const double> contrib,
            std::span<double> out, Exec exec);

/// Runs body(i) for i in [0, n), in parallel when requested.
template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

}  // namespace kernels
}  // namespace afem
