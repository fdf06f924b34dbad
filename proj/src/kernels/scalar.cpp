#include "tac/kernels.hpp"

namespace tac::kernels {
namespace {

void accumulate_taps_scalar(double* out, std::size_t n, const double* const* rows, const double* weights,
                            std::size_t ntaps) {
  for (std::size_t t = 0; t < n; ++t) {
    double acc = out[t];
    for (std::size_t k = 0; k < ntaps; ++k) acc += weights[k] * rows[k][t];
    out[t] = acc;
  }
}

void dot_taps_scalar(const double* a, std::size_t n, const double* const* rows, double* results, std::size_t nrows) {
  for (std::size_t k = 0; k < nrows; ++k) {
    const double* r = rows[k];
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += a[t] * r[t];
    results[k] += acc;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, "scalar", &accumulate_taps_scalar, &dot_taps_scalar};
  return table;
}

}  // namespace tac::kernels
