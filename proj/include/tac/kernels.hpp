#pragma once

// Inner-loop arithmetic kernels used by the convolution and dense layers.
// Every kernel has a scalar reference and an optional SIMD variant; the
// active table is chosen once at startup from CPU features.

#include <cstddef>
#include <string_view>

namespace tac::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  // out[t] += sum_k weights[k] * rows[k][t]   for t in [0, n)
  void (*accumulate_taps)(double* out, std::size_t n, const double* const* rows, const double* weights,
                          std::size_t ntaps);
  // results[k] += sum_t a[t] * rows[k][t]     for k in [0, nrows)
  void (*dot_taps)(const double* a, std::size_t n, const double* const* rows, double* results, std::size_t nrows);
};

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks the instruction set.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);

/// Table used by the layers. Defaults to the best supported ISA; the
/// TAC_ISA environment variable ("scalar" or "avx2") overrides it.
const KernelTable& active();

/// Forces a specific ISA. Throws std::runtime_error if unsupported.
void select(Isa isa);

Isa parse_isa(std::string_view name);

}  // namespace tac::kernels
