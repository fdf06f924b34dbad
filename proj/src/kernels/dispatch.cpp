#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tac/kernels.hpp"

namespace tac::kernels {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
      __builtin_cpu_init();
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw std::invalid_argument("unknown ISA: " + std::string(name));
}

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("TAC_ISA"); env != nullptr && *env != '\0') {
    const Isa wanted = parse_isa(env);
    if (!cpu_supports(wanted)) throw std::runtime_error(std::string("TAC_ISA=") + env + " not supported on this CPU");
    return wanted == Isa::avx2 ? avx2_table() : &scalar_table();
  }
  if (cpu_supports(Isa::avx2)) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (!cpu_supports(isa)) throw std::runtime_error("requested ISA not supported on this CPU");
  current().store(isa == Isa::avx2 ? avx2_table() : &scalar_table(), std::memory_order_relaxed);
}

}  // namespace tac::kernels
