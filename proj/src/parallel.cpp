#include "hardmetric/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace hm::parallel {

namespace {

int env_threads() {
  static const int cached = [] {
    const char* s = std::getenv("HM_THREADS");
    if (!s) return 1;
    int v = std::atoi(s);
    return v < 1 ? 1 : v;
  }();
  return cached;
}

std::atomic<int> g_override{0};

}  // namespace

int threads() {
  int o = g_override.load(std::memory_order_relaxed);
  return o > 0 ? o : env_threads();
}

void set_threads(int n) { g_override.store(n < 0 ? 0 : n, std::memory_order_relaxed); }

}  // namespace hm::parallel
