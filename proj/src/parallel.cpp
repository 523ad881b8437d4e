#include "rhem/parallel.hpp"

namespace rhem {

namespace {
std::atomic<unsigned> g_thread_count{0};
}

void set_thread_count(unsigned n) { g_thread_count.store(n, std::memory_order_relaxed); }

unsigned thread_count() {
  const unsigned configured = g_thread_count.load(std::memory_order_relaxed);
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace rhem
