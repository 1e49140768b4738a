#include "pcr/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace pcr {

namespace detail {
thread_local bool in_parallel_region = false;
}

namespace {

std::atomic<int> g_threads{0};

int default_threads() {
  if (const char* env = std::getenv("PCR_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void set_thread_count(int threads) { g_threads.store(threads > 0 ? threads : 0); }

int thread_count() {
  const int t = g_threads.load();
  return t > 0 ? t : default_threads();
}

}  // namespace pcr
