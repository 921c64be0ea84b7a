#include "physlaw/numkit/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace physlaw::numkit {

namespace {

std::atomic<int> g_max_threads{0};  // 0: unresolved
std::atomic<bool> g_strict{false};
thread_local bool tls_in_pool = false;

int resolve_threads() {
  int v = g_max_threads.load();
  if (v > 0) return v;
  if (const char* env = std::getenv("PHYSLAW_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) {
      g_max_threads.store(n);
      return n;
    }
  }
  int hw = int(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  g_max_threads.store(hw);
  return hw;
}

bool resolve_strict() {
  static const bool env_strict = [] {
    const char* env = std::getenv("PHYSLAW_STRICT");
    return env && env[0] == '1';
  }();
  return env_strict || g_strict.load();
}

}  // namespace

int max_threads() { return resolve_strict() ? 1 : resolve_threads(); }

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 1); }

bool strict_deterministic() { return resolve_strict(); }

void set_strict_deterministic(bool on) { g_strict.store(on); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  int workers = max_threads();
  if (workers <= 1 || n < 2 || tls_in_pool) {
    fn(0, n);
    return;
  }
  if (std::int64_t(workers) > n) workers = int(n);
  std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  threads.reserve(size_t(workers - 1));
  for (int w = 1; w < workers; ++w) {
    std::int64_t b = w * chunk;
    std::int64_t e = std::min(n, b + chunk);
    if (b >= e) break;
    threads.emplace_back([&fn, b, e] {
      tls_in_pool = true;
      fn(b, e);
      tls_in_pool = false;
    });
  }
  fn(0, std::min(n, chunk));
  for (auto& t : threads) t.join();
}

}  // namespace physlaw::numkit
