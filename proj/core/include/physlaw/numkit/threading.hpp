#pragma once

#include <cstdint>
#include <functional>

namespace physlaw::numkit {

// Worker cap for data-parallel loops. Resolution order: explicit
// set_max_threads() call, then the PHYSLAW_THREADS environment variable,
// then hardware concurrency. Strict-deterministic mode pins it to 1.
int max_threads();
void set_max_threads(int n);

// True when PHYSLAW_STRICT=1 or set_strict_deterministic(true); loops run
// single-threaded. Work is otherwise split into static per-index chunks whose
// per-element results never cross threads, so outputs are identical at any
// thread count; strict mode exists to make that property trivially auditable.
bool strict_deterministic();
void set_strict_deterministic(bool on);

// Calls fn(begin, end) over a static partition of [0, n). Serial when n is
// small, the pool has one worker, or the caller is itself a pool worker.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace physlaw::numkit
