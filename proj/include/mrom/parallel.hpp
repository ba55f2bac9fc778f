#ifndef MROM_PARALLEL_HPP
#define MROM_PARALLEL_HPP

#include <functional>

namespace mrom {

/// Process-wide cap on worker threads for parallel_for. Defaults to the
/// hardware concurrency; set to 1 to force serial execution (timing runs,
/// debugging).
int max_threads();
void set_max_threads(int n);

/// Run f(0), ..., f(n-1) on up to max_threads() workers (static block
/// partition). Every item must write only to its own output slot, which
/// keeps results independent of the schedule. The first exception thrown by
/// any item is rethrown after all workers join.
void parallel_for(int n, const std::function<void(int)>& f);

} // namespace mrom

#endif
