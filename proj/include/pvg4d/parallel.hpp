#pragma once

#include <cstddef>
#include <functional>

namespace pvg4d {

/// Worker count used by the rasterizer and losses. Defaults to the
/// PVG4D_THREADS environment variable, else hardware concurrency.
int thread_cap();
void set_thread_cap(int n);

/// Runs fn(i) for i in [0, n). Work items must write disjoint outputs; any
/// reduction is done by the caller in index order so results do not depend
/// on the thread count.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace pvg4d
