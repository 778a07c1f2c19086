#pragma once

#include <cstddef>
#include <functional>

namespace formcheck {

/// Worker count used when a call does not pass one; starts at the hardware
/// concurrency (at least 1).
int default_workers();
void set_default_workers(int workers);

/// Runs body(i) for i in [0, n). Indices are split into contiguous blocks, one
/// per worker; results must be written by index so the outcome does not depend
/// on scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int workers = 0);

}  // namespace formcheck
