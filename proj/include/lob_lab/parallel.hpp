#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace lob_lab {

/// Caps the worker count used by parallel_for; 0 restores the default
/// (LOB_LAB_THREADS if set, else hardware concurrency).
void set_worker_cap(int workers);
int worker_count();

/// Runs fn(begin, end) over contiguous chunks of [0, count) on up to
/// worker_count() threads. Chunking never affects results as long as fn only
/// writes to indices in its own range. The first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace lob_lab
