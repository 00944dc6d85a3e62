#pragma once

#include <cstddef>
#include <functional>

namespace pseudolat {

// Serial is the reference path; Parallel must produce identical results.
enum class Execution { Serial, Parallel };

// OpenMP worker count, capped by the PSEUDOLAT_THREADS environment variable when set.
int worker_count();

// Calls body(i) for i in [0, n). With Execution::Parallel the indices are spread over OpenMP
// threads; the body must only write to index-owned slots. If any call throws, the exception from
// the lowest index is rethrown after the loop.
void for_each_index(std::size_t n, Execution exec, const std::function<void(std::size_t)>& body);

}  // namespace pseudolat
