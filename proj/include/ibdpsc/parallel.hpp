// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace ibdpsc {

/// Thread budget: IBDPSC_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Overrides worker_count() for the current process; 0 restores the default.
void set_worker_count(std::size_t threads);

/// Splits [0, n) into contiguous chunks of at least `min_chunk` items and runs
/// `body(begin, end)` on each, possibly concurrently. The first exception
/// thrown by any chunk is rethrown after all chunks finish.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ibdpsc
