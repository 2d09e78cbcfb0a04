// Copyright 2026 The LutForge Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>

namespace lutforge {

// Worker count: LUTFORGE_THREADS when set to a positive integer, otherwise
// the hardware concurrency.
std::size_t thread_count();

// Splits [0, n) into contiguous chunks, one per worker, and runs
// fn(begin, end) on each. The first exception thrown by any chunk (lowest
// chunk index) is rethrown after all workers join.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace lutforge
