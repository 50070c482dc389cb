// Copyright (c) 2026 The nightnoise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>

namespace nightnoise {

// Execution policy for data-parallel kernels. Results never depend on the
// policy or the thread count: every index writes its own output slot and
// reductions are performed in index order.
enum class Exec { serial, parallel };

void set_thread_count(int threads);
int thread_count();

template <typename F>
void parallel_for(std::int64_t n, Exec exec, F&& body) {
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace nightnoise
