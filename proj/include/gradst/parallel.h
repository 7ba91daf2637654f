// Copyright 2026 The gradst Authors
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

#ifndef GRADST_PARALLEL_H_
#define GRADST_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace gradst {

// Worker count from GRADST_WORKERS; 1 when unset or invalid.
std::size_t default_workers();

// Calls fn(i) for i in [0, n) on up to `workers` threads. Each index is
// visited exactly once; the first exception thrown is rethrown after all
// threads join.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace gradst

#endif  // GRADST_PARALLEL_H_
