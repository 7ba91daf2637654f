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

#ifndef GRADST_RNG_H_
#define GRADST_RNG_H_

#include <cstdint>
#include <limits>
#include <string_view>

namespace gradst {

// Counter-based generator: the n-th draw is a pure function of (key, n), so
// child streams derived from (seed, example id, replicate) are reproducible
// regardless of the order in which workers consume them.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  // Independent sub-stream keyed by an integer or a string.
  Rng child(std::uint64_t key) const;
  Rng child(std::string_view key) const;

  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view s);

}  // namespace gradst

#endif  // GRADST_RNG_H_
