// Copyright 2026 The dpsched Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPSCHED_RANDOM_HPP_
#define DPSCHED_RANDOM_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace dpsched {

// splitmix64 finalizer; also the basis of all seed derivation in the project.
std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent 64-bit stream id from (seed, value). Chain calls to
// mix several components: hash_combine(hash_combine(base, recipe), t).
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

// Maps a raw 64-bit word to [0, bound) via the multiply-shift reduction.
std::uint64_t bounded_u64(std::uint64_t word, std::uint64_t bound);

// Standard normal draws via Box-Muller over a seeded mt19937_64. Streams are
// deterministic per seed within one build; there is no cross-platform bit
// contract.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

  double standard_normal();
  Eigen::VectorXd standard_normal_vector(Eigen::Index dim);

  // Raw engine output, for integer sampling interleaved with normal draws.
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dpsched

#endif  // DPSCHED_RANDOM_HPP_
