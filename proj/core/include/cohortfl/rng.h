// Copyright 2026 The cohortfl Authors
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

#ifndef COHORTFL_RNG_H_
#define COHORTFL_RNG_H_

#include <cstdint>
#include <vector>

namespace cohortfl {

// Deterministic, stateless stream derivation. Every random decision in a run
// is drawn from a stream keyed by (root seed, purpose, round, cohort, client)
// so that resuming from a checkpoint or skipping a cohort's round consumes
// exactly the same draws as a straight-through run. std::random engines and
// distributions are avoided on purpose: their outputs are not pinned across
// standard library implementations, and run outputs here must be stable.

uint64_t splitmix64(uint64_t x);

// Mixes one tag into a key. Composition is order-sensitive.
uint64_t fold_in(uint64_t key, uint64_t tag);

// Stream purposes. Values are part of the serialized-run contract: changing
// them silently changes every trajectory.
enum class StreamKind : uint64_t {
  kSynthData = 1,
  kPartitionCohorts = 2,
  kPartitionClients = 3,
  kTrainTestSplit = 4,
  kParamInit = 5,
  kClientSampling = 6,
  kMinibatch = 7,
  kDpNoise = 8,
};

// xoshiro256++ with splitmix64 state expansion. Normal deviates via
// Box-Muller on 53-bit uniforms; the spare deviate is cached per stream.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  // Uniform on (0, 1]; safe as a log() argument.
  double uniform01_open_low();
  // Integer uniform on [0, n), n > 0. Rejection sampling, no modulo bias.
  uint64_t below(uint64_t n);
  double normal();

  // Fisher-Yates in-place shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Sample k distinct indices from [0, n) in selection order.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

 private:
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives the engine for one purpose-scoped stream. Unused tags default to 0;
// keying must stay identical across algorithms so that algorithm variants
// that take the same actions consume the same draws.
Rng make_stream(uint64_t root, StreamKind kind, uint64_t round = 0,
                uint64_t cohort = 0, uint64_t client = 0);

}  // namespace cohortfl

#endif  // COHORTFL_RNG_H_
