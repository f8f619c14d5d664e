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

#include "cohortfl/rng.h"

#include <cmath>
#include <numbers>

namespace cohortfl {

namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

uint64_t splitmix64(uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fold_in(uint64_t key, uint64_t tag) {
  return splitmix64(key ^ (tag * kGolden + 0x632be59bd9b4e019ULL));
}

Rng::Rng(uint64_t seed) {
  // splitmix expansion; all-zero xoshiro state is impossible this way.
  uint64_t x = seed;
  for (auto& w : s_) {
    x = splitmix64(x);
    w = x;
  }
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform01_open_low() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

uint64_t Rng::below(uint64_t n) {
  // Lemire-style rejection: draw until the value falls in the largest
  // multiple of n.
  const uint64_t limit = n * ((~uint64_t{0}) / n);
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01_open_low();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  // Partial Fisher-Yates over an index vector; O(n) setup is fine at the
  // population sizes used here.
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::vector<size_t> out;
  out.reserve(k);
  for (size_t i = 0; i < k && i < n; ++i) {
    size_t j = i + static_cast<size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
    out.push_back(idx[i]);
  }
  return out;
}

Rng make_stream(uint64_t root, StreamKind kind, uint64_t round, uint64_t cohort,
                uint64_t client) {
  uint64_t key = splitmix64(root);
  key = fold_in(key, static_cast<uint64_t>(kind));
  key = fold_in(key, round);
  key = fold_in(key, cohort);
  key = fold_in(key, client);
  return Rng(key);
}

}  // namespace cohortfl
