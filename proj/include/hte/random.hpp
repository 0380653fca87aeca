/*
 * Copyright 2026 The hte Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef HTE_RANDOM_HPP_
#define HTE_RANDOM_HPP_

#include <array>
#include <cstdint>
#include <limits>

namespace hte {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The 64-bit
// seed is the key; the upper half of the 128-bit counter selects a substream
// and the lower half counts blocks within it. Output for a given
// (seed, stream) is fixed forever; changing it is a breaking change.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept;
};

// Mixes several 64-bit words into one seed (splitmix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0) noexcept;

// A deterministic random stream. Satisfies UniformRandomBitGenerator so it
// can drive std::shuffle etc., though the samplers below are preferred
// because standard distributions are not reproducible across libraries.
class RandomStream {
 public:
  using result_type = std::uint32_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept { return next_u32(); }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform on the open interval (0, 1).
  double uniform_open() noexcept;
  // Unbiased integer in [0, n); n must be nonzero.
  std::uint64_t below(std::uint64_t n) noexcept;

  double normal() noexcept;
  double gamma(double shape, double scale) noexcept;
  std::uint64_t poisson(double mean) noexcept;
  // Gamma-Poisson mixture: E = mean, Var = mean + dispersion * mean^2.
  std::uint64_t negative_binomial(double mean, double dispersion) noexcept;

 private:
  void refill() noexcept;

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

}  // namespace hte

#endif  // HTE_RANDOM_HPP_
