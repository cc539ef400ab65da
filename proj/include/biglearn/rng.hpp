// biglearn/rng.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef BIGLEARN_RNG_HPP_
#define BIGLEARN_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace biglearn {

using Rng = std::mt19937_64;

// Stream tags so that every consumer of randomness in an experiment owns an
// independent stream derived from (master seed, tag, ...).
enum class RngStream : std::uint64_t {
  kData = 1,
  kTrain = 2,
  kKl = 3,
  kSplit = 4,
  kSubsample = 5,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministically derives an RNG from a list of 64-bit keys.
inline Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = 0x0ddc0ffeebadf00dULL;
  std::uint64_t mixed = detail::splitmix64(state);
  for (std::uint64_t k : keys) {
    state ^= k + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2);
    mixed = detail::splitmix64(state);
  }
  return Rng(mixed);
}

inline Rng make_rng(std::uint64_t seed, RngStream stream, std::uint64_t salt = 0) {
  return make_rng({seed, static_cast<std::uint64_t>(stream), salt});
}

}  // namespace biglearn

#endif  // BIGLEARN_RNG_HPP_
