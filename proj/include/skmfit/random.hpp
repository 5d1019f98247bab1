#pragma once

#include <cstdint>
#include <random>

namespace skmfit {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; decorrelates nearby integer seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` of a run keyed by `master`; a fixed offset of the master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + 0x632be59bd9b4e019ULL * (stream + 1));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream = 0) { return Rng(derive_seed(master, stream)); }

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  return (static_cast<double>(rng() >> 11) + 0.5) * scale;
}

}  // namespace skmfit
