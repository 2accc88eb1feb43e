#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rd {

// Counter-based seed splitter: one master seed fans out into independent
// per-component streams identified by (label, counter).
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t counter = 0) {
  uint64_t h = splitmix64(master);
  for (char c : label) h = splitmix64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
  return splitmix64(h ^ counter);
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view label, uint64_t counter = 0) {
  return std::mt19937_64(derive_seed(master, label, counter));
}

}  // namespace rd
