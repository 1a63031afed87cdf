#ifndef COLLUSION_COMMON_H_
#define COLLUSION_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace collusion {

// Error categories. Every library failure is one of these.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedModel : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UndefinedBenchmark : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ProbeUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent streams from one seed.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  return MixSeed(MixSeed(a) ^ (b * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
  return MixSeed(MixSeed(a, b), c);
}

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) using rejection to avoid modulo bias.
inline int UniformIndex(Rng& rng, int n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = (~std::uint64_t{0} / range) * range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % range);
}

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

}  // namespace collusion

#endif  // COLLUSION_COMMON_H_
