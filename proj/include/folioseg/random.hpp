#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace folioseg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the same (master, counters...) always
/// yields the same seed, independent of the order jobs are scheduled in.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t s = splitmix64(master);
  for (auto c : counters) s = splitmix64(s ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return s;
}

/// mt19937_64 with distributions written out explicitly; the standard
/// library's distributions are implementation-defined and would make
/// results differ between toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), rejection-sampled to avoid bias.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % bound);
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return v % bound;
  }

  int range(int lo, int hi_inclusive) {
    return lo + int(below(std::uint64_t(hi_inclusive - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[size_t(below(i))]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace folioseg
