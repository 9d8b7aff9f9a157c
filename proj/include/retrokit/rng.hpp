#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace retro {

// SplitMix64. Used everywhere a seedable stream is needed so that runs are
// reproducible across platforms (std distributions are not bit-stable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t x = (state_ += 0x9e3779b97f4a7c15ULL);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // uniform in [0, n), n > 0
  uint64_t below(uint64_t n) { return next() % n; }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // uniform in [0, 1)
  double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  double normal() {
    // Box-Muller, one value per call
    double u1 = real(), u2 = real();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  bool chance(double p) { return real() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // derives an independent stream, e.g. per item of a parallel loop
  Rng fork(uint64_t salt) {
    uint64_t s = state_ ^ (salt * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL);
    Rng r(s);
    r.next();
    return r;
  }

 private:
  uint64_t state_;
};

// stable 64-bit content hash (FNV-1a)
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace retro
