#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace swarmdet {

// splitmix64 finalizer; decorrelates derived stream seeds.
inline std::uint64_t hash_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent child seed for (base, stream). Streams indexed by small
// integers or by hashed tags; collisions across distinct tags are not a
// concern at the scales used here.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return hash_mix(base ^ hash_mix(stream + 0x51700f6bcb833e75ULL));
}

inline std::uint64_t tag_seed(std::uint64_t base, const char* tag, std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = tag; *p; ++p) h = (h ^ static_cast<unsigned char>(*p)) * 0x100000001b3ULL;
  return derive_seed(derive_seed(base, h), index);
}

// mt19937_64 with hand-rolled output transforms. The engine itself is
// bit-exact across platforms; the std:: distributions are not, so uniform
// and normal draws are implemented here to keep runs reproducible anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // {0, ..., n-1}; n must be positive.
  int uniform_int(int n) {
    int v = static_cast<int>(uniform() * n);
    return v < n ? v : n - 1;
  }

  // Standard normal via Box-Muller, spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Eigen::Vector3d normal3() {
    double a = normal(), b = normal(), c = normal();
    return {a, b, c};
  }

  // Uniform direction on the unit sphere.
  Eigen::Vector3d unit3() {
    while (true) {
      Eigen::Vector3d v = normal3();
      double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace swarmdet
