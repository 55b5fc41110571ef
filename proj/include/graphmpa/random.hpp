#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace graphmpa {

/// Seeded generator whose derived draws (uniforms, bounded integers,
/// shuffles, normals) do not depend on the standard library's distribution
/// implementations, so seeded results are reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n);
  double normal();  // Box-Muller

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace graphmpa
