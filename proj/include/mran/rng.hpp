#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mran {

// Deterministic random stream. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); all distribution transforms are
// implemented here so that draws are bit-identical across standard library
// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1); never returns 0.
  double uniform_pos();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal (Box-Muller, one value per call).
  double normal();
  // Gamma(shape, 1), shape > 0 (Marsaglia-Tsang, with the shape<1 boost).
  double gamma(double shape);
  // Beta(a, b) via two gamma draws.
  double beta(double a, double b);
  // Uniform integer in [0, n).
  int uniform_int(int n);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<size_t>(j)]);
    }
  }

  // Random permutation of 0..n-1.
  std::vector<int> permutation(int n);

  // Derive an independent stream from this seed-space without consuming
  // state: mixes the salt into the construction seed. Intended for setting
  // up named sub-streams (data order, dropout, mixup, ...) from one
  // experiment seed.
  static uint64_t mix_seed(uint64_t seed, uint64_t salt);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mran
