#pragma once

#include <cstdint>
#include <vector>

#include "cgvae/tensor.hpp"

namespace cgvae {

/// Counter-based splittable generator (splitmix64 core).
///
/// Same seed + same call sequence gives the same stream. split(label)
/// derives a child stream from the construction seed and the label only,
/// so children are independent of the parent's draw position and of each
/// other's creation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  Rng split(std::uint64_t label) const {
    return Rng(mix(seed_ ^ (0x9E3779B97F4A7C15ULL * (label + 1))));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform on the open interval (0,1); endpoints excluded so that
  /// log(-log(u)) stays finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  /// Standard Gumbel by inversion of the uniform stream.
  double gumbel() { return -std::log(-std::log(uniform())); }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Tensor uniform_tensor(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform();
    return t;
  }

  Tensor gumbel_tensor(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gumbel();
    return t;
  }

  Tensor gaussian_tensor(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gaussian();
    return t;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace cgvae
