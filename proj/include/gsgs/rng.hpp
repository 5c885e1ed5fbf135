#pragma once

#include "gsgs/operators.hpp"

#include <cstdint>
#include <random>

namespace gsgs {

// Seeded source shared by every sampler in the library.
//
// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
// standard. Uniforms are (k + 0.5) * 2^-53 with k the top 53 bits of one draw,
// normals use the Marsaglia polar method (pairs, the second cached) and Gamma
// variates use Marsaglia-Tsang with the u^(1/shape) boost for shape < 1. None
// of the std::*_distribution adaptors are used, so a seed reproduces the same
// stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  // Number of 64-bit words consumed so far.
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64();
  double uniform();  // open interval (0, 1)
  double normal();
  double gamma(double shape, double scale);

  // Independent stream derived from (seed, stream) only; the parent is not
  // advanced.
  Rng child(std::uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Vector standard_normal_vector(Rng& rng, Index n);

// Gamma(shape, scale) with mean shape * scale.
double gamma_draw(Rng& rng, double shape, double scale);

}  // namespace gsgs
