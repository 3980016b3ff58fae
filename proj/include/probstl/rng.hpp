#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace probstl {

// Source of randomness used by every sampler.  The interface is small on
// purpose: tests substitute rigged sources to pin down exact control flow
// (e.g. to count draws or force a particular ellipse angle).
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  // Uniform on [0, 1).
  virtual double uniform01() = 0;
  // Standard normal draw.
  virtual double normal01() = 0;

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal01();
    return out;
  }
};

class Mt19937Source final : public RandomSource {
 public:
  explicit Mt19937Source(std::uint64_t seed) : engine_(seed) {}

  double uniform01() override {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double normal01() override { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// SplitMix64 step; used to derive independent sub-stream seeds from a master
// seed so that parallel workers are deterministic regardless of scheduling.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// 53 fresh bits from the source, stirred once.  Sub-stream seeds are drawn
// up front through this so the worker count cannot affect results.
inline std::uint64_t draw_seed(RandomSource& rng) {
  auto bits = static_cast<std::uint64_t>(std::ldexp(rng.uniform01(), 53));
  return split_seed(bits, 0x53454544u);
}

}  // namespace probstl
