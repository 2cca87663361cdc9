#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace stas {

// Mixes a run seed with a stream id so independent consumers (environment,
// policy sampling, coalition masks) draw from decorrelated generators.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Integer in [0, n).
  std::size_t uniform_int(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  // Index drawn with probability proportional to probs[k].
  std::size_t categorical(std::span<const double> probs);

  std::mt19937_64& engine() noexcept { return engine_; }

  // Text snapshot of the generator state, restorable bit for bit.
  std::string state() const;
  void set_state(const std::string& snapshot);

 private:
  std::mt19937_64 engine_;
};

}  // namespace stas
