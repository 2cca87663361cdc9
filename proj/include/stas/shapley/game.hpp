#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stas/core/random.hpp"

namespace stas::shapley {

// Coalitions are bitmasks over players; bit j set means player j is in.
using Coalition = std::uint32_t;

inline constexpr std::size_t kMaxPlayers = 12;

// Coalitional game (v, N) given as a value table over all 2^N coalitions.
class CoalitionalGame {
 public:
  // Throws ValidationError unless values.size() == 2^players, players <=
  // kMaxPlayers and v(empty) == 0.
  CoalitionalGame(std::size_t players, std::vector<double> values);

  std::size_t players() const noexcept { return players_; }
  double value(Coalition c) const { return values_.at(c); }
  Coalition grand() const noexcept { return static_cast<Coalition>((1u << players_) - 1u); }
  const std::vector<double>& table() const noexcept { return values_; }

 private:
  std::size_t players_;
  std::vector<double> values_;
};

// v(C u {i}) - v(C). Throws ContractError when i is already in C.
double marginal(const CoalitionalGame& game, std::size_t player, Coalition coalition);

// Weighted subset sum with weights |C|! (N - |C| - 1)! / N!.
double exact_shapley(const CoalitionalGame& game, std::size_t player);

// Mean marginal contribution over all N! join orders. Exponential in N;
// intended as the independent route for N <= 8.
double shapley_by_permutations(const CoalitionalGame& game, std::size_t player);

std::vector<double> shapley_values(const CoalitionalGame& game);

// Probability that a uniformly random permutation of `players` places
// exactly coalition C before `player`; indexed by coalition bitmask. Entries
// for coalitions containing `player` are 0.
std::vector<double> permutation_prefix_distribution(std::size_t players, std::size_t player);

// Values i.i.d. uniform in [-1, 1] with v(empty) = 0. With `monotone`, the
// table is replaced by its monotone closure v(S) = max over subsets.
CoalitionalGame random_game(std::size_t players, Rng& rng, bool monotone = false);

}  // namespace stas::shapley
