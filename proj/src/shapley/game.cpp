#include "stas/shapley/game.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "stas/core/errors.hpp"

namespace stas::shapley {

namespace {

double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t k = 2; k <= n; ++k) f *= static_cast<double>(k);
  return f;
}

void check_player(const CoalitionalGame& game, std::size_t player) {
  if (player >= game.players()) {
    throw ContractError("player " + std::to_string(player) + " outside a game of " +
                        std::to_string(game.players()));
  }
}

}  // namespace

CoalitionalGame::CoalitionalGame(std::size_t players, std::vector<double> values)
    : players_(players), values_(std::move(values)) {
  if (players == 0 || players > kMaxPlayers) {
    throw ValidationError("coalitional game needs 1.." + std::to_string(kMaxPlayers) + " players");
  }
  if (values_.size() != (std::size_t{1} << players)) {
    throw ValidationError("value table must have 2^N entries");
  }
  if (values_[0] != 0.0) throw ValidationError("v(empty coalition) must be 0");
}

double marginal(const CoalitionalGame& game, std::size_t player, Coalition coalition) {
  check_player(game, player);
  const Coalition bit = Coalition{1} << player;
  if (coalition & bit) throw ContractError("player already belongs to the coalition");
  return game.value(coalition | bit) - game.value(coalition);
}

double exact_shapley(const CoalitionalGame& game, std::size_t player) {
  check_player(game, player);
  const std::size_t n = game.players();
  const Coalition bit = Coalition{1} << player;
  const double nf = factorial(n);
  double phi = 0.0;
  for (Coalition c = 0; c <= game.grand(); ++c) {
    if (c & bit) continue;
    const std::size_t k = static_cast<std::size_t>(std::popcount(c));
    const double w = factorial(k) * factorial(n - k - 1) / nf;
    phi += w * marginal(game, player, c);
  }
  return phi;
}

double shapley_by_permutations(const CoalitionalGame& game, std::size_t player) {
  check_player(game, player);
  std::vector<std::size_t> order(game.players());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  std::size_t count = 0;
  do {
    Coalition before = 0;
    for (std::size_t j : order) {
      if (j == player) break;
      before |= Coalition{1} << j;
    }
    total += marginal(game, player, before);
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return total / static_cast<double>(count);
}

std::vector<double> shapley_values(const CoalitionalGame& game) {
  std::vector<double> phi(game.players());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = exact_shapley(game, i);
  return phi;
}

std::vector<double> permutation_prefix_distribution(std::size_t players, std::size_t player) {
  if (players == 0 || players > kMaxPlayers) throw ContractError("player count out of range");
  if (player >= players) throw ContractError("player index out of range");
  // |C|! orders of the predecessors times (N - |C| - 1)! orders of the rest,
  // out of N! permutations.
  const double nf = factorial(players);
  const Coalition bit = Coalition{1} << player;
  std::vector<double> p(std::size_t{1} << players, 0.0);
  for (Coalition c = 0; c < p.size(); ++c) {
    if (c & bit) continue;
    const std::size_t k = static_cast<std::size_t>(std::popcount(c));
    p[c] = factorial(k) * factorial(players - k - 1) / nf;
  }
  return p;
}

CoalitionalGame random_game(std::size_t players, Rng& rng, bool monotone) {
  std::vector<double> v(std::size_t{1} << players);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  v[0] = 0.0;
  if (monotone) {
    for (Coalition c = 1; c < v.size(); ++c) {
      for (std::size_t j = 0; j < players; ++j) {
        const Coalition bit = Coalition{1} << j;
        if (c & bit) v[c] = std::max(v[c], v[c & ~bit]);
      }
    }
  }
  return CoalitionalGame(players, std::move(v));
}

}  // namespace stas::shapley
