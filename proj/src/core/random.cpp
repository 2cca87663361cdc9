#include "stas/core/random.hpp"

#include <sstream>

#include "stas/core/errors.hpp"

namespace stas {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::size_t Rng::categorical(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = uniform() * total;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (u < probs[k]) return k;
    u -= probs[k];
  }
  // Rounding can leave u marginally above the last bucket.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return k;
  }
  throw ValidationError("categorical: all probabilities are zero");
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& snapshot) {
  std::istringstream is(snapshot);
  is >> engine_;
  if (!is) throw FormatError("corrupt generator state");
}

}  // namespace stas
