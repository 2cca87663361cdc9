#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stas/core/random.hpp"
#include "stas/envs/episode.hpp"

namespace stas {
class BinaryReader;
class BinaryWriter;
}  // namespace stas

namespace stas::trainer {

// Fixed-capacity ring of episodes; the oldest entry is evicted first.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(std::size_t capacity = 1000);

  // Stores a learner-facing copy (per-step rewards stripped).
  void push(const envs::EpisodeRecord& episode);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }
  // Total insertions, evicted ones included.
  std::uint64_t insertions() const noexcept { return insertions_; }

  // k = 0 is the oldest held episode.
  const envs::EpisodeRecord& at(std::size_t k) const;
  double stored_return(std::size_t k) const { return at(k).trajectory.episodic_return; }

  // The n most recent episodes, oldest first.
  std::vector<const envs::EpisodeRecord*> latest(std::size_t n) const;
  // n distinct episodes drawn uniformly (all of them when n >= size).
  std::vector<const envs::EpisodeRecord*> sample(std::size_t n, Rng& rng) const;

  void save(BinaryWriter& out) const;
  void load(BinaryReader& in);

 private:
  std::size_t capacity_;
  std::vector<envs::EpisodeRecord> items_;
  std::size_t head_ = 0;  // slot of the oldest entry once full
  std::uint64_t insertions_ = 0;
};

}  // namespace stas::trainer
