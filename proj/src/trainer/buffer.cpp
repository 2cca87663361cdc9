#include "stas/trainer/buffer.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/serialize.hpp"
#include "stas/envs/trajectory_io.hpp"

namespace stas::trainer {

ExperienceBuffer::ExperienceBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("trainer.buffer_capacity", "must be at least 1");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ExperienceBuffer::push(const envs::EpisodeRecord& episode) {
  envs::EpisodeRecord copy{episode.trajectory.without_diagnostics(), episode.log_probs};
  if (items_.size() < capacity_) {
    items_.push_back(std::move(copy));
  } else {
    items_[head_] = std::move(copy);
    head_ = (head_ + 1) % capacity_;
  }
  ++insertions_;
}

const envs::EpisodeRecord& ExperienceBuffer::at(std::size_t k) const {
  if (k >= items_.size()) throw ContractError("experience buffer: index out of range");
  return items_[(head_ + k) % items_.size()];
}

std::vector<const envs::EpisodeRecord*> ExperienceBuffer::latest(std::size_t n) const {
  n = std::min(n, items_.size());
  std::vector<const envs::EpisodeRecord*> out;
  for (std::size_t k = items_.size() - n; k < items_.size(); ++k) out.push_back(&at(k));
  return out;
}

std::vector<const envs::EpisodeRecord*> ExperienceBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  n = std::min(n, idx.size());
  // Partial Fisher-Yates.
  for (std::size_t a = 0; a < n; ++a) std::swap(idx[a], idx[a + rng.uniform_int(idx.size() - a)]);
  std::vector<const envs::EpisodeRecord*> out;
  for (std::size_t a = 0; a < n; ++a) out.push_back(&at(idx[a]));
  return out;
}

void ExperienceBuffer::save(BinaryWriter& out) const {
  out.u64(capacity_);
  out.u64(insertions_);
  out.u64(items_.size());
  for (std::size_t k = 0; k < items_.size(); ++k) {
    std::ostringstream text;
    envs::write_trajectory(text, at(k).trajectory);
    out.str(text.str());
    out.f64s(at(k).log_probs);
  }
}

void ExperienceBuffer::load(BinaryReader& in) {
  capacity_ = in.u64();
  insertions_ = in.u64();
  const std::uint64_t n = in.u64();
  if (n > capacity_) throw FormatError("experience buffer: more entries than capacity");
  items_.clear();
  head_ = 0;
  for (std::uint64_t k = 0; k < n; ++k) {
    std::istringstream text(in.str());
    auto tr = envs::read_trajectory(text);
    if (!tr) throw FormatError("experience buffer: missing trajectory");
    items_.push_back({std::move(*tr), in.f64s()});
  }
}

}  // namespace stas::trainer
