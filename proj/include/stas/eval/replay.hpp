#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stas/envs/types.hpp"
#include "stas/trainer/trainer.hpp"

namespace stas::eval {

struct ReplayOptions {
  // Coalition samples per credit; 0 takes the checkpoint's k_samples.
  std::size_t k_samples = 0;
  std::uint64_t seed = 0;
};

// Credit table (episode,t,agent,credit) of logged trajectories under the
// checkpointed decomposer, preceded by the config-hash comment. Throws
// ValidationError when a trajectory's scenario or shape does not match.
void replay_credits(const trainer::Trainer& trainer, const std::vector<envs::Trajectory>& trajectories,
                    const ReplayOptions& options, std::ostream& out);

// The newest n episodes of the checkpoint's experience buffer.
std::vector<envs::Trajectory> buffered_trajectories(const trainer::Trainer& trainer, std::size_t n);

}  // namespace stas::eval
