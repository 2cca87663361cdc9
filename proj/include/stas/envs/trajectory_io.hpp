#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stas/envs/types.hpp"

namespace stas::envs {

// Line-delimited text records; doubles are written as hex floats so a
// round trip is bit-exact. Several trajectories may share one stream.
//
//   stas-trajectory 1
//   scenario alice_bob
//   agents 2
//   steps 17
//   state_dim 4
//   action_count 4
//   seed 7
//   config_hash 0123456789abcdef
//   return <hex>
//   success 1
//   s <t> <hex> ...       (agents * state_dim values)
//   a <t> <int> ...       (agents values)
//   r <t> <hex>           (diagnostics only)
//   end
void write_trajectory(std::ostream& out, const Trajectory& trajectory);
// Returns nullopt at a clean end of stream; throws FormatError otherwise.
std::optional<Trajectory> read_trajectory(std::istream& in);

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace stas::envs
