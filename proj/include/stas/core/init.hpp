#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "stas/core/random.hpp"
#include "stas/core/tensor.hpp"

namespace stas {

// Uniform in +-sqrt(6 / (fan_in + fan_out)); trainable.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
// Trainable zeros of the given shape.
Tensor zero_param(Shape shape);

// 64-bit FNV-1a digest, used for config and architecture hashes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace stas
