#pragma once

#include <cstdint>

#include "tsaug/rng.hpp"
#include "tsaug/tensor.hpp"

namespace tsaug {

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)).
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);
Tensor filled(Shape shape, double value);

// Store a 64-bit integer exactly as two 32-bit halves in a [2] tensor.
Tensor pack_u64(std::uint64_t v);
std::uint64_t unpack_u64(const Tensor& t);

}  // namespace tsaug
