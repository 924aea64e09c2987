#pragma once

#include <filesystem>
#include <iosfwd>

#include "tsaug/adam.hpp"

namespace tsaug {

// Binary checkpoint:
//   "TSRAUG1\n"
//   one header line per tensor: name \t dtype=f64 \t shape=d1xd2x...\n
//   "DATA\n"
//   little-endian IEEE-754 doubles of every tensor, in header order.
void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace tsaug
