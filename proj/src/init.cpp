#include "tsaug/init.hpp"

#include <cmath>
#include <stdexcept>

namespace tsaug {

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = value;
  return t;
}

Tensor pack_u64(std::uint64_t v) {
  return Tensor({2}, {static_cast<double>(v >> 32), static_cast<double>(v & 0xffffffffULL)});
}

std::uint64_t unpack_u64(const Tensor& t) {
  if (t.size() != 2) throw std::invalid_argument("packed u64 tensor must have 2 elements");
  return (static_cast<std::uint64_t>(t[0]) << 32) | static_cast<std::uint64_t>(t[1]);
}

}  // namespace tsaug
