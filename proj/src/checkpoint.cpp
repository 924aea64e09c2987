#include "tsaug/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tsaug {
namespace {

constexpr char kMagic[] = "TSRAUG1\n";

void put_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(buf, 8);
}

double get_le(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("checkpoint: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('x', pos), text.size());
    std::size_t d = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, d);
    if (ec != std::errc{} || ptr != text.data() + end || d == 0)
      throw std::runtime_error("checkpoint: bad shape '" + text + "'");
    shape.push_back(d);
    pos = end + 1;
  }
  return shape;
}

}  // namespace

void write_checkpoint(std::ostream& out, const NamedTensors& tensors) {
  out.write(kMagic, sizeof(kMagic) - 1);
  for (std::size_t i = 0; i < tensors.size(); ++i)
    out << tensors.name(i) << "\tdtype=f64\tshape=" << shape_string(tensors.tensor(i).shape()) << '\n';
  out << "DATA\n";
  for (std::size_t i = 0; i < tensors.size(); ++i)
    for (double v : tensors.tensor(i).data()) put_le(out, v);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

NamedTensors read_checkpoint(std::istream& in) {
  char magic[sizeof(kMagic) - 1];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  std::vector<std::pair<std::string, Shape>> header;
  std::string line;
  while (true) {
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing DATA marker");
    if (line == "DATA") break;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("checkpoint: malformed header line '" + line + "'");
    if (line.compare(t1 + 1, t2 - t1 - 1, "dtype=f64") != 0)
      throw std::runtime_error("checkpoint: unsupported dtype in '" + line + "'");
    if (line.compare(t2 + 1, 6, "shape=") != 0)
      throw std::runtime_error("checkpoint: missing shape in '" + line + "'");
    header.emplace_back(line.substr(0, t1), parse_shape(line.substr(t2 + 7)));
  }
  NamedTensors tensors;
  for (auto& [name, shape] : header) {
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = get_le(in);
    tensors.add(name, Tensor(shape, std::move(data)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, tensors);
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace tsaug
