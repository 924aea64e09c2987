#include "tsaug/dft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tsaug {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace reference {

std::vector<Complex> dft(std::span<const Complex> x, bool inverse) {
  const std::size_t N = x.size();
  std::vector<Complex> twiddle(N);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t j = 0; j < N; ++j) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(N);
    twiddle[j] = {std::cos(angle), std::sin(angle)};
  }
  std::vector<Complex> out(N);
  for (std::size_t k = 0; k < N; ++k) {
    Complex acc = 0.0;
    // (k * n) mod N keeps the twiddle table exact for large indices.
    for (std::size_t n = 0, j = 0; n < N; ++n, j = (j + k) % N) acc += x[n] * twiddle[j];
    out[k] = inverse ? acc / static_cast<double>(N) : acc;
  }
  return out;
}

}  // namespace reference

std::vector<Complex> fft_radix2(std::span<const Complex> x, bool inverse) {
  const std::size_t N = x.size();
  if (!is_power_of_two(N)) throw std::invalid_argument("fft_radix2: length must be a power of two");
  std::vector<Complex> a(x.begin(), x.end());
  for (std::size_t i = 1, j = 0; i < N; ++i) {
    std::size_t bit = N >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= N; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < N; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        // Twiddles from the angle directly, no recurrence drift.
        const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len);
        const Complex w{std::cos(angle), std::sin(angle)};
        const Complex u = a[start + j];
        const Complex v = a[start + j + half] * w;
        a[start + j] = u + v;
        a[start + j + half] = u - v;
      }
    }
  }
  if (inverse)
    for (Complex& c : a) c /= static_cast<double>(N);
  return a;
}

std::vector<Complex> dft(std::span<const double> x) {
  const std::vector<Complex> c(x.begin(), x.end());
  return is_power_of_two(c.size()) ? fft_radix2(c, false) : reference::dft(c, false);
}

std::vector<Complex> inverse_dft(std::span<const Complex> z) {
  return is_power_of_two(z.size()) ? fft_radix2(z, true) : reference::dft(z, true);
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double spectral_energy(std::span<const Complex> z) {
  double e = 0.0;
  for (const Complex& c : z) e += std::norm(c);
  return z.empty() ? 0.0 : e / static_cast<double>(z.size());
}

}  // namespace tsaug
