#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace tsaug {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n);

// Z[k] = sum_n x[n] exp(-2 pi i k n / N). Power-of-two lengths take the
// radix-2 path, everything else the direct transform.
std::vector<Complex> dft(std::span<const double> x);
// x[n] = (1/N) sum_k Z[k] exp(+2 pi i k n / N).
std::vector<Complex> inverse_dft(std::span<const Complex> z);

// Iterative radix-2 transform; N must be a power of two.
std::vector<Complex> fft_radix2(std::span<const Complex> x, bool inverse);

// sum x[n]^2
double energy(std::span<const double> x);
// (1/N) sum |Z[k]|^2, equal to energy(x) for Z = dft(x).
double spectral_energy(std::span<const Complex> z);

namespace reference {

// Direct O(N^2) transforms, any length.
std::vector<Complex> dft(std::span<const Complex> x, bool inverse);

}  // namespace reference

}  // namespace tsaug
