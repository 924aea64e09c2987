#pragma once

// Dense numeric kernels behind the autodiff ops. The parallel versions split
// work over output columns only, so every output element is reduced in the
// same order whatever the thread count or the batch extent; results are
// bit-identical across runs and across batch partitionings. The `reference`
// namespace holds plain serial loops used as test oracles and as the
// benchmark baseline.

#include <cstddef>
#include <span>

namespace tsaug::kernels {

enum class Trans : bool { no = false, yes = true };

// c[m x n] = op(a)[m x k] * op(b)[k x n]  (+ c when accumulate).
// Row-major storage; op(a) = a when ta == no (a is m x k with leading
// dimension lda), a^T otherwise (a is k x m).
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double* c, std::size_t ldc, bool accumulate);

struct Conv1dShape {
  std::size_t batch;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t length;
  std::size_t width;  // odd; zero padding (width - 1) / 2 on both sides

  std::size_t pad() const { return (width - 1) / 2; }
};

// x [batch, cin, T], w [cout, cin, width], bias [cout] -> out [batch, cout, T]
void conv1d_forward(const Conv1dShape& s, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> out);

// Gradients are accumulated into gx / gw / gbias; pass an empty span to skip
// one. gout has the layout of the forward output.
void conv1d_backward(const Conv1dShape& s, std::span<const double> x,
                     std::span<const double> w, std::span<const double> gout,
                     std::span<double> gx, std::span<double> gw,
                     std::span<double> gbias);

namespace reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double* c, std::size_t ldc, bool accumulate);

void conv1d_forward(const Conv1dShape& s, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> out);

void conv1d_backward(const Conv1dShape& s, std::span<const double> x,
                     std::span<const double> w, std::span<const double> gout,
                     std::span<double> gx, std::span<double> gw,
                     std::span<double> gbias);

}  // namespace reference
}  // namespace tsaug::kernels
