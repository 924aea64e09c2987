#include "tsaug/kernels.hpp"

#include <algorithm>
#include <vector>

namespace tsaug::kernels {
namespace {

constexpr std::size_t kMR = 8;
constexpr std::size_t kNR = 16;
constexpr std::size_t kKC = 256;
constexpr std::size_t kNC = 2048;

std::size_t round_up(std::size_t v, std::size_t to) { return (v + to - 1) / to * to; }

double elem(const double* p, std::size_t ld, Trans t, std::size_t row, std::size_t col) {
  return t == Trans::no ? p[row * ld + col] : p[col * ld + row];
}

// Packs rows [0, m) x depth [pc, pc + kc) of op(a) into MR-row slivers,
// zero-padding the last sliver.
void pack_a(Trans ta, const double* a, std::size_t lda, std::size_t m, std::size_t pc,
            std::size_t kc, double* dst) {
  const std::size_t panels = round_up(m, kMR) / kMR;
#pragma omp parallel for schedule(static) if (panels > 4)
  for (std::size_t ip = 0; ip < panels; ++ip) {
    double* out = dst + ip * kMR * kc;
    const std::size_t i0 = ip * kMR;
    const std::size_t mr = std::min(kMR, m - i0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t i = 0; i < mr; ++i) out[p * kMR + i] = elem(a, lda, ta, i0 + i, pc + p);
      for (std::size_t i = mr; i < kMR; ++i) out[p * kMR + i] = 0.0;
    }
  }
}

void pack_b(Trans tb, const double* b, std::size_t ldb, std::size_t jc, std::size_t nc,
            std::size_t pc, std::size_t kc, double* dst) {
  const std::size_t panels = round_up(nc, kNR) / kNR;
#pragma omp parallel for schedule(static) if (panels > 4)
  for (std::size_t jp = 0; jp < panels; ++jp) {
    double* out = dst + jp * kNR * kc;
    const std::size_t j0 = jp * kNR;
    const std::size_t nr = std::min(kNR, nc - j0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t j = 0; j < nr; ++j) out[p * kNR + j] = elem(b, ldb, tb, pc + p, jc + j0 + j);
      for (std::size_t j = nr; j < kNR; ++j) out[p * kNR + j] = 0.0;
    }
  }
}

void micro_kernel(std::size_t kc, const double* __restrict a, const double* __restrict b,
                  double* __restrict c, std::size_t ldc, std::size_t mr, std::size_t nr,
                  bool overwrite) {
  double acc[kMR][kNR] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const double* ap = a + p * kMR;
    const double* bp = b + p * kNR;
    for (std::size_t i = 0; i < kMR; ++i) {
#pragma omp simd
      for (std::size_t j = 0; j < kNR; ++j) acc[i][j] += ap[i] * bp[j];
    }
  }
  for (std::size_t i = 0; i < mr; ++i) {
    double* row = c + i * ldc;
    if (overwrite) {
      for (std::size_t j = 0; j < nr; ++j) row[j] = acc[i][j];
    } else {
      for (std::size_t j = 0; j < nr; ++j) row[j] += acc[i][j];
    }
  }
}

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
          bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate)
      for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0);
    return;
  }
  std::vector<double> apack(round_up(m, kMR) * std::min(k, kKC));
  std::vector<double> bpack(round_up(std::min(n, kNC), kNR) * std::min(k, kKC));

  for (std::size_t jc = 0; jc < n; jc += kNC) {
    const std::size_t nc = std::min(kNC, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKC) {
      const std::size_t kc = std::min(kKC, k - pc);
      const bool overwrite = !accumulate && pc == 0;
      pack_b(tb, b, ldb, jc, nc, pc, kc, bpack.data());
      pack_a(ta, a, lda, m, pc, kc, apack.data());
      const std::size_t col_panels = round_up(nc, kNR) / kNR;
      const std::size_t row_panels = round_up(m, kMR) / kMR;
#pragma omp parallel for schedule(static) if (col_panels > 1 && m * nc * kc > 32768)
      for (std::size_t jp = 0; jp < col_panels; ++jp) {
        const std::size_t j0 = jp * kNR;
        const std::size_t nr = std::min(kNR, nc - j0);
        for (std::size_t ip = 0; ip < row_panels; ++ip) {
          const std::size_t i0 = ip * kMR;
          micro_kernel(kc, apack.data() + ip * kMR * kc, bpack.data() + jp * kNR * kc,
                       c + i0 * ldc + jc + j0, ldc, std::min(kMR, m - i0), nr, overwrite);
        }
      }
    }
  }
}

namespace {

// Batches per im2col chunk: about kNC columns.
std::size_t chunk_batches(const Conv1dShape& s) {
  return std::max<std::size_t>(1, kNC / std::max<std::size_t>(1, s.length));
}

// cols[(ci * width + j), sb * T + t] = x[b0 + sb, ci, t + j - pad]
void im2col(const Conv1dShape& s, std::span<const double> x, std::size_t b0, std::size_t nb,
            std::vector<double>& cols) {
  const std::size_t T = s.length, W = s.width, pad = s.pad();
  const std::size_t ncols = nb * T;
  cols.assign(s.in_channels * W * ncols, 0.0);
  const std::size_t rows = s.in_channels * W;
#pragma omp parallel for schedule(static) if (rows * ncols > 65536)
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t ci = r / W, j = r % W;
    double* out = cols.data() + r * ncols;
    for (std::size_t sb = 0; sb < nb; ++sb) {
      const double* xr = x.data() + ((b0 + sb) * s.in_channels + ci) * T;
      double* o = out + sb * T;
      // source index t + j - pad must lie in [0, T)
      const std::size_t t_lo = j < pad ? pad - j : 0;
      const std::size_t t_hi = T + pad > j ? std::min(T, T + pad - j) : 0;
      for (std::size_t t = t_lo; t < t_hi; ++t) o[t] = xr[t + j - pad];
    }
  }
}

}  // namespace

void conv1d_forward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t T = s.length, K = s.in_channels * s.width, cout = s.out_channels;
  const std::size_t step = chunk_batches(s);
  std::vector<double> cols, prod;
  for (std::size_t b0 = 0; b0 < s.batch; b0 += step) {
    const std::size_t nb = std::min(step, s.batch - b0);
    const std::size_t ncols = nb * T;
    im2col(s, x, b0, nb, cols);
    prod.resize(cout * ncols);
    gemm(Trans::no, Trans::no, cout, ncols, K, w.data(), K, cols.data(), ncols, prod.data(),
         ncols, false);
#pragma omp parallel for schedule(static) if (nb > 1)
    for (std::size_t sb = 0; sb < nb; ++sb) {
      for (std::size_t co = 0; co < cout; ++co) {
        const double* src = prod.data() + co * ncols + sb * T;
        double* dst = out.data() + ((b0 + sb) * cout + co) * T;
        const double bv = bias.empty() ? 0.0 : bias[co];
        for (std::size_t t = 0; t < T; ++t) dst[t] = src[t] + bv;
      }
    }
  }
}

void conv1d_backward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> gout, std::span<double> gx, std::span<double> gw,
                     std::span<double> gbias) {
  const std::size_t T = s.length, W = s.width, pad = s.pad();
  const std::size_t cin = s.in_channels, cout = s.out_channels, K = cin * W;

  if (!gbias.empty()) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0.0;
      for (std::size_t b = 0; b < s.batch; ++b) {
        const double* g = gout.data() + (b * cout + co) * T;
        for (std::size_t t = 0; t < T; ++t) acc += g[t];
      }
      gbias[co] += acc;
    }
  }
  if (gx.empty() && gw.empty()) return;

  const std::size_t step = chunk_batches(s);
  std::vector<double> cols, gmat, dcols;
  for (std::size_t b0 = 0; b0 < s.batch; b0 += step) {
    const std::size_t nb = std::min(step, s.batch - b0);
    const std::size_t ncols = nb * T;
    // gout chunk as [cout, nb * T]
    gmat.resize(cout * ncols);
    for (std::size_t sb = 0; sb < nb; ++sb)
      for (std::size_t co = 0; co < cout; ++co)
        std::copy_n(gout.data() + ((b0 + sb) * cout + co) * T, T,
                    gmat.data() + co * ncols + sb * T);

    if (!gw.empty()) {
      im2col(s, x, b0, nb, cols);
      gemm(Trans::no, Trans::yes, cout, K, ncols, gmat.data(), ncols, cols.data(), ncols,
           gw.data(), K, true);
    }
    if (!gx.empty()) {
      dcols.resize(K * ncols);
      gemm(Trans::yes, Trans::no, K, ncols, cout, w.data(), K, gmat.data(), ncols,
           dcols.data(), ncols, false);
      // col2im: parallel over (sample, channel) rows of gx; taps summed in j order.
#pragma omp parallel for schedule(static) if (nb * cin > 8)
      for (std::size_t r = 0; r < nb * cin; ++r) {
        const std::size_t sb = r / cin, ci = r % cin;
        double* g = gx.data() + ((b0 + sb) * cin + ci) * T;
        for (std::size_t j = 0; j < W; ++j) {
          const double* d = dcols.data() + (ci * W + j) * ncols + sb * T;
          const std::size_t t_lo = j < pad ? pad - j : 0;
          const std::size_t t_hi = T + pad > j ? std::min(T, T + pad - j) : 0;
          for (std::size_t t = t_lo; t < t_hi; ++t) g[t + j - pad] += d[t];
        }
      }
    }
  }
}

namespace reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
          bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += elem(a, lda, ta, i, p) * elem(b, ldb, tb, p, j);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
    }
  }
}

void conv1d_forward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t T = s.length, W = s.width, pad = s.pad();
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t co = 0; co < s.out_channels; ++co) {
      for (std::size_t t = 0; t < T; ++t) {
        double acc = bias.empty() ? 0.0 : bias[co];
        for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
          for (std::size_t j = 0; j < W; ++j) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
            acc += w[(co * s.in_channels + ci) * W + j] * x[(b * s.in_channels + ci) * T + src];
          }
        }
        out[(b * s.out_channels + co) * T + t] = acc;
      }
    }
  }
}

void conv1d_backward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> gout, std::span<double> gx, std::span<double> gw,
                     std::span<double> gbias) {
  const std::size_t T = s.length, W = s.width, pad = s.pad();
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t co = 0; co < s.out_channels; ++co) {
      for (std::size_t t = 0; t < T; ++t) {
        const double g = gout[(b * s.out_channels + co) * T + t];
        if (!gbias.empty()) gbias[co] += g;
        for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
          for (std::size_t j = 0; j < W; ++j) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
            const std::size_t xi = (b * s.in_channels + ci) * T + src;
            const std::size_t wi = (co * s.in_channels + ci) * W + j;
            if (!gw.empty()) gw[wi] += g * x[xi];
            if (!gx.empty()) gx[xi] += g * w[wi];
          }
        }
      }
    }
  }
}

}  // namespace reference
}  // namespace tsaug::kernels
