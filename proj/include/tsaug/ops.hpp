#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsaug/graph.hpp"

namespace tsaug {

enum class Elementwise { add, sub, mul, div };
enum class Activation { relu, elu, softmax_lastdim };
enum class Mode { train, eval };
enum class Reduction { mean, sum };

// a (op) b where b has a's shape or is a scalar tensor.
Var elementwise(Elementwise op, Var a, Var b);
Var elementwise(Elementwise op, Var a, double b);

inline Var operator+(Var a, Var b) { return elementwise(Elementwise::add, a, b); }
inline Var operator-(Var a, Var b) { return elementwise(Elementwise::sub, a, b); }
inline Var operator*(Var a, Var b) { return elementwise(Elementwise::mul, a, b); }
inline Var operator/(Var a, Var b) { return elementwise(Elementwise::div, a, b); }
inline Var operator+(Var a, double b) { return elementwise(Elementwise::add, a, b); }
inline Var operator-(Var a, double b) { return elementwise(Elementwise::sub, a, b); }
inline Var operator*(Var a, double b) { return elementwise(Elementwise::mul, a, b); }
inline Var operator/(Var a, double b) { return elementwise(Elementwise::div, a, b); }

// x [batch, in] . w [in, out] + b [out]
Var dense(Var x, Var w, Var b);

// Stride-1 convolution with zero "same" padding; width must be odd.
// x [batch, cin, T], k [cout, cin, width], b [cout] -> [batch, cout, T]
Var conv1d_same(Var x, Var k, Var b);

Var activation(Activation kind, Var x);
inline Var relu(Var x) { return activation(Activation::relu, x); }
inline Var elu(Var x) { return activation(Activation::elu, x); }
inline Var softmax_lastdim(Var x) { return activation(Activation::softmax_lastdim, x); }

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;

  static BatchNormStats fresh(std::size_t channels);
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Per-channel normalization of x [batch, C] or [batch, C, T]. Train mode uses
// the batch statistics (over batch and time) and, when `updated` is given,
// writes the momentum-updated running statistics there. Eval mode uses
// `running`.
Var batch_norm(Var x, Var gamma, Var beta, const BatchNormStats& running, Mode mode,
               BatchNormStats* updated = nullptr);

// Cross-entropy of logits [batch, K] against class ids, via log-sum-exp.
Var cross_entropy(Var logits, std::span<const std::size_t> labels,
                  Reduction reduction = Reduction::mean);

// [batch, C, T] -> [batch, C], mean over T.
Var global_avg_pool(Var x);

// Columns [batch] or [batch, 1] stacked into [batch, n].
Var concat_columns(std::span<const Var> columns);

// Rows of x [n, ...] selected by index (repeats allowed).
Var gather_rows(Var x, std::span<const std::size_t> rows);

Var sum(Var x);
Var mean(Var x);
// [batch, d] -> [batch]
Var sum_lastdim(Var x);

// Rows of x [batch, d] scaled to unit L2 norm. Rows whose norm is below
// min_norm map to the first basis vector (no gradient) and are flagged in
// `degenerate` when given.
Var l2_normalize_rows(Var x, double min_norm = 1e-12, std::vector<bool>* degenerate = nullptr);

}  // namespace tsaug
