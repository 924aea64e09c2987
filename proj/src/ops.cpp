#include "tsaug/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "tsaug/kernels.hpp"

namespace tsaug {
namespace {

Graph& same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::logic_error("operands belong to different graphs");
  return *a.graph;
}

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw std::logic_error("Var is not attached to a graph");
  return *a.graph;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                ", got shape " + shape_string(t.shape()));
}

using kernels::Trans;

}  // namespace

// ---------------------------------------------------------------- elementwise

Var elementwise(Elementwise op, Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool scalar_b = bv.size() == 1 && av.shape() != bv.shape();
  if (!scalar_b && av.shape() != bv.shape())
    throw std::invalid_argument("elementwise: shape mismatch " + shape_string(av.shape()) + " vs " +
                                shape_string(bv.shape()));
  if (op == Elementwise::div) {
    for (double d : bv.data())
      if (d == 0.0) throw std::domain_error("elementwise div: zero divisor");
  }
  Tensor out(av.shape());
  const std::size_t n = av.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i];
    const double y = scalar_b ? bv[0] : bv[i];
    switch (op) {
      case Elementwise::add: out[i] = x + y; break;
      case Elementwise::sub: out[i] = x - y; break;
      case Elementwise::mul: out[i] = x * y; break;
      case Elementwise::div: out[i] = x / y; break;
    }
  }
  static constexpr OpTag tags[] = {OpTag::add, OpTag::sub, OpTag::mul, OpTag::div};
  const std::size_t ia = a.id, ib = b.id;
  return g.record(tags[static_cast<int>(op)], {ia, ib}, std::move(out),
                  [op, ia, ib, scalar_b](Graph& gr, std::size_t self) {
                    const Tensor& go = gr.grad_of(self);
                    const Tensor& x = gr.value(ia);
                    const Tensor& y = gr.value(ib);
                    const std::size_t n = go.size();
                    auto yv = [&](std::size_t i) { return scalar_b ? y[0] : y[i]; };
                    if (gr.requires_grad(ia)) {
                      Tensor& ga = gr.grad_buffer(ia);
                      for (std::size_t i = 0; i < n; ++i) {
                        switch (op) {
                          case Elementwise::add:
                          case Elementwise::sub: ga[i] += go[i]; break;
                          case Elementwise::mul: ga[i] += go[i] * yv(i); break;
                          case Elementwise::div: ga[i] += go[i] / yv(i); break;
                        }
                      }
                    }
                    if (gr.requires_grad(ib)) {
                      Tensor& gb = gr.grad_buffer(ib);
                      for (std::size_t i = 0; i < n; ++i) {
                        double d = 0.0;
                        switch (op) {
                          case Elementwise::add: d = go[i]; break;
                          case Elementwise::sub: d = -go[i]; break;
                          case Elementwise::mul: d = go[i] * x[i]; break;
                          case Elementwise::div: d = -go[i] * x[i] / (yv(i) * yv(i)); break;
                        }
                        gb[scalar_b ? 0 : i] += d;
                      }
                    }
                  });
}

Var elementwise(Elementwise op, Var a, double b) {
  Var c = graph_of(a).constant(Tensor::scalar(b));
  return elementwise(op, a, c);
}

// ---------------------------------------------------------------- dense

Var dense(Var x, Var w, Var b) {
  Graph& g = same_graph(x, w);
  same_graph(x, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_rank(xv, 2, "dense input");
  require_rank(wv, 2, "dense weight");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), outd = wv.dim(1);
  if (wv.dim(0) != in)
    throw std::invalid_argument("dense: inner extents disagree (" + shape_string(xv.shape()) +
                                " . " + shape_string(wv.shape()) + ")");
  if (bv.size() != outd) throw std::invalid_argument("dense: bias length must equal output extent");

  Tensor out({batch, outd});
  kernels::gemm(Trans::no, Trans::no, batch, outd, in, xv.data().data(), in, wv.data().data(), outd,
                out.data().data(), outd, false);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < outd; ++c) out[r * outd + c] += bv[c];

  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  return g.record(OpTag::dense, {ix, iw, ib}, std::move(out),
                  [ix, iw, ib, batch, in, outd](Graph& gr, std::size_t self) {
                    const Tensor& go = gr.grad_of(self);
                    if (gr.requires_grad(ix))
                      kernels::gemm(Trans::no, Trans::yes, batch, in, outd, go.data().data(), outd,
                                    gr.value(iw).data().data(), outd,
                                    gr.grad_buffer(ix).data().data(), in, true);
                    if (gr.requires_grad(iw))
                      kernels::gemm(Trans::yes, Trans::no, in, outd, batch,
                                    gr.value(ix).data().data(), in, go.data().data(), outd,
                                    gr.grad_buffer(iw).data().data(), outd, true);
                    if (gr.requires_grad(ib)) {
                      Tensor& gb = gr.grad_buffer(ib);
                      for (std::size_t r = 0; r < batch; ++r)
                        for (std::size_t c = 0; c < outd; ++c) gb[c] += go[r * outd + c];
                    }
                  });
}

// ---------------------------------------------------------------- conv1d

Var conv1d_same(Var x, Var k, Var b) {
  Graph& g = same_graph(x, k);
  same_graph(x, b);
  const Tensor& xv = x.value();
  const Tensor& kv = k.value();
  const Tensor& bv = b.value();
  require_rank(xv, 3, "conv1d input");
  require_rank(kv, 3, "conv1d kernel");
  const kernels::Conv1dShape s{xv.dim(0), xv.dim(1), kv.dim(0), xv.dim(2), kv.dim(2)};
  if (s.width % 2 == 0)
    throw std::invalid_argument("conv1d_same: kernel width must be odd, got " + std::to_string(s.width));
  if (kv.dim(1) != s.in_channels)
    throw std::invalid_argument("conv1d_same: channel mismatch, input has " +
                                std::to_string(s.in_channels) + ", kernel expects " +
                                std::to_string(kv.dim(1)));
  if (bv.size() != s.out_channels)
    throw std::invalid_argument("conv1d_same: bias length must equal output channels");

  Tensor out({s.batch, s.out_channels, s.length});
  kernels::conv1d_forward(s, xv.data(), kv.data(), bv.data(), out.data());

  const std::size_t ix = x.id, ik = k.id, ib = b.id;
  return g.record(OpTag::conv1d, {ix, ik, ib}, std::move(out), [s, ix, ik, ib](Graph& gr, std::size_t self) {
    std::span<double> gx, gk, gb;
    if (gr.requires_grad(ix)) gx = gr.grad_buffer(ix).data();
    if (gr.requires_grad(ik)) gk = gr.grad_buffer(ik).data();
    if (gr.requires_grad(ib)) gb = gr.grad_buffer(ib).data();
    kernels::conv1d_backward(s, gr.value(ix).data(), gr.value(ik).data(), gr.grad_of(self).data(), gx,
                             gk, gb);
  });
}

// ---------------------------------------------------------------- activations

Var activation(Activation kind, Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  const std::size_t n = xv.size();
  const std::size_t ix = x.id;

  switch (kind) {
    case Activation::relu: {
      for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      return g.record(OpTag::relu, {ix}, std::move(out), [ix](Graph& gr, std::size_t self) {
        const Tensor& go = gr.grad_of(self);
        const Tensor& xin = gr.value(ix);
        Tensor& gx = gr.grad_buffer(ix);
        for (std::size_t i = 0; i < go.size(); ++i)
          if (xin[i] > 0.0) gx[i] += go[i];
      });
    }
    case Activation::elu: {
      for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > 0.0 ? xv[i] : std::expm1(xv[i]);
      return g.record(OpTag::elu, {ix}, std::move(out), [ix](Graph& gr, std::size_t self) {
        const Tensor& go = gr.grad_of(self);
        const Tensor& xin = gr.value(ix);
        Tensor& gx = gr.grad_buffer(ix);
        for (std::size_t i = 0; i < go.size(); ++i)
          gx[i] += go[i] * (xin[i] > 0.0 ? 1.0 : std::exp(xin[i]));
      });
    }
    case Activation::softmax_lastdim: {
      const std::size_t cols = xv.shape().back();
      const std::size_t rows = n / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data().data() + r * cols;
        double* o = out.data().data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
        for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
      }
      return g.record(OpTag::softmax, {ix}, std::move(out), [ix, rows, cols](Graph& gr, std::size_t self) {
        const Tensor& go = gr.grad_of(self);
        const Tensor& y = gr.value(self);
        Tensor& gx = gr.grad_buffer(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += go[r * cols + c] * y[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c)
            gx[r * cols + c] += y[r * cols + c] * (go[r * cols + c] - dot);
        }
      });
    }
  }
  throw std::logic_error("unknown activation");
}

// ---------------------------------------------------------------- batch norm

BatchNormStats BatchNormStats::fresh(std::size_t channels) {
  return BatchNormStats{Tensor({channels}), Tensor({channels}, std::vector<double>(channels, 1.0))};
}

Var batch_norm(Var x, Var gamma, Var beta, const BatchNormStats& running, Mode mode,
               BatchNormStats* updated) {
  Graph& g = same_graph(x, gamma);
  same_graph(x, beta);
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3)
    throw std::invalid_argument("batch_norm: expected [batch, C] or [batch, C, T], got " +
                                shape_string(xv.shape()));
  const std::size_t batch = xv.dim(0), C = xv.dim(1), T = xv.rank() == 3 ? xv.dim(2) : 1;
  if (gamma.value().size() != C || beta.value().size() != C)
    throw std::invalid_argument("batch_norm: gamma/beta length must equal channel count");
  if (running.running_mean.size() != C || running.running_var.size() != C)
    throw std::invalid_argument("batch_norm: running statistics have wrong length");
  if (mode == Mode::train && batch < 2)
    throw std::invalid_argument("batch_norm: train mode needs a batch of at least 2");

  const double N = static_cast<double>(batch * T);
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  Tensor out(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  if (updated) *updated = running;

  for (std::size_t c = 0; c < C; ++c) {
    double mu, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < T; ++t) s += xv[(b * C + c) * T + t];
      mu = s / N;
      // second pass corrects the rounding of the first
      double corr = 0.0, ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < T; ++t) corr += xv[(b * C + c) * T + t] - mu;
      mu += corr / N;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < T; ++t) {
          const double d = xv[(b * C + c) * T + t] - mu;
          ss += d * d;
        }
      var = ss / N;
      if (updated) {
        updated->running_mean[c] = (1.0 - kBatchNormMomentum) * running.running_mean[c] + kBatchNormMomentum * mu;
        updated->running_var[c] =
            (1.0 - kBatchNormMomentum) * running.running_var[c] + kBatchNormMomentum * var * N / (N - 1.0);
      }
    } else {
      mu = running.running_mean[c];
      var = running.running_var[c];
    }
    const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
    (*inv_std)[c] = inv;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t i = (b * C + c) * T + t;
        const double h = (xv[i] - mu) * inv;
        (*xhat)[i] = h;
        out[i] = gv[c] * h + bv[c];
      }
  }

  const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
  return g.record(OpTag::batch_norm, {ix, ig, ib}, std::move(out),
                  [=](Graph& gr, std::size_t self) {
                    const Tensor& go = gr.grad_of(self);
                    const Tensor& gam = gr.value(ig);
                    const bool want_x = gr.requires_grad(ix);
                    for (std::size_t c = 0; c < C; ++c) {
                      double sum_dy = 0.0, sum_dyh = 0.0;
                      for (std::size_t b = 0; b < batch; ++b)
                        for (std::size_t t = 0; t < T; ++t) {
                          const std::size_t i = (b * C + c) * T + t;
                          sum_dy += go[i];
                          sum_dyh += go[i] * (*xhat)[i];
                        }
                      if (gr.requires_grad(ig)) gr.grad_buffer(ig)[c] += sum_dyh;
                      if (gr.requires_grad(ib)) gr.grad_buffer(ib)[c] += sum_dy;
                      if (!want_x) continue;
                      Tensor& gx = gr.grad_buffer(ix);
                      const double inv = (*inv_std)[c];
                      for (std::size_t b = 0; b < batch; ++b)
                        for (std::size_t t = 0; t < T; ++t) {
                          const std::size_t i = (b * C + c) * T + t;
                          if (mode == Mode::train)
                            gx[i] += gam[c] * inv / N * (N * go[i] - sum_dy - (*xhat)[i] * sum_dyh);
                          else
                            gx[i] += gam[c] * inv * go[i];
                        }
                    }
                  });
}

// ---------------------------------------------------------------- losses

Var cross_entropy(Var logits, std::span<const std::size_t> labels, Reduction reduction) {
  Graph& g = graph_of(logits);
  const Tensor& lv = logits.value();
  require_rank(lv, 2, "cross_entropy logits");
  const std::size_t batch = lv.dim(0), K = lv.dim(1);
  if (labels.size() != batch) throw std::invalid_argument("cross_entropy: one label per row required");
  for (std::size_t y : labels)
    if (y >= K)
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(K) + ")");

  auto probs = std::make_shared<std::vector<double>>(lv.size());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double* z = lv.data().data() + r * K;
    const double mx = *std::max_element(z, z + K);
    double s = 0.0;
    for (std::size_t c = 0; c < K; ++c) s += std::exp(z[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < K; ++c) (*probs)[r * K + c] = std::exp(z[c] - lse);
    total += lse - z[labels[r]];
  }
  const double scale = reduction == Reduction::mean ? 1.0 / static_cast<double>(batch) : 1.0;
  std::vector<std::size_t> ys(labels.begin(), labels.end());
  const std::size_t il = logits.id;
  return g.record(OpTag::cross_entropy, {il}, Tensor::scalar(total * scale),
                  [il, probs, ys = std::move(ys), scale, K](Graph& gr, std::size_t self) {
                    const double go = gr.grad_of(self)[0] * scale;
                    Tensor& gl = gr.grad_buffer(il);
                    for (std::size_t r = 0; r < ys.size(); ++r)
                      for (std::size_t c = 0; c < K; ++c)
                        gl[r * K + c] += go * ((*probs)[r * K + c] - (c == ys[r] ? 1.0 : 0.0));
                  });
}

// ---------------------------------------------------------------- shaping

Var global_avg_pool(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 3, "global_avg_pool input");
  const std::size_t batch = xv.dim(0), C = xv.dim(1), T = xv.dim(2);
  Tensor out({batch, C});
  for (std::size_t r = 0; r < batch * C; ++r) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += xv[r * T + t];
    out[r] = s / static_cast<double>(T);
  }
  const std::size_t ix = x.id;
  return g.record(OpTag::avg_pool, {ix}, std::move(out), [ix, batch, C, T](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(ix);
    for (std::size_t r = 0; r < batch * C; ++r) {
      const double d = go[r] / static_cast<double>(T);
      for (std::size_t t = 0; t < T; ++t) gx[r * T + t] += d;
    }
  });
}

Var concat_columns(std::span<const Var> columns) {
  if (columns.empty()) throw std::invalid_argument("concat_columns: no inputs");
  Graph& g = graph_of(columns[0]);
  const std::size_t batch = columns[0].value().dim(0);
  std::vector<std::size_t> ids;
  for (Var c : columns) {
    same_graph(columns[0], c);
    const Tensor& v = c.value();
    if (v.dim(0) != batch || v.size() != batch)
      throw std::invalid_argument("concat_columns: every input must be [batch] or [batch, 1]");
    ids.push_back(c.id);
  }
  const std::size_t n = ids.size();
  Tensor out({batch, n});
  for (std::size_t j = 0; j < n; ++j) {
    const Tensor& v = g.value(ids[j]);
    for (std::size_t r = 0; r < batch; ++r) out[r * n + j] = v[r];
  }
  std::vector<std::size_t> inputs = ids;
  return g.record(OpTag::concat, std::move(inputs), std::move(out), [ids, batch](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const std::size_t n = ids.size();
    for (std::size_t j = 0; j < n; ++j) {
      if (!gr.requires_grad(ids[j])) continue;
      Tensor& gc = gr.grad_buffer(ids[j]);
      for (std::size_t r = 0; r < batch; ++r) gc[r] += go[r * n + j];
    }
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (rows.empty()) throw std::invalid_argument("gather_rows: empty index list");
  const std::size_t n = xv.dim(0), stride = xv.size() / n;
  for (std::size_t r : rows)
    if (r >= n) throw std::out_of_range("gather_rows: row " + std::to_string(r) + " out of range");
  Shape shape = xv.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(xv.data().data() + rows[i] * stride, stride, out.data().data() + i * stride);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t ix = x.id;
  return g.record(OpTag::gather, {ix}, std::move(out), [ix, idx = std::move(idx), stride](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(ix);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t k = 0; k < stride; ++k) gx[idx[i] * stride + k] += go[i * stride + k];
  });
}

// ---------------------------------------------------------------- reductions

namespace {

Var reduce_all(Var x, bool average) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const double scale = average ? 1.0 / static_cast<double>(xv.size()) : 1.0;
  const std::size_t ix = x.id;
  return g.record(average ? OpTag::mean : OpTag::sum, {ix}, Tensor::scalar(s * scale),
                  [ix, scale](Graph& gr, std::size_t self) {
                    const double go = gr.grad_of(self)[0] * scale;
                    for (double& v : gr.grad_buffer(ix).data()) v += go;
                  });
}

}  // namespace

Var sum(Var x) { return reduce_all(x, false); }
Var mean(Var x) { return reduce_all(x, true); }

Var sum_lastdim(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "sum_lastdim input");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += xv[r * cols + c];
    out[r] = s;
  }
  const std::size_t ix = x.id;
  return g.record(OpTag::sum_lastdim, {ix}, std::move(out), [ix, rows, cols](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += go[r];
  });
}

Var l2_normalize_rows(Var x, double min_norm, std::vector<bool>* degenerate) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "l2_normalize_rows input");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out({rows, cols});
  auto norms = std::make_shared<std::vector<double>>(rows);
  if (degenerate) degenerate->assign(rows, false);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += xv[r * cols + c] * xv[r * cols + c];
    const double nrm = std::sqrt(ss);
    if (nrm < min_norm) {
      (*norms)[r] = 0.0;
      out[r * cols] = 1.0;
      if (degenerate) (*degenerate)[r] = true;
      continue;
    }
    (*norms)[r] = nrm;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] / nrm;
  }
  const std::size_t ix = x.id;
  return g.record(OpTag::l2_normalize, {ix}, std::move(out), [ix, rows, cols, norms](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& y = gr.value(self);
    Tensor& gx = gr.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      const double nrm = (*norms)[r];
      if (nrm == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[r * cols + c] * go[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        gx[r * cols + c] += (go[r * cols + c] - y[r * cols + c] * dot) / nrm;
    }
  });
}

}  // namespace tsaug
