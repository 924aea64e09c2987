#include "tsaug/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "tsaug/augment.hpp"
#include "tsaug/checkpoint.hpp"
#include "tsaug/init.hpp"

namespace tsaug {

namespace {

constexpr std::size_t kChunk = 64;

std::string block_name(std::size_t b) { return "block" + std::to_string(b); }

std::size_t in_channels(const ClassifierArch& arch, std::size_t block) {
  return block == 0 ? 1 : arch.filters[block - 1];
}

}  // namespace

void ClassifierArch::validate() const {
  if (series_length == 0) throw std::invalid_argument("classifier: series length must be positive");
  if (num_classes < 2) throw std::invalid_argument("classifier: need at least two classes");
  for (std::size_t b = 0; b < 3; ++b) {
    if (filters[b] == 0) throw std::invalid_argument("classifier: filter counts must be positive");
    if (widths[b] % 2 == 0) throw std::invalid_argument("classifier: kernel widths must be odd");
  }
}

std::size_t classifier_parameter_count(const ClassifierArch& arch) {
  std::size_t n = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t cout = arch.filters[b], w = arch.widths[b];
    std::size_t cin = in_channels(arch, b);
    for (std::size_t i = 0; i < 3; ++i) {
      n += cout * cin * w + cout + 2 * cout;
      cin = cout;
    }
    if (in_channels(arch, b) != cout) n += cout * in_channels(arch, b) + cout + 2 * cout;
  }
  return n + arch.embedding_dim() * arch.num_classes + arch.num_classes;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be non-negative");
  if (batch_size < 2) throw std::invalid_argument("train: batch_size must be at least 2");
  if (feat_sim_enabled && !(margin_alpha > 0.0 && feat_sim_weight > 0.0))
    throw std::invalid_argument("train: margin_alpha and feat_sim_weight must be positive");
}

ClassifierModel ClassifierModel::initialize(const ClassifierArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(derive_seed(seed, "classifier/init"));
  ClassifierModel m;
  m.arch_ = arch;
  auto add_bn = [&](const std::string& prefix, std::size_t c) {
    m.params_.add(prefix + ".gamma", filled({c}, 1.0));
    m.params_.add(prefix + ".beta", Tensor({c}));
    const BatchNormStats s = BatchNormStats::fresh(c);
    m.buffers_.add(prefix + ".running_mean", s.running_mean);
    m.buffers_.add(prefix + ".running_var", s.running_var);
  };
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t cout = arch.filters[b], w = arch.widths[b];
    std::size_t cin = in_channels(arch, b);
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string conv = block_name(b) + ".conv" + std::to_string(i);
      m.params_.add(conv + ".w", uniform_fan_in({cout, cin, w}, cin * w, rng));
      m.params_.add(conv + ".b", Tensor({cout}));
      add_bn(block_name(b) + ".bn" + std::to_string(i), cout);
      cin = cout;
    }
    if (in_channels(arch, b) != cout) {
      const std::size_t c0 = in_channels(arch, b);
      m.params_.add(block_name(b) + ".short.w", uniform_fan_in({cout, c0, 1}, c0, rng));
      m.params_.add(block_name(b) + ".short.b", Tensor({cout}));
      add_bn(block_name(b) + ".short_bn", cout);
    }
  }
  const std::size_t d = arch.embedding_dim();
  m.params_.add("fc.w", uniform_fan_in({d, arch.num_classes}, d, rng));
  m.params_.add("fc.b", Tensor({arch.num_classes}));
  m.provenance_.config.seed = seed;
  return m;
}

std::size_t ClassifierModel::conv_layer_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_.name(i);
    if (name.find(".conv") != std::string::npos && name.ends_with(".w")) ++n;
  }
  return n;
}

NamedTensors ClassifierModel::to_tensors() const {
  NamedTensors t = params_;
  for (std::size_t i = 0; i < buffers_.size(); ++i) t.add(buffers_.name(i), buffers_.tensor(i));
  const ClassifierArch& a = arch_;
  t.add("meta.arch", Tensor::from({static_cast<double>(a.series_length), static_cast<double>(a.num_classes),
                                   static_cast<double>(a.filters[0]), static_cast<double>(a.filters[1]),
                                   static_cast<double>(a.filters[2]), static_cast<double>(a.widths[0]),
                                   static_cast<double>(a.widths[1]), static_cast<double>(a.widths[2])}));
  const TrainConfig& c = provenance_.config;
  t.add("meta.train",
        Tensor::from({c.learning_rate, c.weight_decay, static_cast<double>(c.epochs), static_cast<double>(c.batch_size),
                      c.feat_sim_enabled ? 1.0 : 0.0, c.margin_alpha, c.feat_sim_weight, c.feat_sim_hinge ? 1.0 : 0.0,
                      provenance_.trained ? 1.0 : 0.0, static_cast<double>(provenance_.train_size),
                      provenance_.first_epoch_ce, provenance_.final_epoch_ce}));
  t.add("meta.seed", pack_u64(c.seed));
  return t;
}

ClassifierModel ClassifierModel::from_tensors(const NamedTensors& t) {
  const Tensor& a = t.at("meta.arch");
  if (a.size() != 8) throw std::runtime_error("classifier checkpoint: bad meta.arch");
  ClassifierArch arch;
  arch.series_length = static_cast<std::size_t>(a[0]);
  arch.num_classes = static_cast<std::size_t>(a[1]);
  for (std::size_t b = 0; b < 3; ++b) {
    arch.filters[b] = static_cast<std::size_t>(a[2 + b]);
    arch.widths[b] = static_cast<std::size_t>(a[5 + b]);
  }
  // Build a template for names and shapes, then copy the stored values in.
  ClassifierModel m = initialize(arch, 0);
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    const Tensor& stored = t.at(m.params_.name(i));
    if (stored.shape() != m.params_.tensor(i).shape())
      throw std::runtime_error("classifier checkpoint: shape mismatch for " + m.params_.name(i));
    m.params_.tensor(i) = stored;
  }
  for (std::size_t i = 0; i < m.buffers_.size(); ++i) {
    const Tensor& stored = t.at(m.buffers_.name(i));
    if (stored.shape() != m.buffers_.tensor(i).shape())
      throw std::runtime_error("classifier checkpoint: shape mismatch for " + m.buffers_.name(i));
    m.buffers_.tensor(i) = stored;
  }
  const Tensor& meta = t.at("meta.train");
  if (meta.size() != 12) throw std::runtime_error("classifier checkpoint: bad meta.train");
  TrainConfig& c = m.provenance_.config;
  c.learning_rate = meta[0];
  c.weight_decay = meta[1];
  c.epochs = static_cast<std::size_t>(meta[2]);
  c.batch_size = static_cast<std::size_t>(meta[3]);
  c.feat_sim_enabled = meta[4] != 0.0;
  c.margin_alpha = meta[5];
  c.feat_sim_weight = meta[6];
  c.feat_sim_hinge = meta[7] != 0.0;
  c.seed = unpack_u64(t.at("meta.seed"));
  m.provenance_.trained = meta[8] != 0.0;
  m.provenance_.train_size = static_cast<std::size_t>(meta[9]);
  m.provenance_.first_epoch_ce = meta[10];
  m.provenance_.final_epoch_ce = meta[11];
  return m;
}

ClassifierGraph::ClassifierGraph(Graph& graph, const ClassifierModel& model, bool trainable)
    : graph_(graph), model_(model), buffers_(model.buffers()) {
  const NamedTensors& p = model.params();
  vars_.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    vars_.push_back(trainable ? graph.parameter(p.tensor(i)) : graph.constant(p.tensor(i)));
}

Var ClassifierGraph::param(const std::string& name) const {
  const NamedTensors& p = model_.params();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.name(i) == name) return vars_[i];
  throw std::out_of_range("classifier: no parameter " + name);
}

Var ClassifierGraph::bn(const std::string& prefix, Var x, Mode mode) {
  BatchNormStats running{buffers_.at(prefix + ".running_mean"), buffers_.at(prefix + ".running_var")};
  BatchNormStats next;
  Var y = batch_norm(x, param(prefix + ".gamma"), param(prefix + ".beta"), running, mode,
                     mode == Mode::train ? &next : nullptr);
  if (mode == Mode::train) {
    buffers_.at(prefix + ".running_mean") = next.running_mean;
    buffers_.at(prefix + ".running_var") = next.running_var;
  }
  return y;
}

ForwardOutput ClassifierGraph::forward(Var input, Mode mode) {
  const ClassifierArch& arch = model_.arch();
  const Shape& s = input.shape();
  if (s.size() != 3 || s[1] != 1) throw std::invalid_argument("classifier: input must be [batch, 1, T]");
  if (s[2] != arch.series_length)
    throw std::invalid_argument("classifier: series length " + std::to_string(s[2]) + " != model length " +
                                std::to_string(arch.series_length));
  ForwardOutput out;
  Var x = input;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::string blk = block_name(b);
    Var h = x;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string idx = std::to_string(i);
      h = conv1d_same(h, param(blk + ".conv" + idx + ".w"), param(blk + ".conv" + idx + ".b"));
      h = relu(bn(blk + ".bn" + idx, h, mode));
    }
    Var shortcut = x;
    if (in_channels(arch, b) != arch.filters[b]) {
      shortcut = conv1d_same(x, param(blk + ".short.w"), param(blk + ".short.b"));
      shortcut = bn(blk + ".short_bn", shortcut, mode);
    }
    out.shortcut_outputs[b] = shortcut;
    x = h + shortcut;
    out.block_outputs[b] = x;
  }
  out.embeddings = global_avg_pool(x);
  out.logits = dense(out.embeddings, param("fc.w"), param("fc.b"));
  return out;
}

NamedTensors ClassifierGraph::gradients() const {
  NamedTensors g;
  const NamedTensors& p = model_.params();
  for (std::size_t i = 0; i < p.size(); ++i)
    g.add(p.name(i), graph_.has_grad(vars_[i]) ? graph_.grad(vars_[i]) : Tensor(p.tensor(i).shape()));
  return g;
}

Tensor make_input(std::span<const std::vector<double>> series, std::size_t length) {
  if (series.empty()) throw std::invalid_argument("make_input: no series");
  std::vector<double> data;
  data.reserve(series.size() * length);
  for (const auto& s : series) {
    if (s.size() != length)
      throw std::invalid_argument("series length " + std::to_string(s.size()) + " != model length " +
                                  std::to_string(length));
    data.insert(data.end(), s.begin(), s.end());
  }
  return Tensor({series.size(), 1, length}, std::move(data));
}

Predictions predict(const ClassifierModel& model, std::span<const std::vector<double>> series) {
  Predictions out;
  const std::size_t T = model.arch().series_length;
  for (std::size_t start = 0; start < series.size(); start += kChunk) {
    const auto chunk = series.subspan(start, std::min(kChunk, series.size() - start));
    Graph g;
    ClassifierGraph net(g, model, false);
    const ForwardOutput f = net.forward(g.constant(make_input(chunk, T)), Mode::eval);
    const std::size_t d = f.embeddings.shape()[1], K = f.logits.shape()[1];
    const auto e = f.embeddings.value().data();
    const auto l = f.logits.value().data();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.embeddings.emplace_back(e.begin() + i * d, e.begin() + (i + 1) * d);
      out.logits.emplace_back(l.begin() + i * K, l.begin() + (i + 1) * K);
    }
  }
  return out;
}

InputGradients input_loss_gradients(const ClassifierModel& model, std::span<const std::vector<double>> series,
                                    std::span<const std::size_t> labels) {
  if (series.size() != labels.size()) throw std::invalid_argument("input_loss_gradients: label count mismatch");
  InputGradients out;
  const std::size_t T = model.arch().series_length;
  for (std::size_t start = 0; start < series.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, series.size() - start);
    Graph g;
    ClassifierGraph net(g, model, false);
    Var input = g.parameter(make_input(series.subspan(start, n), T));
    const ForwardOutput f = net.forward(input, Mode::eval);
    // Summed loss: each sample's gradient is exactly its own loss gradient.
    Var loss = cross_entropy(f.logits, labels.subspan(start, n), Reduction::sum);
    const auto logits = f.logits.value().data();
    const std::size_t K = f.logits.shape()[1];
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = logits.subspan(i * K, K);
      const double mx = *std::max_element(row.begin(), row.end());
      double s = 0.0;
      for (double v : row) s += std::exp(v - mx);
      out.losses.push_back(mx + std::log(s) - row[labels[start + i]]);
    }
    g.backward(loss);
    const auto grad = g.grad(input).data();
    for (std::size_t i = 0; i < n; ++i) out.gradients.emplace_back(grad.begin() + i * T, grad.begin() + (i + 1) * T);
  }
  return out;
}

std::vector<double> normalize_embedding(std::span<const double> embedding, bool* degenerate) {
  double ss = 0.0;
  for (double v : embedding) ss += v * v;
  const double norm = std::sqrt(ss);
  std::vector<double> out(embedding.size(), 0.0);
  if (degenerate) *degenerate = false;
  if (!(norm >= 1e-12)) {
    if (!out.empty()) out[0] = 1.0;
    if (degenerate) *degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = embedding[i] / norm;
  return out;
}

std::vector<double> normalized_embedding(const ClassifierModel& model, std::span<const double> series,
                                         bool* degenerate) {
  const std::vector<std::vector<double>> one{std::vector<double>(series.begin(), series.end())};
  return normalize_embedding(predict(model, one).embeddings[0], degenerate);
}

double feat_sim_loss(std::span<const double> anchor, std::span<const double> positive,
                     std::span<const double> negative, double alpha, bool hinge) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size())
    throw std::invalid_argument("feat_sim_loss: dimension mismatch");
  for (auto v : {anchor, positive, negative}) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (std::abs(std::sqrt(ss) - 1.0) > 1e-6) throw std::invalid_argument("feat_sim_loss: inputs must be unit vectors");
  }
  double ap = 0.0, an = 0.0;
  for (std::size_t i = 0; i < anchor.size(); ++i) {
    ap += (anchor[i] - positive[i]) * (anchor[i] - positive[i]);
    an += (anchor[i] - negative[i]) * (anchor[i] - negative[i]);
  }
  const double t = ap + alpha - an;
  return hinge ? std::max(0.0, t) : t;
}

ClassifierModel train_classifier(const SeriesDataset& train_data, const TrainConfig& config,
                                 const AugmentedDataset* augmented) {
  if (train_data.empty()) throw std::invalid_argument("train_classifier: empty training set");
  train_data.validate();
  config.validate();
  const std::size_t n_orig = train_data.size();
  const std::size_t T = train_data.length, K = train_data.num_classes;

  std::vector<const LabeledSeries*> pool;
  for (const LabeledSeries& s : train_data.series) pool.push_back(&s);
  if (augmented) {
    for (const LabeledSeries& s : augmented->data.series) {
      if (s.values.size() != T) throw std::invalid_argument("train_classifier: augmented length mismatch");
      if (s.label >= K) throw std::invalid_argument("train_classifier: augmented label out of range");
      pool.push_back(&s);
    }
  }

  // Feat-Sim bookkeeping: pool index of the anchor for every augmented sample,
  // and the augmented pool indices per class for negative sampling.
  std::vector<std::size_t> anchor_of;
  std::vector<std::vector<std::size_t>> negatives_for(K);
  if (config.feat_sim_enabled) {
    if (!augmented || augmented->links.size() != augmented->data.size() || augmented->data.empty())
      throw std::invalid_argument("train_classifier: feat_sim requires augmented data with provenance links");
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < n_orig; ++i) by_id.emplace(train_data.series[i].id, i);
    for (std::size_t j = 0; j < augmented->data.size(); ++j) {
      const auto it = by_id.find(augmented->links[j].source_id);
      if (it == by_id.end())
        throw std::invalid_argument("train_classifier: provenance link to unknown series " +
                                    augmented->links[j].source_id);
      if (train_data.series[it->second].label != augmented->data.series[j].label)
        throw std::invalid_argument("train_classifier: augmented label differs from its source");
      anchor_of.push_back(it->second);
    }
    for (std::size_t c = 0; c < K; ++c)
      for (std::size_t j = 0; j < augmented->data.size(); ++j)
        if (augmented->data.series[j].label != c) negatives_for[c].push_back(n_orig + j);
  }

  ClassifierArch arch;
  arch.series_length = T;
  arch.num_classes = K;
  ClassifierModel model = ClassifierModel::initialize(arch, config.seed);
  model.provenance_.config = config;
  model.provenance_.train_size = pool.size();
  AdamState adam = AdamState::for_params(model.params_, {config.learning_rate, config.weight_decay});
  Rng shuffle(derive_seed(config.seed, "classifier/shuffle"));
  Rng triplets(derive_seed(config.seed, "classifier/triplets"));

  const std::size_t batch = std::min(config.batch_size, pool.size());
  if (batch < 2) throw std::invalid_argument("train_classifier: need at least two training samples");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double epoch_ce = 0.0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + batch);
      if (order.size() - end == 1) end = order.size();
      const std::size_t B = end - start;

      std::vector<std::vector<double>> rows;
      std::vector<std::size_t> labels, positive_rows, anchor_rows, negative_rows;
      for (std::size_t k = 0; k < B; ++k) {
        rows.push_back(pool[order[start + k]]->values);
        labels.push_back(pool[order[start + k]]->label);
      }
      if (config.feat_sim_enabled) {
        for (std::size_t k = 0; k < B; ++k) {
          const std::size_t idx = order[start + k];
          if (idx < n_orig) continue;
          const auto& cands = negatives_for[pool[idx]->label];
          if (cands.empty()) continue;
          positive_rows.push_back(k);
          anchor_rows.push_back(rows.size());
          rows.push_back(pool[anchor_of[idx - n_orig]]->values);
          negative_rows.push_back(rows.size());
          rows.push_back(pool[cands[triplets.below(cands.size())]]->values);
        }
      }

      Graph g;
      ClassifierGraph net(g, model, true);
      const ForwardOutput f = net.forward(g.constant(make_input(rows, T)), Mode::train);
      std::vector<std::size_t> head(B);
      std::iota(head.begin(), head.end(), 0);
      Var ce = cross_entropy(rows.size() == B ? f.logits : gather_rows(f.logits, head), labels);
      Var loss = ce;
      if (!positive_rows.empty()) {
        Var e = l2_normalize_rows(f.embeddings);
        Var a = gather_rows(e, anchor_rows);
        Var da = a - gather_rows(e, positive_rows);
        Var dn = a - gather_rows(e, negative_rows);
        Var t = sum_lastdim(da * da) - sum_lastdim(dn * dn) + config.margin_alpha;
        if (config.feat_sim_hinge) t = relu(t);
        loss = ce + mean(t) * config.feat_sim_weight;
      }
      g.backward(loss);
      epoch_ce += ce.value().item() * static_cast<double>(B);
      model.params_ = adam_step(model.params_, net.gradients(), adam);
      model.buffers_ = net.updated_buffers();
      start = end;
    }
    epoch_ce /= static_cast<double>(pool.size());
    if (epoch == 0) model.provenance_.first_epoch_ce = epoch_ce;
    model.provenance_.final_epoch_ce = epoch_ce;
  }
  model.provenance_.trained = true;
  return model;
}

std::size_t argmax_class(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax_class: empty logits");
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

EvalResult evaluate(std::span<const std::vector<double>> logits, const SeriesDataset& dataset, std::size_t K) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (dataset.num_classes != K)
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(dataset.num_classes) +
                                " classes, model has " + std::to_string(K));
  if (logits.size() != dataset.size()) throw std::invalid_argument("evaluate: one logit row per series expected");
  EvalResult r;
  r.confusion.assign(K, std::vector<std::size_t>(K, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t y = dataset.series[i].label;
    if (y >= K) throw std::invalid_argument("evaluate: label out of range");
    const std::size_t c = argmax_class(logits[i]);
    r.predictions.push_back(c);
    ++r.confusion[y][c];
    if (c == y) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return r;
}

EvalResult evaluate(const ClassifierModel& model, const SeriesDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<std::vector<double>> values;
  for (const LabeledSeries& s : dataset.series) values.push_back(s.values);
  return evaluate(predict(model, values).logits, dataset, model.arch().num_classes);
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path) {
  save_checkpoint(path, model.to_tensors());
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  return ClassifierModel::from_tensors(load_checkpoint(path));
}

}  // namespace tsaug
