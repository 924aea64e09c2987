#include "tsaug/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace tsaug {

SymmetricEigen jacobi_eigen(const Matrix& input, double tolerance, std::size_t max_sweeps) {
  const std::size_t n = input.size();
  for (const auto& row : input)
    if (row.size() != n) throw std::invalid_argument("jacobi_eigen: matrix must be square");
  Matrix a = input;
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  double total = 0.0;
  for (const auto& row : a)
    for (double x : row) total += x * x;
  const double threshold = tolerance * std::sqrt(total);

  SymmetricEigen out;
  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a[p][q] * a[p][q];
    if (std::sqrt(off) <= threshold) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  for (std::size_t j : order) {
    out.values.push_back(a[j][j]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][j];
    out.vectors.push_back(std::move(col));
  }
  return out;
}

PcaResult pca_project(std::span<const std::vector<double>> points, std::size_t out_dims,
                      std::vector<std::string>* warnings) {
  if (out_dims == 0) throw std::invalid_argument("pca_project: out_dims must be positive");
  if (points.size() < out_dims + 1)
    throw std::invalid_argument("pca_project: need at least " + std::to_string(out_dims + 1) + " points");
  const std::size_t n = points.size(), d = points[0].size();
  if (d < out_dims) throw std::invalid_argument("pca_project: dimension smaller than out_dims");
  for (const auto& p : points)
    if (p.size() != d) throw std::invalid_argument("pca_project: points differ in dimension");

  PcaResult r;
  r.mean.assign(d, 0.0);
  for (const auto& p : points)
    for (std::size_t j = 0; j < d; ++j) r.mean[j] += p[j];
  for (double& m : r.mean) m /= static_cast<double>(n);

  Matrix cov(d, std::vector<double>(d, 0.0));
  for (const auto& p : points) {
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = p[i] - r.mean[i];
      for (std::size_t j = i; j < d; ++j) cov[i][j] += ci * (p[j] - r.mean[j]);
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i][j] /= static_cast<double>(n - 1);
      cov[j][i] = cov[i][j];
    }
    trace += cov[i][i];
  }

  bool identical = true;
  for (const auto& p : points) identical = identical && p == points[0];
  if (identical || !(trace > 0.0)) {
    r.degenerate = true;
    r.coordinates.assign(n, std::vector<double>(out_dims, 0.0));
    r.components.assign(out_dims, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < out_dims; ++k) r.components[k][k] = 1.0;
    r.explained_variance_ratio.assign(out_dims, 0.0);
    const std::string msg = "pca_project: all points identical; explained variance undefined";
    if (warnings)
      warnings->push_back(msg);
    else
      std::cerr << "warning: " << msg << '\n';
    return r;
  }

  const SymmetricEigen eig = jacobi_eigen(cov);
  for (std::size_t k = 0; k < out_dims; ++k) {
    std::vector<double> c = eig.vectors[k];
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(c[j]) > std::abs(c[big])) big = j;
    if (c[big] < 0.0)
      for (double& x : c) x = -x;
    r.components.push_back(std::move(c));
    r.explained_variance_ratio.push_back(std::max(0.0, eig.values[k]) / trace);
  }
  for (const auto& p : points) {
    std::vector<double> coord(out_dims, 0.0);
    for (std::size_t k = 0; k < out_dims; ++k)
      for (std::size_t j = 0; j < d; ++j) coord[k] += (p[j] - r.mean[j]) * r.components[k][j];
    r.coordinates.push_back(std::move(coord));
  }
  return r;
}

namespace {

std::vector<std::vector<double>> embed(const ClassifierModel& model, const SeriesDataset& dataset) {
  std::vector<std::vector<double>> values;
  for (const LabeledSeries& s : dataset.series) values.push_back(s.values);
  return predict(model, values).embeddings;
}

}  // namespace

void export_embeddings(const ClassifierModel& model, const SeriesDataset& dataset, const std::filesystem::path& path) {
  if (dataset.empty()) throw std::invalid_argument("export_embeddings: empty dataset");
  export_embeddings(embed(model, dataset), dataset, path);
}

void export_embeddings(std::span<const std::vector<double>> embeddings, const SeriesDataset& dataset,
                       const std::filesystem::path& path) {
  if (embeddings.size() != dataset.size()) throw std::invalid_argument("export_embeddings: one embedding per series");
  std::vector<std::string> warnings;
  const PcaResult pca = pca_project(embeddings, 2, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[128];
  std::snprintf(buf, sizeof buf, "# explained_variance pc1=%.17g pc2=%.17g\n", pca.explained_variance_ratio[0],
                pca.explained_variance_ratio[1]);
  out << buf << "id,label,pc1,pc2\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%lld,%.17g,%.17g\n", dataset.original_label(dataset.series[i].label),
                  pca.coordinates[i][0], pca.coordinates[i][1]);
    out << dataset.series[i].id << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

double mean_intra_class_distance(const ClassifierModel& model, const SeriesDataset& dataset) {
  return mean_intra_class_distance(embed(model, dataset), dataset);
}

double mean_intra_class_distance(std::span<const std::vector<double>> embeddings, const SeriesDataset& dataset) {
  if (embeddings.size() != dataset.size()) throw std::invalid_argument("mean_intra_class_distance: size mismatch");
  std::vector<std::vector<double>> unit;
  for (const auto& e : embeddings) unit.push_back(normalize_embedding(e));
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t j = i + 1; j < unit.size(); ++j) {
      if (dataset.series[i].label != dataset.series[j].label) continue;
      double ss = 0.0;
      for (std::size_t k = 0; k < unit[i].size(); ++k) ss += (unit[i][k] - unit[j][k]) * (unit[i][k] - unit[j][k]);
      total += std::sqrt(ss);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

}  // namespace tsaug
