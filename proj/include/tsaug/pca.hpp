#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsaug/classifier.hpp"

namespace tsaug {

using Matrix = std::vector<std::vector<double>>;

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // vectors[j] is the unit eigenvector of values[j]
  std::size_t sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal norm falls below
// tolerance * ||A||_F.
SymmetricEigen jacobi_eigen(const Matrix& a, double tolerance = 1e-12, std::size_t max_sweeps = 100);

struct PcaResult {
  Matrix coordinates;                 // [n][out_dims]
  Matrix components;                  // [out_dims][d], orthonormal rows
  std::vector<double> explained_variance_ratio;
  std::vector<double> mean;
  bool degenerate = false;            // all points identical
};

// Mean-centred projection onto the top principal directions. Each component's
// largest-magnitude loading is made positive.
PcaResult pca_project(std::span<const std::vector<double>> points, std::size_t out_dims = 2,
                      std::vector<std::string>* warnings = nullptr);

// Embeddings of every series projected to two components, written as
// `id,label,pc1,pc2` after a `#` line with the explained variance.
void export_embeddings(const ClassifierModel& model, const SeriesDataset& dataset, const std::filesystem::path& path);
void export_embeddings(std::span<const std::vector<double>> embeddings, const SeriesDataset& dataset,
                       const std::filesystem::path& path);

// Mean Euclidean distance between unit-normalized embeddings of same-class
// pairs.
double mean_intra_class_distance(const ClassifierModel& model, const SeriesDataset& dataset);
double mean_intra_class_distance(std::span<const std::vector<double>> embeddings, const SeriesDataset& dataset);

}  // namespace tsaug
