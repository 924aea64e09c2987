#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/pca_oracle.hpp"
#include "tsaug/pca.hpp"

using namespace tsaug;
using namespace tsaug::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Jacobi, MatchesEigenOracle) {
  Rng rng(1);
  for (std::size_t d : {2, 5, 9}) {
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Eigen::MatrixXd a = g + g.transpose();
    Matrix m(d, std::vector<double>(d));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m[i][j] = a(i, j);
    const auto ours = jacobi_eigen(m);
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().reverse();
    for (std::size_t k = 0; k < d; ++k) {
      EXPECT_NEAR(ours.values[k], ref(k), 1e-10);
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(ours.vectors[k].data(), d);
      EXPECT_NEAR(v.norm(), 1.0, 1e-12);
      EXPECT_LT((a * v - ours.values[k] * v).norm(), 1e-9);
    }
  }
}

TEST(Pca, TopSubspaceMatchesOracle) {
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto pts = random_cloud(40, 3 + rng.below(12), rng);
    const auto r = pca_project(pts);
    EXPECT_LT(max_principal_angle(r.components, oracle_subspace(pts, 2)), 1e-8) << rep;
  }
}

TEST(Pca, OrthonormalComponentsAndSignConvention) {
  Rng rng(3);
  const auto r = pca_project(random_cloud(30, 6, rng));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 6; ++j) dot += r.components[a][j] * r.components[b][j];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
    std::size_t big = 0;
    for (std::size_t j = 1; j < 6; ++j)
      if (std::abs(r.components[a][j]) > std::abs(r.components[a][big])) big = j;
    EXPECT_GT(r.components[a][big], 0.0);
  }
  EXPECT_GE(r.explained_variance_ratio[0], r.explained_variance_ratio[1]);
}

TEST(Pca, CollinearPointsExplainEverything) {
  Matrix pts;
  for (int i = 0; i < 10; ++i) pts.push_back({1.0 + i, 2.0 - 0.5 * i, 3.0 + 2.0 * i});
  const auto r = pca_project(pts);
  EXPECT_NEAR(r.explained_variance_ratio[0], 1.0, 1e-12);
  EXPECT_NEAR(r.explained_variance_ratio[1], 0.0, 1e-12);
}

TEST(Pca, IdenticalPointsAreDegenerate) {
  const Matrix pts(5, std::vector<double>{0.1, 0.7, -0.3});
  std::vector<std::string> warnings;
  const auto r = pca_project(pts, 2, &warnings);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(warnings.size(), 1u);
  for (const auto& c : r.coordinates) EXPECT_EQ(c, (std::vector<double>{0.0, 0.0}));
}

TEST(Pca, ExportIsDeterministicWithOneRowPerSeries) {
  Rng rng(4);
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = 1;
  ds.label_map = {-1, 1};
  Matrix emb = random_cloud(12, 8, rng);
  for (std::size_t i = 0; i < 12; ++i) ds.series.push_back({{0.0}, i % 2, "id" + std::to_string(i)});
  const auto dir = std::filesystem::temp_directory_path();
  export_embeddings(emb, ds, dir / "tsaug_pca_a.csv");
  export_embeddings(emb, ds, dir / "tsaug_pca_b.csv");
  const std::string a = slurp(dir / "tsaug_pca_a.csv");
  EXPECT_EQ(a, slurp(dir / "tsaug_pca_b.csv"));
  std::istringstream lines(a);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("# explained_variance pc1=", 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line, "id,label,pc1,pc2");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (rows == 1) EXPECT_EQ(line.rfind("id1,1,", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 12u);
}

TEST(IntraClass, HandComputedDistances) {
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = 1;
  ds.series = {{{0}, 0, "a"}, {{0}, 0, "b"}, {{0}, 1, "c"}, {{0}, 1, "d"}};
  // Class 0 pair at right angles (distance sqrt 2), class 1 pair identical after normalization.
  const Matrix emb{{2, 0}, {0, 3}, {1, 1}, {5, 5}};
  EXPECT_NEAR(mean_intra_class_distance(emb, ds), std::sqrt(2.0) / 2.0, 1e-15);
}
