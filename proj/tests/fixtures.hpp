#pragma once

// Small rasters and random generators shared by the unit tests.

#include <filesystem>
#include <random>
#include <string>

#include "uncerseg/raster.hpp"

namespace uncerseg::testing {

/// 4x4 with the left two columns foreground.
inline BinaryMask left_two_columns() {
  BinaryMask m = BinaryMask::Zero(4, 4);
  m.leftCols(2).setOnes();
  return m;
}

inline BinaryMask random_mask(std::mt19937_64& gen, int h, int w, double p = 0.4) {
  std::bernoulli_distribution coin(p);
  BinaryMask m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(gen) ? 1 : 0;
  return m;
}

inline ProbMask random_prob(std::mt19937_64& gen, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProbMask m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(gen);
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("uncerseg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace uncerseg::testing
