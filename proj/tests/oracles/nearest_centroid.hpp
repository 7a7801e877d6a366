#pragma once

// Nearest-centroid classifier over fixed-width frames.

#include <array>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

template <std::size_t Classes>
struct NearestCentroid {
  std::size_t width = 0;
  std::array<std::vector<double>, Classes> centroid;

  /// values row-major [frame][width]
  void fit(const std::vector<double>& values, const std::vector<std::size_t>& labels, std::size_t w) {
    width = w;
    std::array<std::size_t, Classes> count{};
    for (auto& c : centroid) c.assign(width, 0.0);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      ++count[labels[t]];
      for (std::size_t j = 0; j < width; ++j) centroid[labels[t]][j] += values[t * width + j];
    }
    for (std::size_t k = 0; k < Classes; ++k)
      for (auto& v : centroid[k]) v = count[k] ? v / static_cast<double>(count[k]) : std::numeric_limits<double>::infinity();
  }

  std::size_t predict(const double* frame) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < Classes; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < width; ++j) d += (frame[j] - centroid[k][j]) * (frame[j] - centroid[k][j]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }

  double accuracy(const std::vector<double>& values, const std::vector<std::size_t>& labels) const {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) hits += predict(values.data() + t * width) == labels[t];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
  }
};

} // namespace oracle
