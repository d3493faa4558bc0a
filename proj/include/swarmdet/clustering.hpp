#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "swarmdet/rng.hpp"

namespace swarmdet {

struct KmeansResult {
  std::vector<int> assignments;  // per row of the feature matrix
  Eigen::MatrixXd centers;       // k x dim
  double inertia = 0.0;          // summed squared distance to own center
};

// Lloyd's iterations from k-means++ seeding; `restarts` independent runs,
// best inertia kept. Deterministic under (features, k, seed).
KmeansResult cluster_kmeans(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                            int restarts = 10);

// Gap statistic: compares log within-cluster dispersion against `refs`
// uniform draws in the feature bounding box and returns the smallest k with
// Gap(k) >= Gap(k+1) - s_{k+1}. Collapsed inputs give 1.
int estimate_cluster_count(const Eigen::MatrixXd& features, int kmax, int refs,
                           std::uint64_t seed);

}  // namespace swarmdet
