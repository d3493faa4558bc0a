#include "swarmdet/clustering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace swarmdet {

namespace {

double assign_points(const Eigen::MatrixXd& features, const Eigen::MatrixXd& centers,
                     std::vector<int>& assignments) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = (features.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    assignments[i] = arg;
    inertia += best;
  }
  return inertia;
}

KmeansResult lloyd_once(const Eigen::MatrixXd& features, int k, Rng& rng) {
  const Eigen::Index n = features.rows();
  Eigen::MatrixXd centers(k, features.cols());

  // k-means++ seeding: first center uniform, the rest proportional to the
  // squared distance from the nearest already-chosen center.
  centers.row(0) = features.row(rng.uniform_int(static_cast<int>(n)));
  Eigen::VectorXd dist2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dist2[i] = (features.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (; pick < n - 1; ++pick) {
        target -= dist2[pick];
        if (target <= 0.0) break;
      }
    } else {
      pick = rng.uniform_int(static_cast<int>(n));  // all points coincide
    }
    centers.row(c) = features.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      dist2[i] = std::min(dist2[i], (features.row(i) - centers.row(c)).squaredNorm());
  }

  KmeansResult out;
  out.assignments.assign(n, 0);
  out.inertia = assign_points(features, centers, out.assignments);

  for (int iter = 0; iter < 100; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, features.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.assignments[i]) += features.row(i);
      ++counts[out.assignments[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: reseed at the point farthest from its center.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (features.row(i) - centers.row(out.assignments[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(c) = features.row(far);
    }
    std::vector<int> next(n);
    const double inertia = assign_points(features, centers, next);
    const bool stable = next == out.assignments;
    out.assignments.swap(next);
    out.inertia = inertia;
    if (stable) break;
  }
  out.centers = std::move(centers);
  return out;
}

}  // namespace

KmeansResult cluster_kmeans(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                            int restarts) {
  if (k < 1 || k > features.rows())
    throw std::invalid_argument("cluster_kmeans: k out of range");
  if (restarts < 1) throw std::invalid_argument("cluster_kmeans: restarts must be >= 1");
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, r));
    KmeansResult run = lloyd_once(features, k, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

int estimate_cluster_count(const Eigen::MatrixXd& features, int kmax, int refs,
                           std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (n < 2) return 1;
  if (kmax < 1) throw std::invalid_argument("estimate_cluster_count: kmax must be >= 1");
  if (refs < 2) throw std::invalid_argument("estimate_cluster_count: refs must be >= 2");

  const Eigen::RowVectorXd lo = features.colwise().minCoeff();
  const Eigen::RowVectorXd hi = features.colwise().maxCoeff();
  if ((hi - lo).norm() == 0.0) return 1;  // all points identical

  const int top = std::min<int>(kmax, static_cast<int>(n) - 1);
  const auto safe_log = [](double w) { return std::log(std::max(w, 1e-300)); };

  std::vector<double> gap(top + 1, 0.0), s(top + 1, 0.0);
  for (int k = 1; k <= top; ++k) {
    const double log_w = safe_log(cluster_kmeans(features, k, derive_seed(seed, k)).inertia);
    double mean = 0.0, mean_sq = 0.0;
    for (int r = 0; r < refs; ++r) {
      Rng rng(tag_seed(seed, "gapref", static_cast<std::uint64_t>(k * 1000 + r)));
      Eigen::MatrixXd ref(n, features.cols());
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index d = 0; d < features.cols(); ++d)
          ref(i, d) = rng.uniform(lo[d], hi[d]);
      const double log_ref = safe_log(cluster_kmeans(ref, k, derive_seed(seed, k)).inertia);
      mean += log_ref;
      mean_sq += log_ref * log_ref;
    }
    mean /= refs;
    mean_sq /= refs;
    gap[k] = mean - log_w;
    const double sd = std::sqrt(std::max(mean_sq - mean * mean, 0.0));
    s[k] = sd * std::sqrt(1.0 + 1.0 / refs);
  }

  for (int k = 1; k < top; ++k)
    if (gap[k] >= gap[k + 1] - s[k + 1]) return k;
  return top;
}

}  // namespace swarmdet
