#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "swarmdet/dense_net.hpp"

namespace swarmdet {

enum class IfsKind { f1, f2, f3, f4, f5, f6, f7 };

IfsKind ifs_kind_from_string(const std::string& s);
std::string to_string(IfsKind kind);

// Inherent follow strategy: the rule every follower applies to its cluster
// head's recent motion. kappa0..kappa3 weight the speed lags, kappa_p the
// range-keeping pull of f6, kappa_n the noise, kappa_r the range threshold.
struct IfsSpec {
  IfsKind kind = IfsKind::f1;
  double kappa0 = 1.0;
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  double kappa3 = 1.0;
  double kappa_p = 1.0;
  double kappa_n = 0.05;
  double kappa_r = 60.0;
  std::uint64_t noise_seed = 0;
  std::optional<DenseNet> mlp7;  // present iff kind == f7

  void validate() const;  // throws std::invalid_argument on violation
};

// Frozen random network for f7: maps the flattened follower positions,
// leader speeds and leader anchor (30 inputs for t0=4) to a 3-vector that
// the caller then normalizes.
IfsSpec make_f7_spec(std::uint64_t seed, int t0 = 4);

// Unit-safe normalization shared by the whole codebase: vectors shorter
// than the floor collapse to zero instead of dividing by near-zero.
Eigen::Vector3d norm_or_zero(const Eigen::Vector3d& v, double floor = 1e-12);

// One follower speed. Rows of both matrices are time-ordered oldest first:
// follower_positions has t0+1 rows covering [t-t0+1, t+1], leader_speeds
// has t0 rows covering [t-t0+1, t]. noise is a standard-normal draw scaled
// internally by kappa_n. Output is unit length for f1..f6 (zero in the
// degenerate cancellation case); callers scale it to the common speed.
Eigen::Vector3d ifs_speed(const IfsSpec& spec, const Eigen::MatrixXd& follower_positions,
                          const Eigen::MatrixXd& leader_speeds,
                          const Eigen::Vector3d& leader_anchor,
                          const Eigen::Vector3d& noise = Eigen::Vector3d::Zero());

}  // namespace swarmdet
