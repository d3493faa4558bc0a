#include "swarmdet/ifs.hpp"

#include <stdexcept>

#include "swarmdet/rng.hpp"

namespace swarmdet {

IfsKind ifs_kind_from_string(const std::string& s) {
  if (s == "f1") return IfsKind::f1;
  if (s == "f2") return IfsKind::f2;
  if (s == "f3") return IfsKind::f3;
  if (s == "f4") return IfsKind::f4;
  if (s == "f5") return IfsKind::f5;
  if (s == "f6") return IfsKind::f6;
  if (s == "f7") return IfsKind::f7;
  throw std::invalid_argument("unknown follow strategy: " + s);
}

std::string to_string(IfsKind kind) {
  switch (kind) {
    case IfsKind::f1: return "f1";
    case IfsKind::f2: return "f2";
    case IfsKind::f3: return "f3";
    case IfsKind::f4: return "f4";
    case IfsKind::f5: return "f5";
    case IfsKind::f6: return "f6";
    case IfsKind::f7: return "f7";
  }
  throw std::logic_error("bad IfsKind");
}

void IfsSpec::validate() const {
  if (kappa_r <= 0.0) throw std::invalid_argument("IfsSpec: kappa_r must be positive");
  if (kappa_n < 0.0) throw std::invalid_argument("IfsSpec: kappa_n must be non-negative");
  if ((kind == IfsKind::f7) != mlp7.has_value())
    throw std::invalid_argument("IfsSpec: mlp7 must be present exactly for f7");
}

IfsSpec make_f7_spec(std::uint64_t seed, int t0) {
  IfsSpec spec;
  spec.kind = IfsKind::f7;
  spec.noise_seed = seed;
  int in_dim = 3 * (t0 + 1) + 3 * t0 + 3;
  Rng rng(tag_seed(seed, "f7"));
  spec.mlp7 = DenseNet::xavier({in_dim, 32, 32, 3},
                               {Activation::kTanh, Activation::kTanh, Activation::kIdentity}, rng);
  return spec;
}

Eigen::Vector3d norm_or_zero(const Eigen::Vector3d& v, double floor) {
  double n = v.norm();
  if (n < floor) return Eigen::Vector3d::Zero();
  return v / n;
}

namespace {

// Row r of a time-ordered matrix holds the entry at lag (rows-1-r); lag 0 is
// the newest row.
Eigen::Vector3d at_lag(const Eigen::MatrixXd& m, int lag) {
  return m.row(m.rows() - 1 - lag).transpose();
}

}  // namespace

Eigen::Vector3d ifs_speed(const IfsSpec& spec, const Eigen::MatrixXd& follower_positions,
                          const Eigen::MatrixXd& leader_speeds, const Eigen::Vector3d& leader_anchor,
                          const Eigen::Vector3d& noise) {
  const Eigen::Index t0 = leader_speeds.rows();
  if (follower_positions.rows() != t0 + 1 || follower_positions.cols() != 3 ||
      leader_speeds.cols() != 3)
    throw std::invalid_argument("ifs_speed: window shape mismatch");

  const Eigen::Vector3d noise_term = spec.kappa_n * noise;
  const double kappas[4] = {spec.kappa0, spec.kappa1, spec.kappa2, spec.kappa3};

  switch (spec.kind) {
    case IfsKind::f1:
      return norm_or_zero(spec.kappa0 * at_lag(leader_speeds, 0) + noise_term);
    case IfsKind::f2:
    case IfsKind::f3: {
      const int lags = spec.kind == IfsKind::f2 ? 2 : 3;
      Eigen::Vector3d acc = noise_term;
      for (int tau = 0; tau < lags; ++tau) acc += kappas[tau] * at_lag(leader_speeds, tau);
      return norm_or_zero(acc);
    }
    case IfsKind::f4:
    case IfsKind::f5: {
      const int lags = spec.kind == IfsKind::f4 ? 2 : 3;
      Eigen::Vector3d acc = noise_term;
      for (int tau = 0; tau < lags; ++tau) {
        Eigen::Vector3d v = at_lag(leader_speeds, tau);
        acc += kappas[tau] * v.cwiseProduct(v);
      }
      return norm_or_zero(acc);
    }
    case IfsKind::f6: {
      // Leader position at the window end, rebuilt from the anchor plus all
      // speeds except the newest.
      Eigen::Vector3d leader_pos = leader_anchor;
      for (Eigen::Index r = 0; r + 1 < t0; ++r) leader_pos += leader_speeds.row(r).transpose();
      const Eigen::Vector3d follower_pos = at_lag(follower_positions, 1);  // p_{i,t}
      const Eigen::Vector3d gap = leader_pos - follower_pos;
      Eigen::Vector3d acc = spec.kappa0 * at_lag(leader_speeds, 0) + noise_term;
      const double dist = gap.norm();
      if (dist > spec.kappa_r) acc += spec.kappa_p * gap / dist;
      return norm_or_zero(acc);
    }
    case IfsKind::f7: {
      if (!spec.mlp7.has_value()) throw std::invalid_argument("ifs_speed: f7 without network");
      Eigen::VectorXd in(3 * (t0 + 1) + 3 * t0 + 3);
      Eigen::Index k = 0;
      for (Eigen::Index r = 0; r < follower_positions.rows(); ++r)
        for (int c = 0; c < 3; ++c) in[k++] = follower_positions(r, c);
      for (Eigen::Index r = 0; r < t0; ++r)
        for (int c = 0; c < 3; ++c) in[k++] = leader_speeds(r, c);
      in.tail(3) = leader_anchor;
      Eigen::Vector3d raw = spec.mlp7->eval(in);
      return norm_or_zero(raw);
    }
  }
  throw std::logic_error("bad IfsKind");
}

}  // namespace swarmdet
