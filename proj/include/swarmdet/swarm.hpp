#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "swarmdet/ifs.hpp"
#include "swarmdet/rng.hpp"

namespace swarmdet {

enum class UavRole { kHuav, kFuav, kDestroyed };

std::string to_string(UavRole role);

struct UavRecord {
  int index = 0;
  UavRole role = UavRole::kFuav;           // current
  UavRole original_role = UavRole::kFuav;  // role at spawn, survives destruction
  int cluster_id = -1;  // index of the owning head; -1 once orphaned
  int destroyed_at = -1;  // clock value at destruction, -1 while alive
  std::vector<Eigen::Vector3d> position_history;
  std::vector<Eigen::Vector3d> speed_history;

  bool live_at(int t) const { return destroyed_at < 0 || destroyed_at > t; }
};

struct SwarmConfig {
  std::vector<int> cluster_sizes;             // m_j followers per cluster, each >= 2
  Eigen::Vector3d arena{1000.0, 1000.0, 100.0};  // meters
  IfsSpec ifs;
  double speed = 5.0;        // common speed magnitude s_h, m/step
  double heading_sigma = 0.3;  // head random-walk perturbation
  double placement_radius = 50.0;
  int t0 = 4;
};

// Time-series topology matrix for one cluster: per member the anchor
// position p_{i,t-T0+1} and the T0 speeds covering [t-T0+1, t], rows oldest
// first. Everything needed to rebuild positions up to t+1.
struct TopologyWindow {
  std::vector<int> members;                  // ascending UAV indices
  std::vector<Eigen::Vector3d> anchors;      // per member
  std::vector<Eigen::MatrixXd> speeds;       // per member, t0 x 3
  int t = 0;                                 // window end time

  int t0() const { return speeds.empty() ? 0 : static_cast<int>(speeds.front().rows()); }
  int member_slot(int uav_index) const;      // position in members, -1 if absent
};

// Two-level swarm ground truth. Heads walk independently; followers apply
// the configured follow strategy to their head's recent motion. Histories
// are exact: position[t+1] = position[t] + speed[t] bitwise.
class SwarmState {
 public:
  SwarmState() = default;

  const SwarmConfig& config() const { return config_; }
  const std::vector<UavRecord>& uavs() const { return uavs_; }
  const UavRecord& uav(int i) const { return uavs_.at(i); }
  const std::vector<int>& live_huavs() const { return live_huavs_; }
  int clock() const { return clock_; }
  int total() const { return static_cast<int>(uavs_.size()); }

  std::vector<int> live_indices() const;
  // The head plus its live followers, ascending.
  std::vector<int> cluster_members(int huav) const;

  // Next head speed by the smoothed random walk; draws from the head's
  // stream, so calls are part of the deterministic step order.
  Eigen::Vector3d huav_speed_step(int huav);

  void advance(int steps);

  TopologyWindow topology_window(const std::vector<int>& member_set, int t) const;

  void destroy_and_merge(const std::vector<int>& candidates);

  nlohmann::json snapshot_json() const;
  void trajectory_csv(std::ostream& out) const;

  friend SwarmState init_swarm(const SwarmConfig& config, std::uint64_t seed);

 private:
  SwarmConfig config_;
  std::vector<UavRecord> uavs_;
  std::vector<int> live_huavs_;  // ascending
  std::vector<Rng> streams_;     // one per UAV
  std::vector<Eigen::Vector3d> headings_;  // last speed, feeds the head walk
  int clock_ = 0;

  void step_once();
};

// Places one head and m_j followers per cluster inside a placement ball,
// then runs t0 warm-up steps (head walk for everyone) so the first
// observation window is fully populated. clock() == t0 afterwards.
SwarmState init_swarm(const SwarmConfig& config, std::uint64_t seed);

}  // namespace swarmdet
