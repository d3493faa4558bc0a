#include "swarmdet/swarm.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace swarmdet {

std::string to_string(UavRole role) {
  switch (role) {
    case UavRole::kHuav: return "HUAV";
    case UavRole::kFuav: return "FUAV";
    case UavRole::kDestroyed: return "DESTROYED";
  }
  throw std::logic_error("bad UavRole");
}

int TopologyWindow::member_slot(int uav_index) const {
  auto it = std::lower_bound(members.begin(), members.end(), uav_index);
  if (it == members.end() || *it != uav_index) return -1;
  return static_cast<int>(it - members.begin());
}

std::vector<int> SwarmState::live_indices() const {
  std::vector<int> out;
  for (const auto& u : uavs_)
    if (u.role != UavRole::kDestroyed) out.push_back(u.index);
  return out;
}

std::vector<int> SwarmState::cluster_members(int huav) const {
  std::vector<int> out;
  for (const auto& u : uavs_)
    if (u.role != UavRole::kDestroyed && (u.index == huav || u.cluster_id == huav))
      out.push_back(u.index);
  return out;
}

Eigen::Vector3d SwarmState::huav_speed_step(int huav) {
  const Eigen::Vector3d g = streams_[huav].normal3();
  return config_.speed * norm_or_zero(headings_[huav] + config_.heading_sigma * g);
}

void SwarmState::step_once() {
  const int s = static_cast<int>(uavs_.front().position_history.size()) - 1;  // new speed index
  std::vector<Eigen::Vector3d> new_speeds(uavs_.size());
  const int t0 = config_.t0;

  for (auto& u : uavs_) {
    if (u.role == UavRole::kDestroyed) continue;
    if (u.role == UavRole::kHuav) {
      new_speeds[u.index] = huav_speed_step(u.index);
      continue;
    }
    if (u.cluster_id < 0) throw std::logic_error("advance: orphaned follower cannot move");
    const UavRecord& head = uavs_[u.cluster_id];
    if (head.role != UavRole::kHuav) throw std::logic_error("advance: follower's head not live");

    Eigen::MatrixXd positions(t0 + 1, 3);  // follower, [s-t0, s]
    for (int k = 0; k <= t0; ++k) positions.row(k) = u.position_history[s - t0 + k].transpose();
    Eigen::MatrixXd leader_speeds(t0, 3);  // head, [s-t0, s-1]
    for (int k = 0; k < t0; ++k) leader_speeds.row(k) = head.speed_history[s - t0 + k].transpose();
    const Eigen::Vector3d anchor = head.position_history[s - t0];
    const Eigen::Vector3d noise = streams_[u.index].normal3();
    new_speeds[u.index] =
        config_.speed * ifs_speed(config_.ifs, positions, leader_speeds, anchor, noise);
  }

  for (auto& u : uavs_) {
    if (u.role == UavRole::kDestroyed) continue;
    headings_[u.index] = new_speeds[u.index];
    u.speed_history.push_back(new_speeds[u.index]);
    u.position_history.push_back(u.position_history.back() + new_speeds[u.index]);
  }
  ++clock_;
}

void SwarmState::advance(int steps) {
  if (steps < 1) throw std::invalid_argument("advance: steps must be >= 1");
  for (int k = 0; k < steps; ++k) step_once();
}

TopologyWindow SwarmState::topology_window(const std::vector<int>& member_set, int t) const {
  const int t0 = config_.t0;
  if (t < t0 - 1) throw std::invalid_argument("topology_window: insufficient history before t");
  TopologyWindow win;
  win.members = member_set;
  std::sort(win.members.begin(), win.members.end());
  win.t = t;
  win.anchors.reserve(win.members.size());
  win.speeds.reserve(win.members.size());
  for (int idx : win.members) {
    const UavRecord& u = uavs_.at(idx);
    if (!u.live_at(t) || static_cast<int>(u.speed_history.size()) <= t)
      throw std::invalid_argument("topology_window: member lacks history at t");
    win.anchors.push_back(u.position_history[t - t0 + 1]);
    Eigen::MatrixXd v(t0, 3);
    for (int k = 0; k < t0; ++k) v.row(k) = u.speed_history[t - t0 + 1 + k].transpose();
    win.speeds.push_back(std::move(v));
  }
  return win;
}

void SwarmState::destroy_and_merge(const std::vector<int>& candidates) {
  for (int idx : candidates) {
    if (idx < 0 || idx >= total() || uavs_[idx].role == UavRole::kDestroyed)
      throw std::invalid_argument("destroy_and_merge: candidate not live");
  }
  for (int idx : candidates) {
    UavRecord& u = uavs_[idx];
    if (u.role == UavRole::kHuav)
      live_huavs_.erase(std::remove(live_huavs_.begin(), live_huavs_.end(), idx),
                        live_huavs_.end());
    u.role = UavRole::kDestroyed;
    u.destroyed_at = clock_;
  }
  for (auto& u : uavs_) {
    if (u.role != UavRole::kFuav) continue;
    if (u.cluster_id >= 0 && uavs_[u.cluster_id].role == UavRole::kHuav) continue;
    if (live_huavs_.empty()) {
      u.cluster_id = -1;  // orphaned; caller terminates the run
      continue;
    }
    const Eigen::Vector3d& p = u.position_history.back();
    double best = std::numeric_limits<double>::infinity();
    int best_head = live_huavs_.front();
    for (int h : live_huavs_) {
      double d = (uavs_[h].position_history.back() - p).norm();
      if (d < best) {
        best = d;
        best_head = h;
      }
    }
    u.cluster_id = best_head;
  }
}

nlohmann::json SwarmState::snapshot_json() const {
  nlohmann::json uavs = nlohmann::json::array();
  for (const auto& u : uavs_) {
    const Eigen::Vector3d& p = u.position_history.back();
    nlohmann::json rec = {
        {"index", u.index},
        {"role", to_string(u.role)},
        {"cluster_id", u.cluster_id},
        {"position", {p.x(), p.y(), p.z()}},
        {"history_length", u.position_history.size()},
    };
    if (u.destroyed_at >= 0) rec["destroyed_at"] = u.destroyed_at;
    uavs.push_back(std::move(rec));
  }
  return {{"clock", clock_},
          {"total", total()},
          {"live_huavs", live_huavs_},
          {"ifs", to_string(config_.ifs.kind)},
          {"uavs", std::move(uavs)}};
}

void SwarmState::trajectory_csv(std::ostream& out) const {
  auto put = [&out](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  out << "t,uav_index,role,cluster_id,x,y,z,vx,vy,vz\r\n";
  for (const auto& u : uavs_) {
    const std::string role = to_string(u.original_role);
    for (size_t t = 0; t < u.speed_history.size(); ++t) {
      out << t << ',' << u.index << ',' << role << ',' << u.cluster_id << ',';
      const Eigen::Vector3d& p = u.position_history[t];
      const Eigen::Vector3d& v = u.speed_history[t];
      put(p.x()); out << ','; put(p.y()); out << ','; put(p.z()); out << ',';
      put(v.x()); out << ','; put(v.y()); out << ','; put(v.z());
      out << "\r\n";
    }
  }
}

SwarmState init_swarm(const SwarmConfig& config, std::uint64_t seed) {
  config.ifs.validate();
  if (config.cluster_sizes.empty()) throw std::invalid_argument("init_swarm: no clusters");
  for (int m : config.cluster_sizes)
    if (m < 2) throw std::invalid_argument("init_swarm: every cluster needs at least 2 followers");
  if ((config.arena.array() <= 0.0).any())
    throw std::invalid_argument("init_swarm: arena extents must be positive");

  SwarmState state;
  state.config_ = config;
  int total = 0;
  for (int m : config.cluster_sizes) total += m + 1;
  state.uavs_.resize(total);
  state.headings_.resize(total);
  state.streams_.reserve(total);
  for (int i = 0; i < total; ++i) state.streams_.emplace_back(derive_seed(seed, i));

  Rng place(tag_seed(seed, "placement"));
  int base = 0;
  for (size_t j = 0; j < config.cluster_sizes.size(); ++j) {
    const int size = config.cluster_sizes[j] + 1;
    Eigen::Vector3d center;
    for (int d = 0; d < 3; ++d) {
      const double margin = std::min(config.placement_radius, config.arena[d] / 2.0);
      center[d] = place.uniform(margin, config.arena[d] - margin);
    }
    // Head slot drawn uniformly inside the cluster block so head identity
    // never coincides with an index tie-break.
    const int head = base + place.uniform_int(size);
    for (int k = 0; k < size; ++k) {
      UavRecord& u = state.uavs_[base + k];
      u.index = base + k;
      u.role = (base + k == head) ? UavRole::kHuav : UavRole::kFuav;
      u.original_role = u.role;
      u.cluster_id = head;
      const double radius = config.placement_radius * std::cbrt(place.uniform());
      u.position_history.push_back(center + radius * place.unit3());
      state.headings_[base + k] = config.speed * state.streams_[base + k].unit3();
    }
    state.live_huavs_.push_back(head);
    base += size;
  }
  std::sort(state.live_huavs_.begin(), state.live_huavs_.end());

  // Warm-up: every UAV walks like a head so all initial windows are defined.
  for (int k = 0; k < config.t0; ++k) {
    for (auto& u : state.uavs_) {
      const Eigen::Vector3d v = state.huav_speed_step(u.index);
      state.headings_[u.index] = v;
      u.speed_history.push_back(v);
      u.position_history.push_back(u.position_history.back() + v);
    }
    ++state.clock_;
  }
  return state;
}

}  // namespace swarmdet
