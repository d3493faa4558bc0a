#include <doctest.h>

#include <sstream>

#include "swarmdet/metrics.hpp"
#include "swarmdet/swarm.hpp"

using namespace swarmdet;

namespace {

SwarmConfig single_cluster(int followers, IfsKind kind = IfsKind::f1, double kappa_n = 0.05) {
  SwarmConfig cfg;
  cfg.cluster_sizes = {followers};
  cfg.ifs.kind = kind;
  cfg.ifs.kappa_n = kappa_n;
  return cfg;
}

}  // namespace

TEST_CASE("init_swarm: sizes, head counts, rejection of bad inputs") {
  SwarmState s = init_swarm(single_cluster(15), 1);
  CHECK(s.total() == 16);
  CHECK(s.live_huavs().size() == 1);
  CHECK(s.clock() == s.config().t0);
  for (const auto& u : s.uavs()) CHECK(u.cluster_id == s.live_huavs().front());

  SwarmConfig two;
  two.cluster_sizes = {2, 2};
  two.ifs.kind = IfsKind::f1;
  SwarmState pair = init_swarm(two, 3);
  CHECK(pair.total() == 6);
  CHECK(pair.live_huavs().size() == 2);

  SwarmConfig bad = single_cluster(1);
  CHECK_THROWS_AS(init_swarm(bad, 1), std::invalid_argument);
  bad.cluster_sizes = {};
  CHECK_THROWS_AS(init_swarm(bad, 1), std::invalid_argument);
}

TEST_CASE("init_swarm: members start inside the placement ball") {
  SwarmState s = init_swarm(single_cluster(10), 4);
  // All pairwise start distances bounded by the ball diameter.
  for (int i = 0; i < s.total(); ++i)
    for (int j = i + 1; j < s.total(); ++j)
      CHECK((s.uav(i).position_history[0] - s.uav(j).position_history[0]).norm() <=
            2.0 * s.config().placement_radius + 1e-9);
}

TEST_CASE("advance keeps kinematics exact and histories aligned") {
  SwarmState s = init_swarm(single_cluster(5, IfsKind::f3), 7);
  s.advance(40);
  CHECK(s.clock() == s.config().t0 + 40);
  for (const auto& u : s.uavs()) {
    REQUIRE(u.position_history.size() == u.speed_history.size() + 1);
    for (size_t t = 0; t + 1 < u.position_history.size(); ++t) {
      // Integration is literal addition, so the rounded sum matches bitwise.
      Eigen::Vector3d step = u.position_history[t] + u.speed_history[t];
      CHECK(step == u.position_history[t + 1]);
    }
  }
}

TEST_CASE("advance: identical seeds give identical trajectories") {
  SwarmConfig cfg = single_cluster(6, IfsKind::f6);
  SwarmState a = init_swarm(cfg, 99);
  SwarmState b = init_swarm(cfg, 99);
  a.advance(30);
  b.advance(30);
  for (int i = 0; i < a.total(); ++i) {
    CHECK(a.uav(i).position_history.back() == b.uav(i).position_history.back());
    CHECK(a.uav(i).speed_history.back() == b.uav(i).speed_history.back());
  }
  SwarmState c = init_swarm(cfg, 100);
  c.advance(30);
  CHECK(a.uav(0).position_history.back() != c.uav(0).position_history.back());
}

TEST_CASE("head speeds have exact magnitude and follow the noise-free fixed point") {
  SwarmConfig cfg = single_cluster(4, IfsKind::f1, 0.0);
  SwarmState s = init_swarm(cfg, 13);
  s.advance(12);
  const int head = s.live_huavs().front();
  for (const auto& u : s.uavs()) {
    for (const auto& v : u.speed_history) CHECK(v.norm() == doctest::Approx(5.0).epsilon(1e-9));
    if (u.role != UavRole::kFuav) continue;
    // Noise-free f1 copies the head's previous speed.
    for (size_t t = s.config().t0; t < u.speed_history.size(); ++t)
      CHECK((u.speed_history[t] - s.uav(head).speed_history[t - 1]).norm() < 1e-9);
  }
}

TEST_CASE("heading walk with zero sigma never turns") {
  SwarmConfig cfg = single_cluster(2, IfsKind::f1, 0.0);
  cfg.heading_sigma = 0.0;
  SwarmState s = init_swarm(cfg, 21);
  s.advance(5);
  const UavRecord& head = s.uav(s.live_huavs().front());
  for (size_t t = 1; t < head.speed_history.size(); ++t)
    CHECK((head.speed_history[t] - head.speed_history[0]).norm() < 1e-9);
}

TEST_CASE("ifs_speed: table rows evaluate exactly") {
  const int t0 = 4;
  Eigen::MatrixXd positions = Eigen::MatrixXd::Zero(t0 + 1, 3);
  Eigen::MatrixXd speeds = Eigen::MatrixXd::Zero(t0, 3);
  Eigen::Vector3d anchor = Eigen::Vector3d::Zero();

  IfsSpec spec;
  spec.kappa_n = 0.0;

  SUBCASE("f1 normalizes the newest head speed") {
    spec.kind = IfsKind::f1;
    speeds.row(t0 - 1) << 3.0, 0.0, 4.0;
    Eigen::Vector3d out = ifs_speed(spec, positions, speeds, anchor);
    CHECK((out - Eigen::Vector3d(0.6, 0.0, 0.8)).norm() < 1e-12);
  }

  SUBCASE("f2 sums the two newest lags") {
    spec.kind = IfsKind::f2;
    speeds.row(t0 - 1) << 1.0, 0.0, 0.0;
    speeds.row(t0 - 2) << 0.0, 1.0, 0.0;
    Eigen::Vector3d out = ifs_speed(spec, positions, speeds, anchor);
    const double r = std::sqrt(0.5);
    CHECK((out - Eigen::Vector3d(r, r, 0.0)).norm() < 1e-12);
  }

  SUBCASE("f3 uses three lags") {
    spec.kind = IfsKind::f3;
    speeds.row(t0 - 1) << 1.0, 0.0, 0.0;
    speeds.row(t0 - 2) << 1.0, 0.0, 0.0;
    speeds.row(t0 - 3) << 0.0, 0.0, 2.0;
    Eigen::Vector3d out = ifs_speed(spec, positions, speeds, anchor);
    CHECK((out - Eigen::Vector3d(2.0, 0.0, 2.0).normalized()).norm() < 1e-12);
  }

  SUBCASE("f4 squares componentwise before combining") {
    spec.kind = IfsKind::f4;
    speeds.row(t0 - 1) << 2.0, -1.0, 0.0;
    speeds.row(t0 - 2) << 0.0, 3.0, 1.0;
    Eigen::Vector3d raw(4.0, 10.0, 1.0);  // squares summed: (4,1,0)+(0,9,1)
    Eigen::Vector3d out = ifs_speed(spec, positions, speeds, anchor);
    CHECK((out - raw.normalized()).norm() < 1e-12);
  }

  SUBCASE("f6 reduces to f1 inside the range threshold") {
    speeds.row(t0 - 1) << 0.0, 5.0, 0.0;
    // Head path: anchor + older speeds keeps it at the origin; follower at 10m.
    positions.row(t0 - 1) << 10.0, 0.0, 0.0;
    spec.kind = IfsKind::f6;
    Eigen::Vector3d near = ifs_speed(spec, positions, speeds, anchor);
    spec.kind = IfsKind::f1;
    Eigen::Vector3d f1 = ifs_speed(spec, positions, speeds, anchor);
    CHECK((near - f1).norm() == 0.0);
  }

  SUBCASE("f6 pulls toward a distant head") {
    speeds.row(t0 - 1) << 0.0, 5.0, 0.0;
    positions.row(t0 - 1) << 100.0, 0.0, 0.0;  // 100m away, threshold 60m
    spec.kind = IfsKind::f6;
    Eigen::Vector3d out = ifs_speed(spec, positions, speeds, anchor);
    Eigen::Vector3d expect = (Eigen::Vector3d(0.0, 5.0, 0.0) + Eigen::Vector3d(-1.0, 0.0, 0.0))
                                 .normalized();
    CHECK((out - expect).norm() < 1e-12);
  }

  SUBCASE("window shape mismatch is rejected") {
    spec.kind = IfsKind::f1;
    Eigen::MatrixXd short_pos = Eigen::MatrixXd::Zero(t0, 3);
    CHECK_THROWS_AS(ifs_speed(spec, short_pos, speeds, anchor), std::invalid_argument);
  }
}

TEST_CASE("ifs_speed: f1..f6 outputs are unit length away from the degenerate floor") {
  Rng rng(31);
  const int t0 = 4;
  for (int rep = 0; rep < 200; ++rep) {
    IfsSpec spec;
    spec.kind = static_cast<IfsKind>(rep % 6);
    Eigen::MatrixXd positions(t0 + 1, 3);
    Eigen::MatrixXd speeds(t0, 3);
    for (int r = 0; r < t0 + 1; ++r) positions.row(r) = (100.0 * rng.normal3()).transpose();
    for (int r = 0; r < t0; ++r) speeds.row(r) = (5.0 * rng.unit3()).transpose();
    Eigen::Vector3d out = ifs_speed(spec, positions, speeds, 100.0 * rng.normal3(), rng.normal3());
    CHECK(out.norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("ifs_speed: degenerate cancellation returns the zero vector") {
  IfsSpec spec;
  spec.kind = IfsKind::f1;
  spec.kappa_n = 0.0;
  Eigen::MatrixXd positions = Eigen::MatrixXd::Zero(5, 3);
  Eigen::MatrixXd speeds = Eigen::MatrixXd::Zero(4, 3);
  CHECK(ifs_speed(spec, positions, speeds, Eigen::Vector3d::Zero()).norm() == 0.0);
}

TEST_CASE("ifs_speed: f1 ignores follower positions and stale head speeds") {
  Rng rng(77);
  IfsSpec spec;
  spec.kind = IfsKind::f1;
  const int t0 = 4;
  Eigen::MatrixXd positions(t0 + 1, 3), speeds(t0, 3);
  for (int r = 0; r < t0 + 1; ++r) positions.row(r) = rng.normal3().transpose();
  for (int r = 0; r < t0; ++r) speeds.row(r) = rng.normal3().transpose();
  Eigen::Vector3d anchor = rng.normal3();
  Eigen::Vector3d noise = rng.normal3();
  Eigen::Vector3d base = ifs_speed(spec, positions, speeds, anchor, noise);

  Eigen::MatrixXd positions2 = positions * 3.0;
  Eigen::MatrixXd speeds2 = speeds;
  for (int r = 0; r < t0 - 1; ++r) speeds2.row(r) = rng.normal3().transpose();  // stale lags only
  Eigen::Vector3d out = ifs_speed(spec, positions2, speeds2, anchor + noise, noise);
  CHECK(out == base);
}

TEST_CASE("f7 requires its frozen network and stays deterministic") {
  IfsSpec missing;
  missing.kind = IfsKind::f7;
  CHECK_THROWS_AS(missing.validate(), std::invalid_argument);

  IfsSpec f7a = make_f7_spec(42);
  IfsSpec f7b = make_f7_spec(42);
  f7a.validate();
  Rng rng(1);
  Eigen::MatrixXd positions(5, 3), speeds(4, 3);
  for (int r = 0; r < 5; ++r) positions.row(r) = (50.0 * rng.normal3()).transpose();
  for (int r = 0; r < 4; ++r) speeds.row(r) = (5.0 * rng.unit3()).transpose();
  Eigen::Vector3d anchor = 50.0 * rng.normal3();
  Eigen::Vector3d a = ifs_speed(f7a, positions, speeds, anchor);
  Eigen::Vector3d b = ifs_speed(f7b, positions, speeds, anchor);
  CHECK(a == b);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));

  SwarmConfig cfg;
  cfg.cluster_sizes = {4};
  cfg.ifs = make_f7_spec(42);
  SwarmState s = init_swarm(cfg, 5);
  s.advance(10);
  CHECK(s.clock() == 14);
}

TEST_CASE("topology_window: shape, reconstruction, and error cases") {
  SwarmState s = init_swarm(single_cluster(5, IfsKind::f2), 17);
  s.advance(20);
  std::vector<int> members = s.live_indices();
  const int t = s.clock() - 1;
  TopologyWindow win = s.topology_window(members, t);
  CHECK(win.t0() == 4);
  CHECK(win.members.size() == 6);

  // Anchor plus partial speed sums reproduces the recorded positions bitwise.
  for (size_t j = 0; j < win.members.size(); ++j) {
    const UavRecord& u = s.uav(win.members[j]);
    Eigen::Vector3d p = win.anchors[j];
    for (int k = 0; k < win.t0(); ++k) {
      CHECK(p == u.position_history[t - win.t0() + 1 + k]);
      p += win.speeds[j].row(k).transpose();
    }
    CHECK(p == u.position_history[t + 1]);
  }

  CHECK_THROWS_AS(s.topology_window(members, 2), std::invalid_argument);
  CHECK_THROWS_AS(s.topology_window(members, s.clock()), std::invalid_argument);
}

TEST_CASE("destroy_and_merge: reassignment, orphaning, error handling") {
  SwarmConfig cfg;
  cfg.cluster_sizes = {3, 3};
  cfg.ifs.kind = IfsKind::f1;
  SwarmState s = init_swarm(cfg, 8);
  s.advance(5);
  const std::vector<int> heads = s.live_huavs();
  REQUIRE(heads.size() == 2);

  const std::vector<int> members_before = s.cluster_members(heads[0]);
  s.destroy_and_merge({heads[0]});
  CHECK(s.live_huavs() == std::vector<int>{heads[1]});
  for (int idx : members_before) {
    if (idx == heads[0]) {
      CHECK(s.uav(idx).role == UavRole::kDestroyed);
      CHECK(s.uav(idx).destroyed_at == s.clock());
    } else {
      CHECK(s.uav(idx).cluster_id == heads[1]);  // only one head remains
    }
  }

  // Destroying a follower shrinks the cluster without relabeling anyone.
  const std::vector<int> cluster = s.cluster_members(heads[1]);
  int follower = -1;
  for (int idx : cluster)
    if (idx != heads[1]) follower = idx;
  REQUIRE(follower >= 0);
  s.destroy_and_merge({follower});
  CHECK(s.cluster_members(heads[1]).size() == cluster.size() - 1);

  CHECK_THROWS_AS(s.destroy_and_merge({follower}), std::invalid_argument);

  s.destroy_and_merge({heads[1]});
  CHECK(s.live_huavs().empty());
  for (const auto& u : s.uavs())
    if (u.role == UavRole::kFuav) CHECK(u.cluster_id == -1);
}

TEST_CASE("destroyed members freeze their histories and leave windows invalid") {
  SwarmState s = init_swarm(single_cluster(4), 3);
  s.advance(10);
  std::vector<int> members = s.live_indices();
  int victim = members[1];
  const size_t frozen = s.uav(victim).position_history.size();
  s.destroy_and_merge({victim});
  s.advance(5);
  CHECK(s.uav(victim).position_history.size() == frozen);
  CHECK_THROWS_AS(s.topology_window(members, s.clock() - 1), std::invalid_argument);
}

TEST_CASE("objective_single follows the hit-minus-size rule") {
  CHECK(objective_single({7}, 7) == 0.0);
  CHECK(objective_single({7, 3}, 7) == -1.0);
  CHECK(objective_single({}, 7) == 0.0);
  CHECK(objective_single({1, 2, 3}, 9) == -3.0);
}

TEST_CASE("objective_multi and ledger validation") {
  DetectionLedger ledger;
  ledger.initial_huavs = {2, 5, 9};
  ledger.total_uavs = 82;

  SUBCASE("single clean round") {
    ledger.rounds.push_back({1, {2, 5, 9}, {}, 104, 0});
    ledger.complete = true;
    auto out = objective_multi(ledger, 82);
    CHECK(out.j_m == doctest::Approx(1.0));
    CHECK(out.redundancy == 0.0);
  }

  SUBCASE("redundant kills accumulate") {
    ledger.rounds.push_back({1, {2, 3, 4, 5, 11}, {9}, 104, 3});
    ledger.rounds.push_back({2, {7, 9, 13}, {}, 204, 2});
    ledger.complete = true;
    auto out = objective_multi(ledger, 82);
    CHECK(out.redundancy == doctest::Approx(5.0 / 82.0));
    CHECK(out.j_m == doctest::Approx(2.0 + 5.0 / 82.0));
  }

  SUBCASE("incomplete ledgers are rejected") {
    ledger.rounds.push_back({1, {2}, {5, 9}, 104, 0});
    ledger.complete = false;
    CHECK_THROWS_AS(objective_multi(ledger, 82), std::invalid_argument);
  }

  SUBCASE("survivor algebra violations are caught") {
    ledger.rounds.push_back({1, {2}, {5}, 104, 0});  // 9 vanished without a candidate
    ledger.complete = false;
    CHECK_THROWS_AS(validate_ledger(ledger), std::logic_error);
  }

  SUBCASE("double destruction is caught") {
    ledger.rounds.push_back({1, {2}, {5, 9}, 104, 0});
    ledger.rounds.push_back({2, {2, 5}, {9}, 204, 1});
    CHECK_THROWS_AS(validate_ledger(ledger), std::logic_error);
  }
}

TEST_CASE("clustering purity matches hand-counted overlaps") {
  CHECK(clustering_purity({0, 0, 1, 1}, {4, 4, 9, 9}) == 1.0);
  CHECK(clustering_purity({0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}) == 0.5);
  CHECK(clustering_purity({0, 1, 2, 3}, {7, 7, 8, 8}) == 1.0);
  CHECK(clustering_purity({0, 0, 1}, {5, 6, 6}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("trajectory CSV is stable, CRLF-delimited, and kinematically consistent") {
  SwarmState s = init_swarm(single_cluster(3), 12);
  s.advance(6);
  std::ostringstream first, second;
  s.trajectory_csv(first);
  s.trajectory_csv(second);
  CHECK(first.str() == second.str());
  CHECK(first.str().substr(0, 44) == "t,uav_index,role,cluster_id,x,y,z,vx,vy,vz\r\n");
  const std::string& text = first.str();
  size_t rows = 0;
  for (size_t pos = 0; (pos = text.find("\r\n", pos)) != std::string::npos; pos += 2) ++rows;
  CHECK(rows == 1 + 4 * (s.config().t0 + 6));  // header + speeds per UAV

  nlohmann::json snap = s.snapshot_json();
  CHECK(snap["total"] == 4);
  CHECK(snap["clock"] == s.clock());
  CHECK(snap["uavs"].size() == 4);
}
