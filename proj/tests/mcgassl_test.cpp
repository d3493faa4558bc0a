#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "swarmdet/mcgassl.hpp"

using namespace swarmdet;

namespace {

// Noise-free swarm so follower speeds are an exact function of the head's
// newest speed: v = s * norm(v_head).
SwarmState exact_follow_swarm(const std::vector<int>& sizes, std::uint64_t seed) {
  SwarmConfig cfg;
  cfg.cluster_sizes = sizes;
  cfg.ifs.kind = IfsKind::f1;
  cfg.ifs.kappa_n = 0.0;
  return init_swarm(cfg, seed);
}

SpeedPredictor exact_f1_predictor(double speed) {
  return [speed](const Eigen::MatrixXd&, const Eigen::MatrixXd& speeds, const Eigen::Vector3d&) {
    return (speed * norm_or_zero(speeds.row(speeds.rows() - 1).transpose())).eval();
  };
}

}  // namespace

TEST_CASE("online scoring with the exact rule recovers both heads") {
  SwarmState state = exact_follow_swarm({3, 4}, 101);
  const int t_ob = 16;
  state.advance(t_ob);

  const std::vector<int> members = state.live_indices();
  const OnlineScore score =
      score_leaders_online(exact_f1_predictor(state.config().speed), state, members, t_ob, 2);

  REQUIRE(score.members == members);
  CHECK(score.votes.sum() == static_cast<double>(members.size()));

  // every follower's zero-residual vote lands on its true head
  const std::vector<int> heads = state.live_huavs();
  for (std::size_t j = 0; j < members.size(); ++j) {
    const UavRecord& u = state.uav(members[j]);
    if (u.role == UavRole::kFuav) CHECK(score.best_fit[j] == u.cluster_id);
  }
  CHECK(score.chosen == heads);

  // round dataset: labels reproduce the true clusters, heads label themselves
  REQUIRE(score.dataset.size() == static_cast<int>(members.size()));
  CHECK(score.dataset.uavs == members);
  for (std::size_t j = 0; j < members.size(); ++j)
    CHECK(score.dataset.labels[j] == state.uav(members[j]).cluster_id);
}

TEST_CASE("online scoring argument validation") {
  SwarmState state = exact_follow_swarm({2}, 103);
  state.advance(12);
  const std::vector<int> members = state.live_indices();
  const SpeedPredictor pred = exact_f1_predictor(state.config().speed);

  CHECK_THROWS_AS(score_leaders_online(pred, state, members, 12, 0), std::invalid_argument);
  CHECK_THROWS_AS(score_leaders_online(pred, state, members, 12, 4), std::invalid_argument);
  // window needs t0+1 steps; history only covers clock() of them
  CHECK_THROWS_AS(score_leaders_online(pred, state, members, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(score_leaders_online(pred, state, members, state.clock() + 1, 1),
                  std::invalid_argument);

  IfsnParams untrained;
  CHECK_THROWS_AS(score_leaders_online(untrained, state, members, 12, 1), std::invalid_argument);
}

TEST_CASE("batched predictor path agrees with the per-window hook") {
  SwarmState state = exact_follow_swarm({3, 3}, 107);
  const int t_ob = 14;
  state.advance(t_ob);
  const std::vector<int> members = state.live_indices();

  GasslHyper hyper;
  Rng rng(109);
  const IfsnParams gamma = make_ifsn(hyper, state.config().t0, rng);
  const SpeedPredictor wrapped = [&gamma](const Eigen::MatrixXd& positions,
                                          const Eigen::MatrixXd& speeds,
                                          const Eigen::Vector3d& anchor) {
    return ifsn_predict(gamma, positions, speeds, anchor);
  };

  const OnlineScore a = score_leaders_online(gamma, state, members, t_ob, 2);
  const OnlineScore b = score_leaders_online(wrapped, state, members, t_ob, 2);
  CHECK(a.members == b.members);
  CHECK(a.best_fit == b.best_fit);
  CHECK(a.votes == b.votes);
  CHECK(a.chosen == b.chosen);
  CHECK(a.dataset.labels == b.dataset.labels);
}

TEST_CASE("full detection on a single cluster produces a valid deterministic ledger") {
  DetectionHyper hyper;
  hyper.gassl.episodes = 40;
  hyper.gassl.early_stop_window = 10;
  hyper.gassl.query_hidden = 16;
  hyper.gassl.sim_hidden = 16;
  hyper.gassl.ifsn_hidden = 16;
  hyper.mc.t_ob = 12;
  hyper.mc.max_rounds = 4;
  hyper.mc.batch = 4;
  hyper.mc.online_steps = 3;
  hyper.mc.refs = 4;
  hyper.mc.kmax = 4;

  const GruEncoderParams w_star = make_encoder(113);

  auto run = [&](std::vector<RoundDiag>* diags) {
    SwarmState swarm = exact_follow_swarm({4}, 127);
    return run_detection(swarm, hyper, w_star, 131, diags);
  };

  std::vector<RoundDiag> diags;
  const DetectionLedger ledger = run(&diags);
  CHECK_NOTHROW(validate_ledger(ledger));
  CHECK(ledger.total_uavs == 5);
  CHECK(ledger.initial_huavs.size() == 1);
  REQUIRE_FALSE(ledger.rounds.empty());
  CHECK(ledger.rounds.size() <= 4);
  if (ledger.complete) CHECK(ledger.rounds.back().survivors.empty());

  REQUIRE(diags.size() == ledger.rounds.size());
  for (std::size_t r = 0; r < diags.size(); ++r) {
    const RoundDiag& d = diags[r];
    CHECK(d.round == static_cast<int>(r) + 1);
    CHECK(d.encoded.rows() == static_cast<Eigen::Index>(d.members.size()));
    CHECK(d.encoded.cols() == 3);
    CHECK(d.assignments.size() == d.members.size());
    CHECK(d.m_hat >= 1);
    for (int a : d.assignments) {
      CHECK(a >= 0);
      CHECK(a < d.m_hat);
    }
    CHECK(d.candidates == ledger.rounds[r].candidates);
    // destroyed members never reappear in a later round
    for (std::size_t rr = r + 1; rr < diags.size(); ++rr)
      for (int c : d.candidates)
        CHECK(std::find(diags[rr].members.begin(), diags[rr].members.end(), c) ==
              diags[rr].members.end());
  }

  const DetectionLedger replay = run(nullptr);
  CHECK(ledger_to_json(ledger).dump(2) == ledger_to_json(replay).dump(2));
}

TEST_CASE("detection guards: empty swarm and uninitialized encoder") {
  DetectionHyper hyper;
  hyper.mc.t_ob = 6;

  SwarmState empty;
  const DetectionLedger ledger = run_detection(empty, hyper, make_encoder(1), 3);
  CHECK(ledger.complete);
  CHECK(ledger.rounds.empty());
  CHECK(ledger.total_uavs == 0);

  SwarmState swarm = exact_follow_swarm({2}, 137);
  CHECK_THROWS_AS(run_detection(swarm, hyper, GruEncoderParams{}, 3), std::invalid_argument);
}
