#include "swarmdet/mcgassl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "swarmdet/clustering.hpp"
#include "swarmdet/dense_net.hpp"

namespace swarmdet {

namespace {

// Per-member slices of the newest t_ob steps, one column per window.
struct ScorePack {
  int n = 0;
  int t0 = 0;
  int wins = 0;
  std::vector<int> members;
  std::vector<Eigen::MatrixXd> pos_in;   // 3*(t0+1) x wins, observer side
  std::vector<Eigen::MatrixXd> spd_in;   // 3*t0 x wins, candidate side
  std::vector<Eigen::MatrixXd> anchors;  // 3 x wins, candidate side
  std::vector<Eigen::MatrixXd> target;   // 3 x wins
};

ScorePack pack_observation(const SwarmState& state, const std::vector<int>& members, int t_ob) {
  const int t0 = state.config().t0;
  if (t_ob < t0 + 1) throw std::invalid_argument("score: observation shorter than one window");
  ScorePack pack;
  pack.t0 = t0;
  pack.n = static_cast<int>(members.size());
  pack.wins = t_ob - t0;
  pack.members = members;
  std::sort(pack.members.begin(), pack.members.end());

  const int end = state.clock();
  if (end < t_ob) throw std::invalid_argument("score: observation longer than recorded history");
  const int s0 = end - t_ob;

  pack.pos_in.assign(pack.n, Eigen::MatrixXd(3 * (t0 + 1), pack.wins));
  pack.spd_in.assign(pack.n, Eigen::MatrixXd(3 * t0, pack.wins));
  pack.anchors.assign(pack.n, Eigen::MatrixXd(3, pack.wins));
  pack.target.assign(pack.n, Eigen::MatrixXd(3, pack.wins));

  for (int j = 0; j < pack.n; ++j) {
    const UavRecord& u = state.uav(pack.members[j]);
    if (static_cast<int>(u.speed_history.size()) < end)
      throw std::invalid_argument("score: member lacks history over the observation");
    for (int w = 0; w < pack.wins; ++w) {
      const int t_w = s0 + t0 - 1 + w;
      for (int k = 0; k <= t0; ++k)
        pack.pos_in[j].col(w).segment<3>(3 * k) = u.position_history[t_w - t0 + 1 + k];
      for (int k = 0; k < t0; ++k)
        pack.spd_in[j].col(w).segment<3>(3 * k) = u.speed_history[t_w - t0 + 1 + k];
      pack.anchors[j].col(w) = u.position_history[t_w - t0 + 1];
      pack.target[j].col(w) = u.speed_history[t_w + 1];
    }
  }
  return pack;
}

void standardize_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index w = 0; w < z.cols(); ++w) {
    const double mu = z.col(w).mean();
    const double var = (z.col(w).array() - mu).square().mean();
    if (var <= 1e-12)
      z.col(w).setZero();
    else
      z.col(w) = ((z.col(w).array() - mu) / std::sqrt(var)).matrix();
  }
}

// residual(i, c): summed squared prediction error when candidate c's data is
// fed to the predictor to explain observer i. Diagonal is +inf.
Eigen::MatrixXd residual_matrix(const IfsnParams& gamma, const ScorePack& pack) {
  const int n = pack.n, wins = pack.wins, t0 = pack.t0;
  const int pdim = 3 * (t0 + 1);
  const int zdim = pdim + 3 * t0 + 3;
  Eigen::MatrixXd res = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());

  Eigen::MatrixXd z(zdim, wins * (n - 1));
  DenseCache cache;
  for (int i = 0; i < n; ++i) {
    int block = 0;
    for (int c = 0; c < n; ++c) {
      if (c == i) continue;
      z.block(0, block * wins, pdim, wins) = pack.pos_in[i];
      z.block(pdim, block * wins, 3 * t0, wins) = pack.spd_in[c];
      z.block(pdim + 3 * t0, block * wins, 3, wins) = pack.anchors[c];
      ++block;
    }
    standardize_columns(z);
    gamma.body.forward(z, cache);
    const Eigen::MatrixXd& pred = gamma.body.output(cache);
    block = 0;
    for (int c = 0; c < n; ++c) {
      if (c == i) continue;
      res(i, c) = (pred.middleCols(block * wins, wins) - pack.target[i]).squaredNorm();
      ++block;
    }
  }
  return res;
}

Eigen::MatrixXd residual_matrix(const SpeedPredictor& predictor, const ScorePack& pack) {
  const int n = pack.n, wins = pack.wins, t0 = pack.t0;
  Eigen::MatrixXd res = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
  Eigen::MatrixXd positions(t0 + 1, 3), speeds(t0, 3);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < n; ++c) {
      if (c == i) continue;
      double total = 0.0;
      for (int w = 0; w < wins; ++w) {
        for (int k = 0; k <= t0; ++k)
          positions.row(k) = pack.pos_in[i].col(w).segment<3>(3 * k).transpose();
        for (int k = 0; k < t0; ++k)
          speeds.row(k) = pack.spd_in[c].col(w).segment<3>(3 * k).transpose();
        const Eigen::Vector3d pred =
            predictor(positions, speeds, Eigen::Vector3d(pack.anchors[c].col(w)));
        total += (pred - Eigen::Vector3d(pack.target[i].col(w))).squaredNorm();
      }
      res(i, c) = total;
    }
  }
  return res;
}

OnlineScore score_from_residuals(const Eigen::MatrixXd& res, const ScorePack& pack,
                                 const SwarmState& state, int m_hat) {
  const int n = pack.n;
  if (m_hat < 1 || m_hat > n) throw std::invalid_argument("score: m_hat out of range");

  OnlineScore score;
  score.members = pack.members;
  score.best_fit.assign(n, -1);
  score.votes = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (n < 2) break;
    int best = i == 0 ? 1 : 0;
    for (int c = 0; c < n; ++c)
      if (c != i && res(i, c) < res(i, best)) best = c;
    score.best_fit[i] = pack.members[best];
    score.votes[best] += 1.0;
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (score.votes[a] != score.votes[b]) return score.votes[a] > score.votes[b];
    return pack.members[a] < pack.members[b];
  });
  for (int k = 0; k < m_hat; ++k) score.chosen.push_back(pack.members[order[k]]);
  std::sort(score.chosen.begin(), score.chosen.end());

  // Round dataset: newest window per member, labeled by the chosen head that
  // explains it best (chosen heads label themselves).
  std::vector<int> chosen_slots;
  for (int h : score.chosen)
    chosen_slots.push_back(static_cast<int>(
        std::lower_bound(pack.members.begin(), pack.members.end(), h) - pack.members.begin()));

  score.dataset = observe_windows(state, score.members);
  for (int i = 0; i < n; ++i) {
    if (std::binary_search(score.chosen.begin(), score.chosen.end(), pack.members[i])) {
      score.dataset.labels[i] = pack.members[i];
      continue;
    }
    int best = chosen_slots.front();
    for (int slot : chosen_slots)
      if (res(i, slot) < res(i, best)) best = slot;
    score.dataset.labels[i] = pack.members[best];
  }
  return score;
}

}  // namespace

OnlineScore score_leaders_online(const IfsnParams& gamma, const SwarmState& state,
                                 const std::vector<int>& members, int t_ob, int m_hat) {
  if (gamma.body.layers.empty())
    throw std::invalid_argument("score_leaders_online: predictor not trained");
  const ScorePack pack = pack_observation(state, members, t_ob);
  return score_from_residuals(residual_matrix(gamma, pack), pack, state, m_hat);
}

OnlineScore score_leaders_online(const SpeedPredictor& predictor, const SwarmState& state,
                                 const std::vector<int>& members, int t_ob, int m_hat) {
  const ScorePack pack = pack_observation(state, members, t_ob);
  return score_from_residuals(residual_matrix(predictor, pack), pack, state, m_hat);
}

DetectionLedger run_detection(SwarmState& swarm, const DetectionHyper& hyper,
                              const GruEncoderParams& w_star, std::uint64_t seed,
                              std::vector<RoundDiag>* diags) {
  hyper.mc.validate();
  if (w_star.empty()) throw std::invalid_argument("run_detection: encoder not initialized");

  DetectionLedger ledger;
  ledger.initial_huavs = swarm.live_huavs();
  ledger.total_uavs = swarm.total();
  ledger.complete = ledger.initial_huavs.empty();
  if (ledger.complete) return ledger;

  GruEncoderParams w = w_star;
  IfsnParams gamma;  // shared predictor, carried across clusters and rounds

  for (int r = 1; r <= hyper.mc.max_rounds; ++r) {
    swarm.advance(hyper.mc.t_ob);
    const std::vector<int> members = swarm.live_indices();
    const LabeledWindows observed = observe_windows(swarm, members);
    const Eigen::MatrixXd encoded = encode_all(w, observed);

    const int n = static_cast<int>(members.size());
    const int m_hat = std::min(
        estimate_cluster_count(encoded, hyper.mc.kmax, hyper.mc.refs, tag_seed(seed, "gap", r)),
        n);
    const KmeansResult km = cluster_kmeans(encoded, m_hat, tag_seed(seed, "kmeans", r));

    std::vector<std::vector<int>> predicted(m_hat);
    for (int j = 0; j < n; ++j) predicted[km.assignments[j]].push_back(members[j]);
    std::sort(predicted.begin(), predicted.end());  // canonical order by lowest member

    std::vector<int> candidates;
    int trained = 0;
    for (const auto& cluster : predicted) {
      if (cluster.size() < 2) continue;  // nobody to vote for anyone else
      const LeaderVote vote =
          train_single_cluster(swarm, cluster, hyper.mc.t_ob, hyper.gassl,
                               tag_seed(seed, "gassl", static_cast<std::uint64_t>(r) * 4096 +
                                                           static_cast<std::uint64_t>(trained)),
                               &gamma);
      ++trained;
      const std::vector<int> top = elect_candidates(vote, 1);
      candidates.insert(candidates.end(), top.begin(), top.end());
    }
    std::sort(candidates.begin(), candidates.end());

    OnlineScore score;
    if (trained > 0 && n >= 2)
      score = score_leaders_online(gamma, swarm, members, hyper.mc.t_ob, m_hat);

    const std::vector<int> heads_before = swarm.live_huavs();
    if (!candidates.empty()) swarm.destroy_and_merge(candidates);
    const std::vector<int> survivors = swarm.live_huavs();

    DetectionRound round;
    round.round = r;
    round.candidates = candidates;
    round.survivors = survivors;
    round.finish_time = swarm.clock();
    round.destroyed_fuavs = static_cast<int>(candidates.size()) -
                            static_cast<int>(heads_before.size() - survivors.size());
    ledger.rounds.push_back(std::move(round));
    ledger.complete = survivors.empty();
    validate_ledger(ledger);  // set algebra holds on every produced ledger

    if (diags != nullptr)
      diags->push_back({r, m_hat, members, encoded, km.assignments, score, candidates});

    if (!score.dataset.items.empty())
      w = online_update(w, score.dataset, hyper.mc, tag_seed(seed, "online", r));

    if (ledger.complete) break;
  }
  return ledger;
}

}  // namespace swarmdet
