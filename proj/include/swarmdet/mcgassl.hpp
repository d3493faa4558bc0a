#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "swarmdet/gassl.hpp"
#include "swarmdet/metric_learn.hpp"
#include "swarmdet/metrics.hpp"

namespace swarmdet {

// Residual-vote leader scoring over the newest t_ob observation steps. Each
// member votes for the peer whose (speeds, anchor) data best predicts its own
// next speeds through the trained predictor; the top m_hat voted members
// become the labeled heads of the round dataset.
struct OnlineScore {
  std::vector<int> members;   // ascending UAV indices
  std::vector<int> best_fit;  // per member: the peer it voted for
  Eigen::VectorXd votes;      // per member slot, sums to member count
  std::vector<int> chosen;    // top-m_hat voted heads, ascending
  LabeledWindows dataset;     // newest window per member, labeled by chosen head
};

OnlineScore score_leaders_online(const IfsnParams& gamma, const SwarmState& state,
                                 const std::vector<int>& members, int t_ob, int m_hat);

// Test hook: same scoring, arbitrary predictor in place of the trained one.
// positions: observer (t0+1)x3 window; speeds/anchor: candidate data.
using SpeedPredictor =
    std::function<Eigen::Vector3d(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& speeds,
                                  const Eigen::Vector3d& anchor)>;

OnlineScore score_leaders_online(const SpeedPredictor& predictor, const SwarmState& state,
                                 const std::vector<int>& members, int t_ob, int m_hat);

struct DetectionHyper {
  GasslHyper gassl;
  McHyper mc;
};

// Everything one detection round produced, for reporting.
struct RoundDiag {
  int round = 0;
  int m_hat = 0;
  std::vector<int> members;
  Eigen::MatrixXd encoded;     // one feature row per member
  std::vector<int> assignments;
  OnlineScore score;
  std::vector<int> candidates;
};

// Full multi-cluster detection: per round, observe t_ob fresh steps, encode
// and cluster the members, run per-cluster head detection (top 1), destroy
// the candidates, re-score online and refine the encoder. Stops when every
// head is gone or max_rounds is exhausted (ledger then marked incomplete).
// The shared predictor and the encoder persist across rounds.
DetectionLedger run_detection(SwarmState& swarm, const DetectionHyper& hyper,
                              const GruEncoderParams& w_star, std::uint64_t seed,
                              std::vector<RoundDiag>* diags = nullptr);

}  // namespace swarmdet
