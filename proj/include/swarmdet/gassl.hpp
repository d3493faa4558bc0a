#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "swarmdet/dense_net.hpp"
#include "swarmdet/diff.hpp"
#include "swarmdet/swarm.hpp"

namespace swarmdet {

struct GasslHyper {
  int episodes = 300;           // training episodes per observer
  double learning_rate = 1e-2;  // applied to the window-mean loss gradient
  int key_dim = 8;
  int query_hidden = 32;
  int sim_hidden = 32;
  int ifsn_hidden = 32;
  int top_k = 1;
  double early_stop_eps = 1e-6;  // stop when the batch loss improves less
  int early_stop_window = 20;    // than this over this many episodes
};

// Per-observer attention parameters: one query net, one similarity net and
// one key matrix per head. Heads 0..t0-1 score member speeds at increasing
// lags (0 = newest); head t0 scores member anchor positions.
struct AgatParams {
  DenseNet query_net;                  // (3*t0+3) -> key_dim
  std::vector<DenseNet> sim_heads;     // t0+1 nets, (2*key_dim) -> 1
  std::vector<Eigen::MatrixXd> keys;   // t0+1 matrices, key_dim x 3

  int t0() const { return static_cast<int>(sim_heads.size()) - 1; }
  int key_dim() const { return static_cast<int>(keys.front().rows()); }
};

// Shared predictor of the next observer speed from its position window plus
// the attention-aggregated neighbor data. One instance per training run.
struct IfsnParams {
  DenseNet body;  // 3*(t0+1) + 3*t0 + 3 -> 3
};

struct GasslModel {
  AgatParams agat;
  IfsnParams ifsn;
};

AgatParams make_agat(const GasslHyper& hyper, int t0, Rng& rng);
IfsnParams make_ifsn(const GasslHyper& hyper, int t0, Rng& rng);

// Attention of one observer over one window: values row l = head l's
// distribution over members; weights = column mean over heads.
struct AttentionTensor {
  Eigen::MatrixXd values;   // (t0+1) x n
  Eigen::VectorXd weights;  // n
};

AttentionTensor attention_forward(const AgatParams& params, const TopologyWindow& window,
                                  int observer);

struct Aggregated {
  Eigen::MatrixXd vhat;   // t0 x 3, rows oldest first
  Eigen::Vector3d phat;
};

Aggregated aggregate(const AttentionTensor& att, const TopologyWindow& window);

// positions: (t0+1) x 3 oldest first; standardizes the flattened
// concatenation to zero mean / unit variance, then evaluates the body.
Eigen::Vector3d ifsn_predict(const IfsnParams& gamma, const Eigen::MatrixXd& positions,
                             const Eigen::MatrixXd& vhat, const Eigen::Vector3d& phat);

// Sum of squared prediction errors over consecutive windows. windows[b]
// supplies the inputs of term b; the target speed is the newest row of
// windows[b+1], so windows.size() >= 2 and the final window only provides
// the last target. Positions are rebuilt from anchors + speed sums, which
// matches the simulator bitwise.
double batch_loss(const GasslModel& model, const std::vector<TopologyWindow>& windows,
                  int observer);

// Test hooks: replace the attention path and/or the trained predictor while
// keeping the loss assembly identical. attention returns the (t0+1) x n
// row-stochastic matrix for the observer; predictor maps the aggregated
// inputs straight to a speed.
struct GasslOracles {
  std::function<Eigen::MatrixXd(const TopologyWindow&, int observer_slot)> attention;
  std::function<Eigen::Vector3d(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& vhat,
                                const Eigen::Vector3d& phat)>
      predictor;
};

double batch_loss_injected(const std::vector<TopologyWindow>& windows, int observer,
                           const GasslOracles& oracles);

struct GasslGrads {
  DenseGrads query;
  std::vector<DenseGrads> sims;
  std::vector<Eigen::MatrixXd> keys;
  DenseGrads ifsn;

  void set_zero();
};

GasslGrads make_grads(const GasslModel& model);

// Parameter views in a stable order; the model and gradient lists pair up
// element for element, as sgd_apply and check_gradient expect.
std::vector<ParamRef> param_refs(GasslModel& model);
std::vector<ParamRef> param_refs(GasslGrads& grads);

// batch_loss plus its gradient (of the summed loss) accumulated into grads,
// which must come from make_grads on the same model and be zeroed.
double batch_loss_gradient(const GasslModel& model, const std::vector<TopologyWindow>& windows,
                           int observer, GasslGrads& grads);

// One vote per member: choice[o] is the member index observer o elects
// (self excluded), tally is the vote mass per member and sums to 1.
struct LeaderVote {
  std::vector<int> members;   // ascending UAV indices
  std::vector<int> choice;    // per observer slot, elected UAV index
  Eigen::VectorXd tally;      // per member slot
};

nlohmann::json vote_to_json(const LeaderVote& vote);

std::vector<int> elect_candidates(const LeaderVote& vote, int top_k);

// Post-training attention averages and loss curves, kept for heat maps and
// diagnostics.
struct TrainArtifacts {
  Eigen::MatrixXd weight_matrix;               // n x n, row = observer
  std::vector<Eigen::MatrixXd> head_matrices;  // t0+1 entries, n x n
  std::vector<double> initial_loss;            // per observer, window-mean
  std::vector<double> final_loss;
  std::vector<int> episodes_run;
};

// Long-format attention export: observer,target,head,value rows plus the
// head-averaged weight rows (head column = "mean").
void attention_csv(const TrainArtifacts& artifacts, std::ostream& out);

// Trains one fresh attention stack per member (ascending index order)
// jointly with the shared predictor, then elects by averaged attention.
// shared_ifsn, when given, carries the predictor across calls; otherwise a
// fresh one is seeded locally.
LeaderVote train_single_cluster(const SwarmState& state, const std::vector<int>& members,
                                int t_ob, const GasslHyper& hyper, std::uint64_t seed,
                                IfsnParams* shared_ifsn = nullptr,
                                TrainArtifacts* artifacts = nullptr);

}  // namespace swarmdet
