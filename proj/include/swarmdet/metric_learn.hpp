#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "swarmdet/gru.hpp"
#include "swarmdet/swarm.hpp"

namespace swarmdet {

// One UAV's observation slice used for feature encoding: the window anchor
// position and the T0 speeds that follow it, oldest row first.
struct FeatureWindow {
  Eigen::Vector3d anchor;
  Eigen::MatrixXd speeds;  // t0 x 3
};

// A labeled collection of feature windows. Labels are cluster identifiers;
// their values carry no meaning beyond equality.
struct LabeledWindows {
  std::vector<FeatureWindow> items;
  std::vector<int> labels;
  std::vector<int> uavs;  // originating UAV index per item

  int size() const { return static_cast<int>(items.size()); }
};

// The Siamese GRU encoder. All branches and all chained cells share this one
// weight set.
struct GruEncoderParams {
  GruParams params;

  bool empty() const { return params.w_reset.size() == 0; }
};

GruEncoderParams make_encoder(std::uint64_t seed);

// h_0 = anchor, one cell step per speed row, feature = final hidden state.
Eigen::Vector3d encode_feature(const GruEncoderParams& enc, const Eigen::Vector3d& anchor,
                               const Eigen::MatrixXd& speeds);

// Feature matrix for a whole dataset, one row per item.
Eigen::MatrixXd encode_all(const GruEncoderParams& enc, const LabeledWindows& data);

// Raw-space flattened window (anchor stacked over speeds), the pre-encoding
// representation hard sampling measures distances in.
Eigen::VectorXd flatten_window(const FeatureWindow& window);

struct Triplet {
  int anchor = -1;
  int positive = -1;
  int negative = -1;
};

// Hard sampling: the farthest same-label item as positive, the nearest
// other-label item as negative, both in raw space.
Triplet sample_triplet_hard(const LabeledWindows& data, int anchor);

struct TripletBatch {
  std::vector<std::array<FeatureWindow, 3>> triples;  // anchor, positive, negative
};

// Draws `batch` anchors (with replacement) among items whose label has at
// least one same-label peer, hard-samples each. Throws if no anchor is
// eligible or the dataset has a single label.
TripletBatch make_triplet_batch(const LabeledWindows& data, int batch, Rng& rng);

double triplet_loss(const Eigen::Vector3d& e_a, const Eigen::Vector3d& e_p,
                    const Eigen::Vector3d& e_n, double gamma);

// Summed triplet loss over the batch; when grads is non-null the gradient of
// that sum is accumulated into it.
double triplet_batch_loss(const GruEncoderParams& enc, const TripletBatch& batch, double gamma,
                          GruGrads* grads = nullptr);

// One plain descent step on the summed batch loss.
GruEncoderParams metric_step(const GruEncoderParams& enc, const TripletBatch& batch, double rate,
                             double gamma);

struct McHyper {
  double gamma = 1.0;        // triplet margin
  double beta_prime = 1e-2;  // metric / online rate
  double alpha_meta = 1e-2;  // meta rate, inner and outer
  int batch = 16;
  int meta_episodes = 30;
  int dataset_clusters = 30;  // clusters per synthetic meta swarm
  int max_rounds = 20;
  int kmax = 15;
  int refs = 10;
  int online_steps = 50;
  int t_ob = 100;

  void validate() const;
};

struct MetaEpisode {
  LabeledWindows support;
  LabeledWindows query;
};

struct MetaDataset {
  std::vector<MetaEpisode> episodes;
};

// Synthetic meta corpus: each episode draws one follow strategy from the
// f1..f6 family with randomized coefficients, then simulates independent
// support and query swarms under it.
MetaDataset make_meta_dataset(int episodes, int clusters, std::uint64_t seed);

// Episodic meta-initialization. Per episode: adapt a temporary copy on the
// support batch, then step the meta weights with the query gradient taken at
// the adapted point (first-order). Optionally records the per-episode query
// losses.
GruEncoderParams meta_train(const MetaDataset& meta, const McHyper& hyper, std::uint64_t seed,
                            std::vector<double>* query_losses = nullptr);

// Fixed number of descent steps on batches drawn from d_r. Degenerate
// datasets (single label, or no label with two members) warn on stderr and
// return w_prev untouched.
GruEncoderParams online_update(const GruEncoderParams& w_prev, const LabeledWindows& d_r,
                               const McHyper& hyper, std::uint64_t seed,
                               std::vector<double>* losses = nullptr, bool* skipped = nullptr);

// Extracts one feature window per member from the state's newest window.
LabeledWindows observe_windows(const SwarmState& state, const std::vector<int>& members);

}  // namespace swarmdet
