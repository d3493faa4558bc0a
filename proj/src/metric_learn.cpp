#include "swarmdet/metric_learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "swarmdet/ifs.hpp"

namespace swarmdet {

void McHyper::validate() const {
  if (gamma <= 0.0) throw std::invalid_argument("McHyper: gamma must be positive");
  if (beta_prime <= 0.0 || alpha_meta <= 0.0)
    throw std::invalid_argument("McHyper: learning rates must be positive");
  if (batch < 1 || meta_episodes < 1 || max_rounds < 1 || online_steps < 0)
    throw std::invalid_argument("McHyper: counts must be positive");
  if (dataset_clusters < 2)
    throw std::invalid_argument("McHyper: meta swarms need at least 2 clusters");
  if (kmax < 2) throw std::invalid_argument("McHyper: kmax must be >= 2");
  if (refs < 2) throw std::invalid_argument("McHyper: refs must be >= 2");
  if (t_ob < 5) throw std::invalid_argument("McHyper: observation too short for one window");
}

GruEncoderParams make_encoder(std::uint64_t seed) {
  Rng rng(seed);
  return {GruParams::xavier(3, rng)};
}

Eigen::Vector3d encode_feature(const GruEncoderParams& enc, const Eigen::Vector3d& anchor,
                               const Eigen::MatrixXd& speeds) {
  if (speeds.cols() != 3) throw std::invalid_argument("encode_feature: speeds must be Tx3");
  return gru_encode(enc.params, anchor, speeds);
}

Eigen::MatrixXd encode_all(const GruEncoderParams& enc, const LabeledWindows& data) {
  Eigen::MatrixXd out(data.size(), 3);
  for (int i = 0; i < data.size(); ++i)
    out.row(i) = encode_feature(enc, data.items[i].anchor, data.items[i].speeds).transpose();
  return out;
}

Eigen::VectorXd flatten_window(const FeatureWindow& window) {
  Eigen::VectorXd flat(3 + window.speeds.size());
  flat.head<3>() = window.anchor;
  for (Eigen::Index r = 0; r < window.speeds.rows(); ++r)
    flat.segment<3>(3 + 3 * r) = window.speeds.row(r).transpose();
  return flat;
}

Triplet sample_triplet_hard(const LabeledWindows& data, int anchor) {
  if (anchor < 0 || anchor >= data.size())
    throw std::invalid_argument("sample_triplet_hard: anchor out of range");
  const Eigen::VectorXd ref = flatten_window(data.items[anchor]);
  const int label = data.labels[anchor];

  Triplet t;
  t.anchor = anchor;
  double far = -1.0;
  double near = std::numeric_limits<double>::infinity();
  for (int i = 0; i < data.size(); ++i) {
    if (i == anchor) continue;
    const double d = (flatten_window(data.items[i]) - ref).norm();
    if (data.labels[i] == label) {
      if (d > far) {
        far = d;
        t.positive = i;
      }
    } else if (d < near) {
      near = d;
      t.negative = i;
    }
  }
  if (t.positive < 0)
    throw std::invalid_argument("sample_triplet_hard: anchor's cluster is a singleton");
  if (t.negative < 0)
    throw std::invalid_argument("sample_triplet_hard: dataset has a single cluster");
  return t;
}

TripletBatch make_triplet_batch(const LabeledWindows& data, int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("make_triplet_batch: batch must be >= 1");
  std::vector<int> label_count_by_item(data.size(), 0);
  for (int i = 0; i < data.size(); ++i)
    for (int j = 0; j < data.size(); ++j)
      if (j != i && data.labels[j] == data.labels[i]) ++label_count_by_item[i];

  std::vector<int> eligible;
  for (int i = 0; i < data.size(); ++i)
    if (label_count_by_item[i] > 0) eligible.push_back(i);
  bool two_labels = false;
  for (int l : data.labels) two_labels = two_labels || l != data.labels.front();
  if (eligible.empty() || !two_labels)
    throw std::invalid_argument("make_triplet_batch: no valid triplet anchors");

  TripletBatch out;
  out.triples.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const Triplet t = sample_triplet_hard(data, eligible[rng.uniform_int(
                                                    static_cast<int>(eligible.size()))]);
    out.triples.push_back({data.items[t.anchor], data.items[t.positive], data.items[t.negative]});
  }
  return out;
}

double triplet_loss(const Eigen::Vector3d& e_a, const Eigen::Vector3d& e_p,
                    const Eigen::Vector3d& e_n, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("triplet_loss: gamma must be positive");
  return std::max(0.0, (e_p - e_a).norm() - (e_n - e_a).norm() + gamma);
}

double triplet_batch_loss(const GruEncoderParams& enc, const TripletBatch& batch, double gamma,
                          GruGrads* grads) {
  if (batch.triples.empty()) throw std::invalid_argument("triplet_batch_loss: empty batch");
  if (gamma <= 0.0) throw std::invalid_argument("triplet_batch_loss: gamma must be positive");

  double total = 0.0;
  GruChainCache cache_a, cache_p, cache_n;
  for (const auto& triple : batch.triples) {
    const Eigen::Vector3d e_a =
        gru_encode_forward(enc.params, triple[0].anchor, triple[0].speeds, cache_a);
    const Eigen::Vector3d e_p =
        gru_encode_forward(enc.params, triple[1].anchor, triple[1].speeds, cache_p);
    const Eigen::Vector3d e_n =
        gru_encode_forward(enc.params, triple[2].anchor, triple[2].speeds, cache_n);

    const Eigen::Vector3d dp = e_p - e_a;
    const Eigen::Vector3d dn = e_n - e_a;
    const double norm_p = dp.norm();
    const double norm_n = dn.norm();
    const double hinge = norm_p - norm_n + gamma;
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grads == nullptr) continue;

    // Unit-direction subgradients; a collapsed pair contributes nothing.
    const Eigen::Vector3d gp = norm_p > 1e-12 ? (dp / norm_p).eval() : Eigen::Vector3d::Zero();
    const Eigen::Vector3d gn = norm_n > 1e-12 ? (dn / norm_n).eval() : Eigen::Vector3d::Zero();
    gru_encode_backward(enc.params, cache_a, gn - gp, *grads);
    gru_encode_backward(enc.params, cache_p, gp, *grads);
    gru_encode_backward(enc.params, cache_n, -gn, *grads);
  }
  return total;
}

GruEncoderParams metric_step(const GruEncoderParams& enc, const TripletBatch& batch, double rate,
                             double gamma) {
  GruGrads grads = GruGrads::zeros(enc.params.hidden());
  triplet_batch_loss(enc, batch, gamma, &grads);
  GruEncoderParams out = enc;
  out.params.w_reset -= rate * grads.w_reset;
  out.params.w_update -= rate * grads.w_update;
  out.params.w_cand -= rate * grads.w_cand;
  return out;
}

LabeledWindows observe_windows(const SwarmState& state, const std::vector<int>& members) {
  const TopologyWindow win = state.topology_window(members, state.clock() - 1);
  LabeledWindows data;
  data.uavs = win.members;
  for (size_t j = 0; j < win.members.size(); ++j) {
    data.items.push_back({win.anchors[j], win.speeds[j]});
    data.labels.push_back(state.uav(win.members[j]).cluster_id);
  }
  return data;
}

MetaDataset make_meta_dataset(int episodes, int clusters, std::uint64_t seed) {
  if (episodes < 1 || clusters < 2)
    throw std::invalid_argument("make_meta_dataset: need >= 1 episode and >= 2 clusters");
  MetaDataset meta;
  meta.episodes.reserve(episodes);
  for (int m = 0; m < episodes; ++m) {
    Rng rng(tag_seed(seed, "meta-episode", static_cast<std::uint64_t>(m)));

    SwarmConfig cfg;
    cfg.ifs.kind = static_cast<IfsKind>(rng.uniform_int(6));
    cfg.ifs.kappa0 = rng.uniform(0.5, 1.5);
    cfg.ifs.kappa1 = rng.uniform(0.5, 1.5);
    cfg.ifs.kappa2 = rng.uniform(0.5, 1.5);
    cfg.ifs.kappa3 = rng.uniform(0.5, 1.5);
    cfg.ifs.kappa_p = rng.uniform(0.5, 1.5);
    cfg.ifs.kappa_n = rng.uniform(0.0, 0.1);
    cfg.ifs.kappa_r = rng.uniform(40.0, 80.0);
    cfg.cluster_sizes.clear();
    for (int c = 0; c < clusters; ++c) cfg.cluster_sizes.push_back(2 + rng.uniform_int(5));

    MetaEpisode episode;
    const std::uint64_t m_u = static_cast<std::uint64_t>(m);
    const std::pair<LabeledWindows*, std::uint64_t> sides[] = {
        {&episode.support, tag_seed(seed, "support-swarm", m_u)},
        {&episode.query, tag_seed(seed, "query-swarm", m_u)}};
    for (const auto& [side, swarm_seed] : sides) {
      SwarmState s = init_swarm(cfg, swarm_seed);
      s.advance(12);  // windows must postdate the warm-up walk
      *side = observe_windows(s, s.live_indices());
    }
    meta.episodes.push_back(std::move(episode));
  }
  return meta;
}

GruEncoderParams meta_train(const MetaDataset& meta, const McHyper& hyper, std::uint64_t seed,
                            std::vector<double>* query_losses) {
  hyper.validate();
  if (static_cast<int>(meta.episodes.size()) < hyper.meta_episodes)
    throw std::invalid_argument("meta_train: fewer episodes than meta_episodes");

  GruEncoderParams w = make_encoder(tag_seed(seed, "w0"));
  if (query_losses != nullptr) query_losses->clear();

  for (int m = 0; m < hyper.meta_episodes; ++m) {
    const MetaEpisode& episode = meta.episodes[m];
    Rng support_rng(tag_seed(seed, "support", static_cast<std::uint64_t>(m)));
    const TripletBatch support = make_triplet_batch(episode.support, hyper.batch, support_rng);

    // Inner adaptation on the support batch.
    const GruEncoderParams adapted = metric_step(w, support, hyper.alpha_meta, hyper.gamma);

    // Outer step: query gradient taken at the adapted weights, applied to w.
    Rng query_rng(tag_seed(seed, "query", static_cast<std::uint64_t>(m)));
    const TripletBatch query = make_triplet_batch(episode.query, hyper.batch, query_rng);
    GruGrads grads = GruGrads::zeros(w.params.hidden());
    const double loss = triplet_batch_loss(adapted, query, hyper.gamma, &grads);
    if (query_losses != nullptr) query_losses->push_back(loss);
    w.params.w_reset -= hyper.alpha_meta * grads.w_reset;
    w.params.w_update -= hyper.alpha_meta * grads.w_update;
    w.params.w_cand -= hyper.alpha_meta * grads.w_cand;
  }
  return w;
}

GruEncoderParams online_update(const GruEncoderParams& w_prev, const LabeledWindows& d_r,
                               const McHyper& hyper, std::uint64_t seed,
                               std::vector<double>* losses, bool* skipped) {
  hyper.validate();
  if (skipped != nullptr) *skipped = false;
  if (losses != nullptr) losses->clear();

  bool has_pair = false, has_two_labels = false;
  for (int i = 0; i < d_r.size() && !(has_pair && has_two_labels); ++i) {
    for (int j = 0; j < d_r.size(); ++j) {
      if (j == i) continue;
      if (d_r.labels[j] == d_r.labels[i]) has_pair = true;
      if (d_r.labels[j] != d_r.labels[i]) has_two_labels = true;
    }
  }
  if (!has_pair || !has_two_labels) {
    std::fprintf(stderr, "online_update: degenerate dataset, keeping previous weights\n");
    if (skipped != nullptr) *skipped = true;
    return w_prev;
  }

  GruEncoderParams w = w_prev;
  Rng rng(seed);
  for (int step = 0; step < hyper.online_steps; ++step) {
    const TripletBatch batch = make_triplet_batch(d_r, hyper.batch, rng);
    if (losses != nullptr) losses->push_back(triplet_batch_loss(w, batch, hyper.gamma));
    w = metric_step(w, batch, hyper.beta_prime, hyper.gamma);
  }
  return w;
}

}  // namespace swarmdet
