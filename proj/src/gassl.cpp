#include "swarmdet/gassl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "swarmdet/diff.hpp"

namespace swarmdet {

namespace {

// Observation data packed for batched evaluation. Column block w*n..w*n+n-1
// of values[h] holds head h's value vectors (speed at lag h, or the anchor
// for h = t0) for every member in window w.
struct PackedBatch {
  int n = 0;
  int t0 = 0;
  int wins = 0;
  std::vector<int> members;
  std::vector<Eigen::MatrixXd> values;    // t0+1 entries, 3 x (wins*n)
  std::vector<Eigen::MatrixXd> query_in;  // per member, (3*t0+3) x wins
  std::vector<Eigen::MatrixXd> pos_in;    // per member, 3*(t0+1) x wins
  std::vector<Eigen::MatrixXd> target;    // per member, 3 x wins

  int ifsn_dim() const { return 3 * (t0 + 1) + 3 * t0 + 3; }
};

PackedBatch pack_from_state(const SwarmState& state, const std::vector<int>& members, int t_ob) {
  const int t0 = state.config().t0;
  if (t_ob < t0 + 1) throw std::invalid_argument("observation shorter than one window");
  PackedBatch batch;
  batch.t0 = t0;
  batch.n = static_cast<int>(members.size());
  batch.wins = t_ob - t0;
  batch.members = members;
  std::sort(batch.members.begin(), batch.members.end());

  const int end = state.clock();
  const int s0 = end - t_ob;
  if (s0 < 0) throw std::invalid_argument("observation longer than recorded history");

  batch.values.assign(t0 + 1, Eigen::MatrixXd(3, batch.wins * batch.n));
  batch.query_in.assign(batch.n, Eigen::MatrixXd(3 * t0 + 3, batch.wins));
  batch.pos_in.assign(batch.n, Eigen::MatrixXd(3 * (t0 + 1), batch.wins));
  batch.target.assign(batch.n, Eigen::MatrixXd(3, batch.wins));

  for (int j = 0; j < batch.n; ++j) {
    const UavRecord& u = state.uav(batch.members[j]);
    if (static_cast<int>(u.speed_history.size()) < end)
      throw std::invalid_argument("member lacks history over the observation");
    for (int w = 0; w < batch.wins; ++w) {
      const int t_w = s0 + t0 - 1 + w;
      for (int h = 0; h <= t0; ++h) {
        batch.values[h].col(w * batch.n + j) =
            h < t0 ? u.speed_history[t_w - h] : u.position_history[t_w - t0 + 1];
      }
      for (int k = 0; k < t0; ++k)
        batch.query_in[j].col(w).segment<3>(3 * k) = u.speed_history[t_w - t0 + 1 + k];
      batch.query_in[j].col(w).tail<3>() = u.position_history[t_w - t0 + 1];
      for (int k = 0; k <= t0; ++k)
        batch.pos_in[j].col(w).segment<3>(3 * k) = u.position_history[t_w - t0 + 1 + k];
      batch.target[j].col(w) = u.speed_history[t_w + 1];
    }
  }
  return batch;
}

PackedBatch pack_from_windows(const std::vector<TopologyWindow>& windows) {
  if (windows.size() < 2)
    throw std::invalid_argument("batch loss needs at least two consecutive windows");
  const TopologyWindow& first = windows.front();
  const int t0 = first.t0();
  PackedBatch batch;
  batch.t0 = t0;
  batch.n = static_cast<int>(first.members.size());
  batch.wins = static_cast<int>(windows.size()) - 1;
  batch.members = first.members;

  batch.values.assign(t0 + 1, Eigen::MatrixXd(3, batch.wins * batch.n));
  batch.query_in.assign(batch.n, Eigen::MatrixXd(3 * t0 + 3, batch.wins));
  batch.pos_in.assign(batch.n, Eigen::MatrixXd(3 * (t0 + 1), batch.wins));
  batch.target.assign(batch.n, Eigen::MatrixXd(3, batch.wins));

  for (size_t b = 0; b < windows.size(); ++b) {
    if (windows[b].members != first.members)
      throw std::invalid_argument("batch loss windows disagree on members");
    if (windows[b].t != first.t + static_cast<int>(b))
      throw std::invalid_argument("batch loss windows not consecutive");
  }

  for (int j = 0; j < batch.n; ++j) {
    for (int w = 0; w < batch.wins; ++w) {
      const TopologyWindow& win = windows[w];
      for (int h = 0; h <= t0; ++h) {
        batch.values[h].col(w * batch.n + j) =
            h < t0 ? win.speeds[j].row(t0 - 1 - h).transpose() : win.anchors[j];
      }
      for (int k = 0; k < t0; ++k)
        batch.query_in[j].col(w).segment<3>(3 * k) = win.speeds[j].row(k).transpose();
      batch.query_in[j].col(w).tail<3>() = win.anchors[j];
      // Positions rebuilt exactly as the simulator integrates them.
      Eigen::Vector3d p = win.anchors[j];
      batch.pos_in[j].col(w).segment<3>(0) = p;
      for (int k = 0; k < t0; ++k) {
        p += win.speeds[j].row(k).transpose();
        batch.pos_in[j].col(w).segment<3>(3 * (k + 1)) = p;
      }
      batch.target[j].col(w) = windows[w + 1].speeds[j].row(t0 - 1).transpose();
    }
  }
  return batch;
}

struct Workspace {
  DenseCache query_cache;
  std::vector<DenseCache> sim_caches;
  std::vector<Eigen::MatrixXd> sim_in;   // 2K x (wins*n)
  std::vector<Eigen::MatrixXd> att;      // 1 x (wins*n)
  std::vector<Eigen::MatrixXd> agg;      // 3 x wins
  Eigen::MatrixXd zin, zstd;             // ifsn_dim x wins
  Eigen::VectorXd inv_sd;                // per window, 0 when variance degenerate
  DenseCache ifsn_cache;
  Eigen::MatrixXd resid;                 // 3 x wins
  Eigen::MatrixXd dpred;                 // 3 x wins
  Eigen::MatrixXd dz;                    // ifsn_dim x wins
  Eigen::MatrixXd dscore;                // 1 x (wins*n)
  Eigen::MatrixXd dsim_in;               // 2K x (wins*n)
  Eigen::MatrixXd dquery;                // K x wins

  void ensure(const PackedBatch& batch, const GasslModel& model) {
    const int heads = batch.t0 + 1;
    const int wn = batch.wins * batch.n;
    const int twok = 2 * model.agat.key_dim();
    sim_caches.resize(heads);
    sim_in.assign(heads, Eigen::MatrixXd(twok, wn));
    att.assign(heads, Eigen::MatrixXd(1, wn));
    agg.assign(heads, Eigen::MatrixXd(3, batch.wins));
    zin.resize(batch.ifsn_dim(), batch.wins);
    zstd.resize(batch.ifsn_dim(), batch.wins);
    inv_sd.resize(batch.wins);
    resid.resize(3, batch.wins);
    dpred.resize(3, batch.wins);
    dz.resize(batch.ifsn_dim(), batch.wins);
    dscore.resize(1, wn);
    dsim_in.resize(twok, wn);
    dquery.resize(model.agat.key_dim(), batch.wins);
  }
};

void standardize_columns(const Eigen::MatrixXd& zin, Eigen::MatrixXd& zstd,
                         Eigen::VectorXd& inv_sd) {
  const double eps = 1e-12;
  for (Eigen::Index w = 0; w < zin.cols(); ++w) {
    const double mu = zin.col(w).mean();
    const double var = (zin.col(w).array() - mu).square().mean();
    if (var <= eps) {
      inv_sd[w] = 0.0;
      zstd.col(w).setZero();
    } else {
      inv_sd[w] = 1.0 / std::sqrt(var);
      zstd.col(w) = (zin.col(w).array() - mu) * inv_sd[w];
    }
  }
}

// Forward pass for one observer over the whole batch; returns the summed
// squared error. All intermediates land in ws for reuse by the backward.
double forward_observer(const GasslModel& model, const PackedBatch& batch, int slot,
                        Workspace& ws) {
  const int n = batch.n, wins = batch.wins, t0 = batch.t0;
  const int key_dim = model.agat.key_dim();

  model.agat.query_net.forward(batch.query_in[slot], ws.query_cache);
  const Eigen::MatrixXd& q = model.agat.query_net.output(ws.query_cache);

  for (int h = 0; h <= t0; ++h) {
    Eigen::MatrixXd& sin = ws.sim_in[h];
    for (int w = 0; w < wins; ++w)
      sin.block(0, w * n, key_dim, n).colwise() = q.col(w);
    sin.bottomRows(key_dim).noalias() = model.agat.keys[h] * batch.values[h];

    model.agat.sim_heads[h].forward(sin, ws.sim_caches[h]);
    const Eigen::MatrixXd& score = model.agat.sim_heads[h].output(ws.sim_caches[h]);

    Eigen::MatrixXd& att = ws.att[h];
    for (int w = 0; w < wins; ++w) {
      const auto seg = score.row(0).segment(w * n, n);
      const double peak = seg.maxCoeff();
      att.row(0).segment(w * n, n) = (seg.array() - peak).exp();
      att.row(0).segment(w * n, n) /= att.row(0).segment(w * n, n).sum();
      ws.agg[h].col(w).noalias() =
          batch.values[h].middleCols(w * n, n) * att.row(0).segment(w * n, n).transpose();
    }
  }

  const int pdim = 3 * (t0 + 1);
  ws.zin.topRows(pdim) = batch.pos_in[slot];
  for (int k = 0; k < t0; ++k) ws.zin.middleRows(pdim + 3 * k, 3) = ws.agg[t0 - 1 - k];
  ws.zin.bottomRows(3) = ws.agg[t0];
  standardize_columns(ws.zin, ws.zstd, ws.inv_sd);

  model.ifsn.body.forward(ws.zstd, ws.ifsn_cache);
  ws.resid = model.ifsn.body.output(ws.ifsn_cache) - batch.target[slot];
  return ws.resid.squaredNorm();
}

// Reverse pass matching forward_observer; seeds with d(loss)/d(pred) =
// 2*resid/scale so callers can differentiate the window-mean loss.
void backward_observer(const GasslModel& model, const PackedBatch& batch, int slot, Workspace& ws,
                       GasslGrads& grads, double scale) {
  const int n = batch.n, wins = batch.wins, t0 = batch.t0;
  const int key_dim = model.agat.key_dim();
  const int pdim = 3 * (t0 + 1);

  ws.dpred = (2.0 / scale) * ws.resid;
  model.ifsn.body.backward(ws.ifsn_cache, ws.dpred, grads.ifsn, &ws.dz);

  const Eigen::Index dim = ws.dz.rows();
  for (int w = 0; w < wins; ++w) {
    if (ws.inv_sd[w] == 0.0) {
      ws.dz.col(w).setZero();
      continue;
    }
    const double m1 = ws.dz.col(w).mean();
    const double m2 = ws.dz.col(w).dot(ws.zstd.col(w)) / static_cast<double>(dim);
    ws.dz.col(w) =
        ws.inv_sd[w] * (ws.dz.col(w).array() - m1 - ws.zstd.col(w).array() * m2).matrix();
  }

  ws.dquery.setZero();
  for (int h = 0; h <= t0; ++h) {
    const auto dagg = ws.dz.middleRows(h < t0 ? pdim + 3 * (t0 - 1 - h) : pdim + 3 * t0, 3);
    for (int w = 0; w < wins; ++w) {
      const Eigen::VectorXd datt =
          batch.values[h].middleCols(w * n, n).transpose() * dagg.col(w);
      const auto y = ws.att[h].row(0).segment(w * n, n).transpose();
      const double dot = y.dot(datt);
      ws.dscore.row(0).segment(w * n, n) =
          (y.array() * (datt.array() - dot)).transpose();
    }
    model.agat.sim_heads[h].backward(ws.sim_caches[h], ws.dscore, grads.sims[h], &ws.dsim_in);
    grads.keys[h].noalias() += ws.dsim_in.bottomRows(key_dim) * batch.values[h].transpose();
    for (int w = 0; w < wins; ++w)
      ws.dquery.col(w) += ws.dsim_in.block(0, w * n, key_dim, n).rowwise().sum();
  }
  model.agat.query_net.backward(ws.query_cache, ws.dquery, grads.query, nullptr);
}

}  // namespace

void GasslGrads::set_zero() {
  query.set_zero();
  for (auto& s : sims) s.set_zero();
  for (auto& k : keys) k.setZero();
  ifsn.set_zero();
}

GasslGrads make_grads(const GasslModel& model) {
  GasslGrads g;
  g.query = model.agat.query_net.zero_grads();
  for (const auto& s : model.agat.sim_heads) g.sims.push_back(s.zero_grads());
  for (const auto& k : model.agat.keys) g.keys.emplace_back(Eigen::MatrixXd::Zero(k.rows(), 3));
  g.ifsn = model.ifsn.body.zero_grads();
  return g;
}

std::vector<ParamRef> param_refs(GasslModel& model) {
  std::vector<ParamRef> refs = param_refs("query", model.agat.query_net);
  for (size_t h = 0; h < model.agat.sim_heads.size(); ++h)
    append_refs(refs, param_refs("sim" + std::to_string(h), model.agat.sim_heads[h]));
  for (size_t h = 0; h < model.agat.keys.size(); ++h)
    refs.push_back(param_ref("key" + std::to_string(h), model.agat.keys[h]));
  append_refs(refs, param_refs("ifsn", model.ifsn.body));
  return refs;
}

std::vector<ParamRef> param_refs(GasslGrads& grads) {
  std::vector<ParamRef> refs = param_refs("query", grads.query);
  for (size_t h = 0; h < grads.sims.size(); ++h)
    append_refs(refs, param_refs("sim" + std::to_string(h), grads.sims[h]));
  for (size_t h = 0; h < grads.keys.size(); ++h)
    refs.push_back(param_ref("key" + std::to_string(h), grads.keys[h]));
  append_refs(refs, param_refs("ifsn", grads.ifsn));
  return refs;
}

double batch_loss_gradient(const GasslModel& model, const std::vector<TopologyWindow>& windows,
                           int observer, GasslGrads& grads) {
  PackedBatch batch = pack_from_windows(windows);
  const auto it = std::lower_bound(batch.members.begin(), batch.members.end(), observer);
  if (it == batch.members.end() || *it != observer)
    throw std::invalid_argument("batch_loss_gradient: observer not a member");
  const int slot = static_cast<int>(it - batch.members.begin());
  Workspace ws;
  ws.ensure(batch, model);
  const double loss = forward_observer(model, batch, slot, ws);
  backward_observer(model, batch, slot, ws, grads, 1.0);
  return loss;
}

// Xavier bounds assume unit-scale inputs. The attention stack eats raw
// window data, where speeds sit at the common-speed scale (~5) and positions
// at the arena scale (~1e3); the input-facing weights fold those scales in,
// otherwise the tanh layers start saturated and plain gradient descent never
// unfreezes the attention.
constexpr double kSpeedInitScale = 5.0;
constexpr double kPositionInitScale = 1e3;

AgatParams make_agat(const GasslHyper& hyper, int t0, Rng& rng) {
  AgatParams p;
  p.query_net = DenseNet::xavier({3 * t0 + 3, hyper.query_hidden, hyper.key_dim},
                                 {Activation::kTanh, Activation::kIdentity}, rng);
  Eigen::MatrixXd& qw = p.query_net.layers.front().weight;
  qw.leftCols(3 * t0) /= kSpeedInitScale;
  qw.rightCols(3) /= kPositionInitScale;
  const std::vector<int> sim_dims = {2 * hyper.key_dim, hyper.sim_hidden, hyper.sim_hidden, 1};
  const std::vector<Activation> sim_acts = {Activation::kTanh, Activation::kTanh,
                                            Activation::kIdentity};
  const double key_bound = std::sqrt(6.0 / (hyper.key_dim + 3));
  for (int h = 0; h <= t0; ++h) {
    p.sim_heads.push_back(DenseNet::xavier(sim_dims, sim_acts, rng));
    Eigen::MatrixXd key(hyper.key_dim, 3);
    for (Eigen::Index j = 0; j < key.cols(); ++j)
      for (Eigen::Index i = 0; i < key.rows(); ++i) key(i, j) = rng.uniform(-key_bound, key_bound);
    key /= h < t0 ? kSpeedInitScale : kPositionInitScale;
    p.keys.push_back(std::move(key));
  }
  return p;
}

IfsnParams make_ifsn(const GasslHyper& hyper, int t0, Rng& rng) {
  const int in_dim = 3 * (t0 + 1) + 3 * t0 + 3;
  IfsnParams p;
  p.body = DenseNet::xavier(
      {in_dim, hyper.ifsn_hidden, hyper.ifsn_hidden, hyper.ifsn_hidden, 3},
      {Activation::kTanh, Activation::kTanh, Activation::kTanh, Activation::kIdentity}, rng);
  return p;
}

AttentionTensor attention_forward(const AgatParams& params, const TopologyWindow& window,
                                  int observer) {
  const int slot = window.member_slot(observer);
  if (slot < 0) throw std::invalid_argument("attention_forward: observer not in window");
  const int n = static_cast<int>(window.members.size());
  const int t0 = params.t0();

  Eigen::VectorXd query_in(3 * t0 + 3);
  for (int k = 0; k < t0; ++k)
    query_in.segment<3>(3 * k) = window.speeds[slot].row(k).transpose();
  query_in.tail<3>() = window.anchors[slot];
  const Eigen::VectorXd q = params.query_net.eval(query_in);

  AttentionTensor att;
  att.values.resize(t0 + 1, n);
  Eigen::VectorXd scores(n);
  Eigen::VectorXd sim_in(2 * params.key_dim());
  for (int h = 0; h <= t0; ++h) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector3d value =
          h < t0 ? Eigen::Vector3d(window.speeds[j].row(t0 - 1 - h).transpose())
                 : window.anchors[j];
      sim_in.head(params.key_dim()) = q;
      sim_in.tail(params.key_dim()) = params.keys[h] * value;
      scores[j] = params.sim_heads[h].eval(sim_in)(0);
    }
    att.values.row(h) = softmax(scores).transpose();
  }
  att.weights = att.values.colwise().mean().transpose();
  return att;
}

Aggregated aggregate(const AttentionTensor& att, const TopologyWindow& window) {
  const int t0 = static_cast<int>(att.values.rows()) - 1;
  const int n = static_cast<int>(window.members.size());
  Aggregated out;
  out.vhat = Eigen::MatrixXd::Zero(t0, 3);
  out.phat.setZero();
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < t0; ++k)
      out.vhat.row(k) += att.values(t0 - 1 - k, j) * window.speeds[j].row(k);
    out.phat += att.values(t0, j) * window.anchors[j];
  }
  return out;
}

Eigen::Vector3d ifsn_predict(const IfsnParams& gamma, const Eigen::MatrixXd& positions,
                             const Eigen::MatrixXd& vhat, const Eigen::Vector3d& phat) {
  const int t0 = static_cast<int>(vhat.rows());
  if (positions.rows() != t0 + 1 || positions.cols() != 3 || vhat.cols() != 3)
    throw std::invalid_argument("ifsn_predict: window shape mismatch");
  Eigen::VectorXd z(3 * (t0 + 1) + 3 * t0 + 3);
  if (gamma.body.input_dim() != z.size())
    throw std::invalid_argument("ifsn_predict: dimension mismatch with body");
  Eigen::Index k = 0;
  for (int r = 0; r <= t0; ++r)
    for (int c = 0; c < 3; ++c) z[k++] = positions(r, c);
  for (int r = 0; r < t0; ++r)
    for (int c = 0; c < 3; ++c) z[k++] = vhat(r, c);
  z.tail<3>() = phat;

  const double mu = z.mean();
  const double var = (z.array() - mu).square().mean();
  if (var <= 1e-12)
    z.setZero();
  else
    z = ((z.array() - mu) / std::sqrt(var)).matrix();
  return gamma.body.eval(z);
}

double batch_loss(const GasslModel& model, const std::vector<TopologyWindow>& windows,
                  int observer) {
  PackedBatch batch = pack_from_windows(windows);
  const int slot = [&] {
    auto it = std::lower_bound(batch.members.begin(), batch.members.end(), observer);
    if (it == batch.members.end() || *it != observer)
      throw std::invalid_argument("batch_loss: observer not a member");
    return static_cast<int>(it - batch.members.begin());
  }();
  Workspace ws;
  ws.ensure(batch, model);
  return forward_observer(model, batch, slot, ws);
}

double batch_loss_injected(const std::vector<TopologyWindow>& windows, int observer,
                           const GasslOracles& oracles) {
  if (windows.size() < 2)
    throw std::invalid_argument("batch loss needs at least two consecutive windows");
  const TopologyWindow& first = windows.front();
  const int slot = first.member_slot(observer);
  if (slot < 0) throw std::invalid_argument("batch_loss_injected: observer not a member");
  const int t0 = first.t0();

  double loss = 0.0;
  for (size_t b = 0; b + 1 < windows.size(); ++b) {
    const TopologyWindow& win = windows[b];
    AttentionTensor att;
    att.values = oracles.attention(win, slot);
    att.weights = att.values.colwise().mean().transpose();
    const Aggregated agg = aggregate(att, win);

    Eigen::MatrixXd positions(t0 + 1, 3);
    Eigen::Vector3d p = win.anchors[slot];
    positions.row(0) = p.transpose();
    for (int k = 0; k < t0; ++k) {
      p += win.speeds[slot].row(k).transpose();
      positions.row(k + 1) = p.transpose();
    }
    const Eigen::Vector3d pred = oracles.predictor(positions, agg.vhat, agg.phat);
    const Eigen::Vector3d target = windows[b + 1].speeds[slot].row(t0 - 1).transpose();
    loss += (pred - target).squaredNorm();
  }
  return loss;
}

nlohmann::json vote_to_json(const LeaderVote& vote) {
  std::vector<double> tally(vote.tally.data(), vote.tally.data() + vote.tally.size());
  return {{"members", vote.members}, {"choice", vote.choice}, {"tally", tally}};
}

std::vector<int> elect_candidates(const LeaderVote& vote, int top_k) {
  const int n = static_cast<int>(vote.members.size());
  if (top_k < 1 || top_k > n) throw std::invalid_argument("elect_candidates: top_k out of range");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (vote.tally[a] != vote.tally[b]) return vote.tally[a] > vote.tally[b];
    return vote.members[a] < vote.members[b];
  });
  std::vector<int> out;
  for (int k = 0; k < top_k; ++k) out.push_back(vote.members[order[k]]);
  std::sort(out.begin(), out.end());
  return out;
}

void attention_csv(const TrainArtifacts& artifacts, std::ostream& out) {
  auto put = [&out](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  out << "observer,target,head,value\r\n";
  const int n = static_cast<int>(artifacts.weight_matrix.rows());
  for (size_t h = 0; h < artifacts.head_matrices.size(); ++h) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        out << i << ',' << j << ',' << h + 1 << ',';
        put(artifacts.head_matrices[h](i, j));
        out << "\r\n";
      }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out << i << ',' << j << ",mean,";
      put(artifacts.weight_matrix(i, j));
      out << "\r\n";
    }
}

LeaderVote train_single_cluster(const SwarmState& state, const std::vector<int>& members,
                                int t_ob, const GasslHyper& hyper, std::uint64_t seed,
                                IfsnParams* shared_ifsn, TrainArtifacts* artifacts) {
  if (members.size() < 2) throw std::invalid_argument("train_single_cluster: need >= 2 members");
  PackedBatch batch = pack_from_state(state, members, t_ob);
  const int n = batch.n, t0 = batch.t0;

  IfsnParams local_ifsn;
  IfsnParams* gamma = shared_ifsn != nullptr ? shared_ifsn : &local_ifsn;
  if (gamma->body.layers.empty()) {
    Rng gamma_rng(tag_seed(seed, "gamma"));
    *gamma = make_ifsn(hyper, t0, gamma_rng);
  }

  LeaderVote vote;
  vote.members = batch.members;
  vote.choice.resize(n);
  vote.tally = Eigen::VectorXd::Zero(n);

  if (artifacts != nullptr) {
    artifacts->weight_matrix = Eigen::MatrixXd::Zero(n, n);
    artifacts->head_matrices.assign(t0 + 1, Eigen::MatrixXd::Zero(n, n));
    artifacts->initial_loss.assign(n, 0.0);
    artifacts->final_loss.assign(n, 0.0);
    artifacts->episodes_run.assign(n, 0);
  }

  Workspace ws;
  std::vector<double> loss_hist;
  for (int o = 0; o < n; ++o) {
    Rng phi_rng(tag_seed(seed, "phi", static_cast<std::uint64_t>(batch.members[o])));
    GasslModel model;
    model.agat = make_agat(hyper, t0, phi_rng);
    model.ifsn = std::move(*gamma);

    GasslGrads grads = make_grads(model);
    std::vector<ParamRef> params = param_refs(model);
    std::vector<ParamRef> grefs = param_refs(grads);
    AdamState opt = make_adam(params);
    ws.ensure(batch, model);

    const double mean_scale = 1.0 / static_cast<double>(batch.wins);
    loss_hist.clear();
    int episodes = 0;
    for (; episodes < hyper.episodes; ++episodes) {
      const double loss = forward_observer(model, batch, o, ws);
      if (episodes == 0 && artifacts != nullptr) artifacts->initial_loss[o] = loss * mean_scale;
      loss_hist.push_back(loss);
      if (episodes >= hyper.early_stop_window &&
          loss_hist[episodes - hyper.early_stop_window] - loss < hyper.early_stop_eps)
        break;
      grads.set_zero();
      backward_observer(model, batch, o, ws, grads, static_cast<double>(batch.wins));
      adam_apply(params, grefs, opt, hyper.learning_rate);
    }

    // Evaluation pass: final loss plus batch-averaged attention.
    const double final_loss = forward_observer(model, batch, o, ws) * mean_scale;
    if (episodes == 0 && artifacts != nullptr) artifacts->initial_loss[o] = final_loss;
    Eigen::VectorXd mean_weights = Eigen::VectorXd::Zero(n);
    for (int h = 0; h <= t0; ++h) {
      Eigen::VectorXd head_mean = Eigen::VectorXd::Zero(n);
      for (int w = 0; w < batch.wins; ++w)
        head_mean += ws.att[h].row(0).segment(w * n, n).transpose();
      head_mean /= static_cast<double>(batch.wins);
      if (artifacts != nullptr) artifacts->head_matrices[h].row(o) = head_mean.transpose();
      mean_weights += head_mean;
    }
    mean_weights /= static_cast<double>(t0 + 1);

    int best = o == 0 ? 1 : 0;
    for (int j = 0; j < n; ++j) {
      if (j == o) continue;
      if (mean_weights[j] > mean_weights[best]) best = j;
    }
    vote.choice[o] = batch.members[best];
    vote.tally[best] += 1.0 / static_cast<double>(n);

    if (artifacts != nullptr) {
      artifacts->weight_matrix.row(o) = mean_weights.transpose();
      artifacts->final_loss[o] = final_loss;
      artifacts->episodes_run[o] = episodes;
    }

    *gamma = std::move(model.ifsn);  // carry the shared predictor forward
  }
  return vote;
}

}  // namespace swarmdet
