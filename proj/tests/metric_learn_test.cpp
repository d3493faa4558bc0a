#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "swarmdet/diff.hpp"
#include "swarmdet/metric_learn.hpp"
#include "swarmdet/swarm.hpp"

using namespace swarmdet;

namespace {

// 1-D separable windows: anchor (x,0,0), a single zero speed row. Distances
// in flattened space reduce to |x_i - x_j|, which makes hard sampling
// enumerable by eye.
FeatureWindow line_window(double x) {
  FeatureWindow w;
  w.anchor = Eigen::Vector3d(x, 0.0, 0.0);
  w.speeds = Eigen::MatrixXd::Zero(1, 3);
  return w;
}

LabeledWindows line_dataset(const std::vector<double>& xs, const std::vector<int>& labels) {
  LabeledWindows data;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    data.items.push_back(line_window(xs[i]));
    data.labels.push_back(labels[i]);
    data.uavs.push_back(static_cast<int>(i));
  }
  return data;
}

FeatureWindow random_window(Rng& rng, int rows) {
  FeatureWindow w;
  w.anchor = 0.5 * rng.normal3();
  w.speeds = Eigen::MatrixXd(rows, 3);
  for (int r = 0; r < rows; ++r) w.speeds.row(r) = 0.5 * rng.normal3().transpose();
  return w;
}

}  // namespace

TEST_CASE("zero-weight encoder halves the anchor per step") {
  GruEncoderParams enc = make_encoder(3);
  enc.params.w_reset.setZero();
  enc.params.w_update.setZero();
  enc.params.w_cand.setZero();

  // All gates sit at sigmoid(0)=1/2 and the candidate at tanh(0)=0, so each
  // step maps h to h/2 regardless of the input row.
  Rng rng(5);
  const Eigen::Vector3d anchor(8.0, -16.0, 32.0);
  Eigen::MatrixXd speeds(4, 3);
  for (int r = 0; r < 4; ++r) speeds.row(r) = rng.normal3().transpose();

  const Eigen::Vector3d e = encode_feature(enc, anchor, speeds);
  CHECK((e - anchor / 16.0).norm() < 1e-15);
}

TEST_CASE("encode_feature chains plain cell evaluations") {
  const GruEncoderParams enc = make_encoder(11);
  Rng rng(13);
  const FeatureWindow w = random_window(rng, 4);

  Eigen::VectorXd h = w.anchor;
  for (Eigen::Index r = 0; r < w.speeds.rows(); ++r)
    h = gru_cell(enc.params, h, w.speeds.row(r).transpose());

  CHECK((encode_feature(enc, w.anchor, w.speeds) - h).norm() == 0.0);
  CHECK_THROWS_AS(encode_feature(enc, w.anchor, Eigen::MatrixXd::Zero(4, 2)),
                  std::invalid_argument);
}

TEST_CASE("encode_all stacks per-item features") {
  const GruEncoderParams enc = make_encoder(17);
  Rng rng(19);
  LabeledWindows data;
  for (int i = 0; i < 5; ++i) {
    data.items.push_back(random_window(rng, 3));
    data.labels.push_back(i % 2);
    data.uavs.push_back(i);
  }
  const Eigen::MatrixXd f = encode_all(enc, data);
  CHECK(f.rows() == 5);
  CHECK(f.cols() == 3);
  for (int i = 0; i < 5; ++i)
    CHECK((f.row(i).transpose() - encode_feature(enc, data.items[i].anchor, data.items[i].speeds))
              .norm() == 0.0);
}

TEST_CASE("flatten_window stacks anchor over speed rows") {
  FeatureWindow w;
  w.anchor = Eigen::Vector3d(1, 2, 3);
  w.speeds = Eigen::MatrixXd(2, 3);
  w.speeds << 4, 5, 6, 7, 8, 9;
  const Eigen::VectorXd flat = flatten_window(w);
  REQUIRE(flat.size() == 9);
  for (int i = 0; i < 9; ++i) CHECK(flat[i] == i + 1);
}

TEST_CASE("triplet_loss hinge values") {
  const Eigen::Vector3d a(0, 0, 0), p3(3, 0, 0), n1(1, 0, 0), n5(5, 0, 0);
  CHECK(triplet_loss(a, p3, n1, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(triplet_loss(a, n1, n5, 1.0) == 0.0);   // margin satisfied with room
  CHECK(triplet_loss(a, p3, p3, 0.75) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(triplet_loss(a, n1, p3, 2.0) == 0.0);   // exactly at the boundary
  CHECK_THROWS_AS(triplet_loss(a, p3, n1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(triplet_loss(a, p3, n1, -1.0), std::invalid_argument);
}

TEST_CASE("hard sampling picks farthest peer and nearest intruder") {
  // label 0 at x = 0, 1, 10; label 1 at x = 4, 20
  const LabeledWindows data = line_dataset({0, 1, 10, 4, 20}, {0, 0, 0, 1, 1});

  Triplet t = sample_triplet_hard(data, 0);
  CHECK(t.anchor == 0);
  CHECK(t.positive == 2);  // |10-0| beats |1-0|
  CHECK(t.negative == 3);  // |4-0| beats |20-0|

  t = sample_triplet_hard(data, 3);
  CHECK(t.positive == 4);
  CHECK(t.negative == 1);  // x=1 is 3 away, x=0 is 4 away

  CHECK_THROWS_AS(sample_triplet_hard(data, -1), std::invalid_argument);
  CHECK_THROWS_AS(sample_triplet_hard(data, 5), std::invalid_argument);

  // singleton cluster has no positive
  const LabeledWindows lone = line_dataset({0, 1, 2}, {0, 1, 1});
  CHECK_THROWS_AS(sample_triplet_hard(lone, 0), std::invalid_argument);
  // one label only has no negative
  const LabeledWindows flat = line_dataset({0, 1, 2}, {7, 7, 7});
  CHECK_THROWS_AS(sample_triplet_hard(flat, 0), std::invalid_argument);
}

TEST_CASE("make_triplet_batch draws only anchors with peers") {
  // item 2 is a singleton label: never a valid anchor
  const LabeledWindows data = line_dataset({0, 1, 50}, {0, 0, 1});
  Rng rng(23);
  const TripletBatch batch = make_triplet_batch(data, 32, rng);
  REQUIRE(batch.triples.size() == 32);
  for (const auto& triple : batch.triples) {
    const double ax = triple[0].anchor.x();
    CHECK((ax == 0.0 || ax == 1.0));
    CHECK(triple[2].anchor.x() == 50.0);  // only available negative
  }

  Rng r1(31), r2(31);
  const TripletBatch b1 = make_triplet_batch(data, 8, r1);
  const TripletBatch b2 = make_triplet_batch(data, 8, r2);
  for (int b = 0; b < 8; ++b)
    for (int s = 0; s < 3; ++s)
      CHECK(flatten_window(b1.triples[b][s]) == flatten_window(b2.triples[b][s]));

  CHECK_THROWS_AS(make_triplet_batch(data, 0, rng), std::invalid_argument);
  const LabeledWindows flat = line_dataset({0, 1}, {3, 3});
  CHECK_THROWS_AS(make_triplet_batch(flat, 4, rng), std::invalid_argument);
  const LabeledWindows lonely = line_dataset({0, 9}, {0, 1});
  CHECK_THROWS_AS(make_triplet_batch(lonely, 4, rng), std::invalid_argument);
}

TEST_CASE("triplet_batch_loss sums per-triple hinges") {
  const GruEncoderParams enc = make_encoder(29);
  Rng rng(31);
  TripletBatch batch;
  for (int b = 0; b < 6; ++b)
    batch.triples.push_back({random_window(rng, 3), random_window(rng, 3), random_window(rng, 3)});

  double expect = 0.0;
  for (const auto& triple : batch.triples) {
    const Eigen::Vector3d e_a = encode_feature(enc, triple[0].anchor, triple[0].speeds);
    const Eigen::Vector3d e_p = encode_feature(enc, triple[1].anchor, triple[1].speeds);
    const Eigen::Vector3d e_n = encode_feature(enc, triple[2].anchor, triple[2].speeds);
    expect += triplet_loss(e_a, e_p, e_n, 0.8);
  }
  CHECK(triplet_batch_loss(enc, batch, 0.8) == doctest::Approx(expect).epsilon(1e-14));

  CHECK_THROWS_AS(triplet_batch_loss(enc, TripletBatch{}, 0.8), std::invalid_argument);
  CHECK_THROWS_AS(triplet_batch_loss(enc, batch, 0.0), std::invalid_argument);
}

TEST_CASE("triplet batch gradient matches finite differences") {
  GruEncoderParams enc = make_encoder(37);
  Rng rng(41);
  TripletBatch batch;
  for (int b = 0; b < 3; ++b)
    batch.triples.push_back({random_window(rng, 3), random_window(rng, 3), random_window(rng, 3)});

  // A wide margin keeps every hinge active, away from the max(0, .) kink.
  const double gamma = 10.0;
  GruGrads grads = GruGrads::zeros(enc.params.hidden());
  triplet_batch_loss(enc, batch, gamma, &grads);

  const auto report = check_gradient(
      [&] { return triplet_batch_loss(enc, batch, gamma); }, param_refs("gru", enc.params),
      param_refs("gru", grads), 1e-6, 1e-5);
  INFO("worst ", report.worst.name, "[", report.worst.index, "] rel_err ", report.max_rel_err);
  CHECK(report.pass);
}

TEST_CASE("metric_step leaves weights alone when nothing pulls") {
  const GruEncoderParams enc = make_encoder(43);
  Rng rng(47);
  TripletBatch batch;
  batch.triples.push_back({random_window(rng, 3), random_window(rng, 3), random_window(rng, 3)});

  // rate 0: no movement even with active hinges
  const GruEncoderParams same = metric_step(enc, batch, 0.0, 5.0);
  CHECK(same.params.w_reset == enc.params.w_reset);
  CHECK(same.params.w_update == enc.params.w_update);
  CHECK(same.params.w_cand == enc.params.w_cand);

  // identical positive and negative windows give hinge = gamma but equal
  // pulls; make the pair literally the anchor so every distance is zero and
  // the collapsed-pair guard zeroes the subgradient.
  TripletBatch degenerate;
  const FeatureWindow w = random_window(rng, 3);
  degenerate.triples.push_back({w, w, w});
  const GruEncoderParams still = metric_step(enc, degenerate, 0.5, 1.0);
  CHECK(still.params.w_reset == enc.params.w_reset);
  CHECK(still.params.w_cand == enc.params.w_cand);
}

TEST_CASE("metric_step descends on an active batch") {
  const GruEncoderParams enc = make_encoder(53);
  Rng rng(59);
  TripletBatch batch;
  for (int b = 0; b < 4; ++b)
    batch.triples.push_back({random_window(rng, 3), random_window(rng, 3), random_window(rng, 3)});

  const double gamma = 10.0;  // all hinges active
  const double before = triplet_batch_loss(enc, batch, gamma);
  const GruEncoderParams after = metric_step(enc, batch, 1e-3, gamma);
  CHECK(triplet_batch_loss(after, batch, gamma) < before);
}

TEST_CASE("hyperparameter validation rejects bad fields") {
  McHyper good;
  CHECK_NOTHROW(good.validate());

  auto broken = [](auto&& mutate) {
    McHyper h;
    mutate(h);
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  };
  broken([](McHyper& h) { h.gamma = 0.0; });
  broken([](McHyper& h) { h.beta_prime = -1.0; });
  broken([](McHyper& h) { h.alpha_meta = 0.0; });
  broken([](McHyper& h) { h.batch = 0; });
  broken([](McHyper& h) { h.meta_episodes = 0; });
  broken([](McHyper& h) { h.max_rounds = 0; });
  broken([](McHyper& h) { h.online_steps = -1; });
  broken([](McHyper& h) { h.dataset_clusters = 1; });
  broken([](McHyper& h) { h.kmax = 1; });
  broken([](McHyper& h) { h.refs = 1; });
  broken([](McHyper& h) { h.t_ob = 4; });
}

TEST_CASE("make_meta_dataset shapes and determinism") {
  const MetaDataset a = make_meta_dataset(4, 3, 61);
  REQUIRE(a.episodes.size() == 4);
  for (const MetaEpisode& ep : a.episodes) {
    CHECK(ep.support.size() > 3);  // 3 clusters of >= 2 followers plus heads
    CHECK(ep.query.size() > 3);
    std::vector<int> labels = ep.support.labels;
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    CHECK(labels.size() == 3);
  }

  const MetaDataset b = make_meta_dataset(4, 3, 61);
  for (int e = 0; e < 4; ++e)
    for (int i = 0; i < a.episodes[e].support.size(); ++i)
      CHECK(flatten_window(a.episodes[e].support.items[i]) ==
            flatten_window(b.episodes[e].support.items[i]));

  CHECK_THROWS_AS(make_meta_dataset(0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_meta_dataset(2, 1, 1), std::invalid_argument);
}

TEST_CASE("meta_train runs the episode schedule and improves query loss") {
  McHyper hyper;
  hyper.meta_episodes = 20;
  hyper.batch = 8;
  const MetaDataset meta = make_meta_dataset(hyper.meta_episodes, 5, 67);

  std::vector<double> losses;
  const GruEncoderParams w = meta_train(meta, hyper, 71, &losses);
  REQUIRE(static_cast<int>(losses.size()) == hyper.meta_episodes);

  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 5; ++i) {
    head += losses[i];
    tail += losses[hyper.meta_episodes - 5 + i];
  }
  CHECK(tail < head);

  const GruEncoderParams w2 = meta_train(meta, hyper, 71);
  CHECK(w.params.w_reset == w2.params.w_reset);
  CHECK(w.params.w_update == w2.params.w_update);
  CHECK(w.params.w_cand == w2.params.w_cand);

  McHyper hungry = hyper;
  hungry.meta_episodes = 21;
  CHECK_THROWS_AS(meta_train(meta, hungry, 71), std::invalid_argument);
}

TEST_CASE("online_update steps on usable data and skips degenerate data") {
  SwarmConfig cfg;
  cfg.cluster_sizes = {3, 3};
  SwarmState state = init_swarm(cfg, 73);
  state.advance(10);
  const LabeledWindows d_r = observe_windows(state, state.live_indices());

  McHyper hyper;
  hyper.online_steps = 5;
  hyper.batch = 4;
  const GruEncoderParams w0 = make_encoder(79);

  std::vector<double> losses;
  bool skipped = true;
  const GruEncoderParams w1 = online_update(w0, d_r, hyper, 83, &losses, &skipped);
  CHECK_FALSE(skipped);
  CHECK(losses.size() == 5);
  CHECK(w1.params.w_reset != w0.params.w_reset);

  // one cluster only: two labels missing
  const LabeledWindows one_label = observe_windows(state, state.cluster_members(0));
  const GruEncoderParams w2 = online_update(w0, one_label, hyper, 83, &losses, &skipped);
  CHECK(skipped);
  CHECK(losses.empty());
  CHECK(w2.params.w_reset == w0.params.w_reset);

  // all labels singletons: no positive anywhere
  const LabeledWindows singletons = line_dataset({0, 5, 9}, {0, 1, 2});
  const GruEncoderParams w3 = online_update(w0, singletons, hyper, 83, nullptr, &skipped);
  CHECK(skipped);
  CHECK(w3.params.w_update == w0.params.w_update);

  McHyper frozen = hyper;
  frozen.online_steps = 0;
  const GruEncoderParams w4 = online_update(w0, d_r, frozen, 83, &losses, &skipped);
  CHECK_FALSE(skipped);
  CHECK(losses.empty());
  CHECK(w4.params.w_cand == w0.params.w_cand);
}

TEST_CASE("observe_windows mirrors the newest topology window") {
  SwarmConfig cfg;
  cfg.cluster_sizes = {2, 4};
  SwarmState state = init_swarm(cfg, 89);
  state.advance(7);

  const std::vector<int> members = state.live_indices();
  const LabeledWindows data = observe_windows(state, members);
  const TopologyWindow win = state.topology_window(members, state.clock() - 1);

  REQUIRE(data.size() == static_cast<int>(win.members.size()));
  CHECK(data.uavs == win.members);
  for (int j = 0; j < data.size(); ++j) {
    CHECK(data.items[j].anchor == win.anchors[j]);
    CHECK(data.items[j].speeds == win.speeds[j]);
    CHECK(data.labels[j] == state.uav(win.members[j]).cluster_id);
  }
}
