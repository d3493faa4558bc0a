#pragma once

#include <vector>

#include <Eigen/Core>

#include "swarmdet/rng.hpp"

namespace swarmdet {

enum class Activation { kTanh, kRelu, kIdentity };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation act = Activation::kTanh;
};

// Post-activation values per layer; acts[0] is the input batch, columns are
// samples. Reused across calls to avoid reallocation in training loops.
struct DenseCache {
  std::vector<Eigen::MatrixXd> acts;
  Eigen::MatrixXd delta;    // scratch for backward
  Eigen::MatrixXd scratch;  // second backward buffer
};

struct DenseGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
};

// Fully connected net with explicit forward caches and a hand-written
// backward pass. All heavy paths are batched: inputs and gradients are
// matrices whose columns are independent samples.
class DenseNet {
 public:
  DenseNet() = default;

  // dims = {in, h1, ..., out}; acts has dims.size()-1 entries.
  DenseNet(const std::vector<int>& dims, const std::vector<Activation>& acts);

  static DenseNet xavier(const std::vector<int>& dims, const std::vector<Activation>& acts,
                         Rng& rng);

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

  void forward(const Eigen::MatrixXd& x, DenseCache& cache) const;
  const Eigen::MatrixXd& output(const DenseCache& cache) const { return cache.acts.back(); }

  // Accumulates parameter gradients; grad_out is dL/d(output) with the same
  // shape as the cached output. If grad_in is non-null it receives
  // dL/d(input). cache.delta is clobbered.
  void backward(DenseCache& cache, const Eigen::MatrixXd& grad_out, DenseGrads& grads,
                Eigen::MatrixXd* grad_in = nullptr) const;

  DenseGrads zero_grads() const;

  std::vector<DenseLayer> layers;
};

}  // namespace swarmdet
