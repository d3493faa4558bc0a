#pragma once

#include <vector>

#include <Eigen/Core>

#include "swarmdet/rng.hpp"

namespace swarmdet {

// Minimal gated recurrent cell over 3-vectors. Hidden state and input share
// one dimension H; each weight matrix maps a 2H concatenation to H. Note the
// asymmetric concatenation orders below; they are part of the cell contract
// and the backward pass depends on them:
//   reset     r = sigmoid(W_r [h ; v])
//   update    u = sigmoid(W_u [h ; v])
//   candidate c = tanh(W_h [v ; r .* h])
//   output    h' = (1 - u) .* h + u .* c
struct GruParams {
  Eigen::MatrixXd w_reset;
  Eigen::MatrixXd w_update;
  Eigen::MatrixXd w_cand;

  int hidden() const { return static_cast<int>(w_reset.rows()); }

  static GruParams xavier(int hidden, Rng& rng);
};

struct GruGrads {
  Eigen::MatrixXd w_reset;
  Eigen::MatrixXd w_update;
  Eigen::MatrixXd w_cand;

  static GruGrads zeros(int hidden);
  void set_zero();
  void add_scaled(const GruGrads& other, double scale);
  double squared_norm() const;
};

struct GruCellCache {
  Eigen::VectorXd h_prev, input, reset, update, cand;
};

Eigen::VectorXd gru_cell(const GruParams& p, const Eigen::VectorXd& h_prev,
                         const Eigen::VectorXd& input);

Eigen::VectorXd gru_cell_forward(const GruParams& p, const Eigen::VectorXd& h_prev,
                                 const Eigen::VectorXd& input, GruCellCache& cache);

// Accumulates into grads; optionally emits gradients w.r.t. h_prev and input.
void gru_cell_backward(const GruParams& p, const GruCellCache& cache,
                       const Eigen::VectorXd& grad_h_out, GruGrads& grads,
                       Eigen::VectorXd* grad_h_prev = nullptr,
                       Eigen::VectorXd* grad_input = nullptr);

// Chain of identical cells: h_0 = seed, one step per row of inputs (oldest
// row first); returns h_T.
Eigen::VectorXd gru_encode(const GruParams& p, const Eigen::VectorXd& seed,
                           const Eigen::MatrixXd& inputs);

struct GruChainCache {
  std::vector<GruCellCache> cells;
  Eigen::VectorXd h_final;
};

Eigen::VectorXd gru_encode_forward(const GruParams& p, const Eigen::VectorXd& seed,
                                   const Eigen::MatrixXd& inputs, GruChainCache& cache);

// Backpropagates grad_h_final through the whole chain, accumulating weight
// gradients; optionally emits the gradient w.r.t. the seed state.
void gru_encode_backward(const GruParams& p, const GruChainCache& cache,
                         const Eigen::VectorXd& grad_h_final, GruGrads& grads,
                         Eigen::VectorXd* grad_seed = nullptr);

}  // namespace swarmdet
