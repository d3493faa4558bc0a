#include "swarmdet/gru.hpp"

#include <cassert>
#include <cmath>

namespace swarmdet {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

GruParams GruParams::xavier(int hidden, Rng& rng) {
  GruParams p;
  double bound = std::sqrt(6.0 / (hidden + 2 * hidden));
  auto draw = [&] {
    Eigen::MatrixXd m(hidden, 2 * hidden);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
  };
  p.w_reset = draw();
  p.w_update = draw();
  p.w_cand = draw();
  return p;
}

GruGrads GruGrads::zeros(int hidden) {
  GruGrads g;
  g.w_reset = Eigen::MatrixXd::Zero(hidden, 2 * hidden);
  g.w_update = Eigen::MatrixXd::Zero(hidden, 2 * hidden);
  g.w_cand = Eigen::MatrixXd::Zero(hidden, 2 * hidden);
  return g;
}

void GruGrads::set_zero() {
  w_reset.setZero();
  w_update.setZero();
  w_cand.setZero();
}

void GruGrads::add_scaled(const GruGrads& other, double scale) {
  w_reset += scale * other.w_reset;
  w_update += scale * other.w_update;
  w_cand += scale * other.w_cand;
}

double GruGrads::squared_norm() const {
  return w_reset.squaredNorm() + w_update.squaredNorm() + w_cand.squaredNorm();
}

Eigen::VectorXd gru_cell(const GruParams& p, const Eigen::VectorXd& h_prev,
                         const Eigen::VectorXd& input) {
  GruCellCache cache;
  return gru_cell_forward(p, h_prev, input, cache);
}

Eigen::VectorXd gru_cell_forward(const GruParams& p, const Eigen::VectorXd& h_prev,
                                 const Eigen::VectorXd& input, GruCellCache& cache) {
  assert(h_prev.size() == p.hidden() && input.size() == p.hidden());
  cache.h_prev = h_prev;
  cache.input = input;
  Eigen::VectorXd hv = concat(h_prev, input);
  cache.reset = sigmoid(p.w_reset * hv);
  cache.update = sigmoid(p.w_update * hv);
  Eigen::VectorXd vrh = concat(input, cache.reset.cwiseProduct(h_prev));
  cache.cand = (p.w_cand * vrh).array().tanh().matrix();
  return (1.0 - cache.update.array()).matrix().cwiseProduct(h_prev) +
         cache.update.cwiseProduct(cache.cand);
}

void gru_cell_backward(const GruParams& p, const GruCellCache& cache,
                       const Eigen::VectorXd& grad_h_out, GruGrads& grads,
                       Eigen::VectorXd* grad_h_prev, Eigen::VectorXd* grad_input) {
  const int h = p.hidden();
  const Eigen::VectorXd& hp = cache.h_prev;
  const Eigen::VectorXd& v = cache.input;

  // h' = (1-u).*hp + u.*c
  Eigen::VectorXd d_cand = grad_h_out.cwiseProduct(cache.update);
  Eigen::VectorXd d_update = grad_h_out.cwiseProduct(cache.cand - hp);
  Eigen::VectorXd d_hp = grad_h_out.cwiseProduct((1.0 - cache.update.array()).matrix());
  Eigen::VectorXd d_v = Eigen::VectorXd::Zero(h);

  // candidate branch: c = tanh(W_h [v ; r.*hp])
  Eigen::VectorXd d_pre_c = d_cand.cwiseProduct((1.0 - cache.cand.array().square()).matrix());
  Eigen::VectorXd vrh = Eigen::VectorXd(2 * h);
  vrh << v, cache.reset.cwiseProduct(hp);
  grads.w_cand.noalias() += d_pre_c * vrh.transpose();
  Eigen::VectorXd d_vrh = p.w_cand.transpose() * d_pre_c;
  d_v += d_vrh.head(h);
  Eigen::VectorXd d_rh = d_vrh.tail(h);
  Eigen::VectorXd d_reset = d_rh.cwiseProduct(hp);
  d_hp += d_rh.cwiseProduct(cache.reset);

  // gate branches share the [hp ; v] input
  Eigen::VectorXd hv(2 * h);
  hv << hp, v;
  Eigen::VectorXd d_pre_u =
      d_update.cwiseProduct(cache.update.cwiseProduct((1.0 - cache.update.array()).matrix()));
  grads.w_update.noalias() += d_pre_u * hv.transpose();
  Eigen::VectorXd d_hv = p.w_update.transpose() * d_pre_u;

  Eigen::VectorXd d_pre_r =
      d_reset.cwiseProduct(cache.reset.cwiseProduct((1.0 - cache.reset.array()).matrix()));
  grads.w_reset.noalias() += d_pre_r * hv.transpose();
  d_hv.noalias() += p.w_reset.transpose() * d_pre_r;

  d_hp += d_hv.head(h);
  d_v += d_hv.tail(h);

  if (grad_h_prev != nullptr) *grad_h_prev = d_hp;
  if (grad_input != nullptr) *grad_input = d_v;
}

Eigen::VectorXd gru_encode(const GruParams& p, const Eigen::VectorXd& seed,
                           const Eigen::MatrixXd& inputs) {
  GruChainCache cache;
  return gru_encode_forward(p, seed, inputs, cache);
}

Eigen::VectorXd gru_encode_forward(const GruParams& p, const Eigen::VectorXd& seed,
                                   const Eigen::MatrixXd& inputs, GruChainCache& cache) {
  assert(inputs.cols() == p.hidden());
  cache.cells.resize(inputs.rows());
  Eigen::VectorXd h = seed;
  for (Eigen::Index t = 0; t < inputs.rows(); ++t)
    h = gru_cell_forward(p, h, inputs.row(t).transpose(), cache.cells[t]);
  cache.h_final = h;
  return h;
}

void gru_encode_backward(const GruParams& p, const GruChainCache& cache,
                         const Eigen::VectorXd& grad_h_final, GruGrads& grads,
                         Eigen::VectorXd* grad_seed) {
  Eigen::VectorXd dh = grad_h_final;
  Eigen::VectorXd dh_prev;
  for (size_t t = cache.cells.size(); t-- > 0;) {
    gru_cell_backward(p, cache.cells[t], dh, grads, &dh_prev, nullptr);
    dh = dh_prev;
  }
  if (grad_seed != nullptr) *grad_seed = dh;
}

}  // namespace swarmdet
