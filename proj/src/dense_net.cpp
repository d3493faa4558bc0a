#include "swarmdet/dense_net.hpp"

#include <cassert>
#include <cmath>

namespace swarmdet {

namespace {

void apply_activation(Eigen::MatrixXd& m, Activation act) {
  switch (act) {
    case Activation::kTanh:
      m = m.array().tanh();
      break;
    case Activation::kRelu:
      m = m.array().max(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

// Derivative from the post-activation value; valid for all three kinds.
void scale_by_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& post, Activation act) {
  switch (act) {
    case Activation::kTanh:
      delta.array() *= 1.0 - post.array().square();
      break;
    case Activation::kRelu:
      delta.array() *= (post.array() > 0.0).cast<double>();
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

void DenseGrads::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

DenseNet::DenseNet(const std::vector<int>& dims, const std::vector<Activation>& acts) {
  assert(dims.size() >= 2 && acts.size() == dims.size() - 1);
  layers.resize(acts.size());
  for (size_t k = 0; k < acts.size(); ++k) {
    layers[k].weight = Eigen::MatrixXd::Zero(dims[k + 1], dims[k]);
    layers[k].bias = Eigen::VectorXd::Zero(dims[k + 1]);
    layers[k].act = acts[k];
  }
}

DenseNet DenseNet::xavier(const std::vector<int>& dims, const std::vector<Activation>& acts,
                          Rng& rng) {
  DenseNet net(dims, acts);
  for (auto& layer : net.layers) {
    double bound = std::sqrt(6.0 / (layer.weight.rows() + layer.weight.cols()));
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        layer.weight(i, j) = rng.uniform(-bound, bound);
  }
  return net;
}

Eigen::VectorXd DenseNet::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (const auto& layer : layers) {
    Eigen::VectorXd z = layer.weight * a + layer.bias;
    switch (layer.act) {
      case Activation::kTanh:
        a = z.array().tanh();
        break;
      case Activation::kRelu:
        a = z.array().max(0.0);
        break;
      case Activation::kIdentity:
        a = std::move(z);
        break;
    }
  }
  return a;
}

void DenseNet::forward(const Eigen::MatrixXd& x, DenseCache& cache) const {
  assert(x.rows() == input_dim());
  cache.acts.resize(layers.size() + 1);
  cache.acts[0] = x;
  for (size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    cache.acts[k + 1].noalias() = layer.weight * cache.acts[k];
    cache.acts[k + 1].colwise() += layer.bias;
    apply_activation(cache.acts[k + 1], layer.act);
  }
}

void DenseNet::backward(DenseCache& cache, const Eigen::MatrixXd& grad_out, DenseGrads& grads,
                        Eigen::MatrixXd* grad_in) const {
  assert(grads.weight.size() == layers.size());
  cache.delta = grad_out;
  for (size_t k = layers.size(); k-- > 0;) {
    scale_by_derivative(cache.delta, cache.acts[k + 1], layers[k].act);
    grads.weight[k].noalias() += cache.delta * cache.acts[k].transpose();
    grads.bias[k].noalias() += cache.delta.rowwise().sum();
    if (k > 0) {
      cache.scratch.noalias() = layers[k].weight.transpose() * cache.delta;
      cache.delta.swap(cache.scratch);
    } else if (grad_in != nullptr) {
      grad_in->noalias() = layers[0].weight.transpose() * cache.delta;
    }
  }
}

DenseGrads DenseNet::zero_grads() const {
  DenseGrads g;
  g.weight.reserve(layers.size());
  g.bias.reserve(layers.size());
  for (const auto& layer : layers) {
    g.weight.emplace_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.emplace_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

}  // namespace swarmdet
