#include "swarmdet/diff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace swarmdet {

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  Eigen::ArrayXd shifted = scores.array() - scores.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

Eigen::VectorXd softmax_backward(const Eigen::VectorXd& y, const Eigen::VectorXd& grad_y) {
  double dot = y.dot(grad_y);
  return (y.array() * (grad_y.array() - dot)).matrix();
}

ParamRef param_ref(const std::string& name, Eigen::MatrixXd& m) {
  return {name, m.data(), m.size()};
}

ParamRef param_ref(const std::string& name, Eigen::VectorXd& v) {
  return {name, v.data(), v.size()};
}

std::vector<ParamRef> param_refs(const std::string& prefix, DenseNet& net) {
  std::vector<ParamRef> refs;
  for (size_t k = 0; k < net.layers.size(); ++k) {
    refs.push_back(param_ref(prefix + ".w" + std::to_string(k), net.layers[k].weight));
    refs.push_back(param_ref(prefix + ".b" + std::to_string(k), net.layers[k].bias));
  }
  return refs;
}

std::vector<ParamRef> param_refs(const std::string& prefix, DenseGrads& grads) {
  std::vector<ParamRef> refs;
  for (size_t k = 0; k < grads.weight.size(); ++k) {
    refs.push_back(param_ref(prefix + ".w" + std::to_string(k), grads.weight[k]));
    refs.push_back(param_ref(prefix + ".b" + std::to_string(k), grads.bias[k]));
  }
  return refs;
}

std::vector<ParamRef> param_refs(const std::string& prefix, GruParams& p) {
  return {param_ref(prefix + ".reset", p.w_reset), param_ref(prefix + ".update", p.w_update),
          param_ref(prefix + ".cand", p.w_cand)};
}

std::vector<ParamRef> param_refs(const std::string& prefix, GruGrads& g) {
  return {param_ref(prefix + ".reset", g.w_reset), param_ref(prefix + ".update", g.w_update),
          param_ref(prefix + ".cand", g.w_cand)};
}

void append_refs(std::vector<ParamRef>& dst, std::vector<ParamRef> src) {
  for (auto& r : src) dst.push_back(std::move(r));
}

void sgd_apply(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
               double rate) {
  if (params.size() != grads.size()) throw std::invalid_argument("sgd_apply: ref count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size)
      throw std::invalid_argument("sgd_apply: shape mismatch at " + params[i].name);
    Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size);
    Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size);
    p.noalias() -= rate * g;
  }
}

AdamState make_adam(const std::vector<ParamRef>& params) {
  AdamState state;
  for (const ParamRef& p : params) {
    state.m1.push_back(Eigen::VectorXd::Zero(p.size));
    state.m2.push_back(Eigen::VectorXd::Zero(p.size));
  }
  return state;
}

void adam_apply(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
                AdamState& state, double rate, double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != state.m1.size())
    throw std::invalid_argument("adam_apply: ref count mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, state.step);
  const double c2 = 1.0 - std::pow(beta2, state.step);
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size)
      throw std::invalid_argument("adam_apply: shape mismatch at " + params[i].name);
    Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size);
    Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size);
    Eigen::VectorXd& m1 = state.m1[i];
    Eigen::VectorXd& m2 = state.m2[i];
    m1 = beta1 * m1 + (1.0 - beta1) * g;
    m2 = beta2 * m2 + (1.0 - beta2) * g.array().square().matrix();
    p.array() -= rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
  }
}

GradCheckReport check_gradient(const std::function<double()>& loss,
                               const std::vector<ParamRef>& params,
                               const std::vector<ParamRef>& analytic, double step, double tol,
                               double denom_floor) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("check_gradient: ref count mismatch");
  GradCheckReport report;
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != analytic[i].size)
      throw std::invalid_argument("check_gradient: shape mismatch at " + params[i].name);
    for (Eigen::Index j = 0; j < params[i].size; ++j) {
      double& theta = params[i].data[j];
      const double saved = theta;
      const double h = step * std::max(1.0, std::abs(saved));
      theta = saved + h;
      const double plus = loss();
      theta = saved - h;
      const double minus = loss();
      theta = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double an = analytic[i].data[j];
      const double denom = std::max({std::abs(numeric), std::abs(an), denom_floor});
      const double rel = std::abs(numeric - an) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {params[i].name, j, an, numeric, rel};
      }
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

namespace {

nlohmann::json tensor_json(const std::string& name, const double* data, Eigen::Index rows,
                           Eigen::Index cols) {
  // Eigen default storage is column-major; emit row-major for readability.
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) values.push_back(data[c * rows + r]);
  return {{"name", name}, {"rows", rows}, {"cols", cols}, {"data", std::move(values)}};
}

void tensor_load(const nlohmann::json& t, double* data, Eigen::Index rows, Eigen::Index cols) {
  if (t.at("rows").get<Eigen::Index>() != rows || t.at("cols").get<Eigen::Index>() != cols)
    throw std::invalid_argument("tensor shape mismatch for " + t.at("name").get<std::string>());
  const auto& values = t.at("data");
  if (static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw std::invalid_argument("tensor size mismatch for " + t.at("name").get<std::string>());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) data[c * rows + r] = values[k++].get<double>();
}

const nlohmann::json& find_tensor(const nlohmann::json& j, const std::string& name) {
  for (const auto& t : j.at("tensors"))
    if (t.at("name").get<std::string>() == name) return t;
  throw std::invalid_argument("tensor not found: " + name);
}

}  // namespace

nlohmann::json dense_to_json(const std::string& prefix, const DenseNet& net) {
  nlohmann::json tensors = nlohmann::json::array();
  for (size_t k = 0; k < net.layers.size(); ++k) {
    const auto& layer = net.layers[k];
    tensors.push_back(tensor_json(prefix + ".w" + std::to_string(k), layer.weight.data(),
                                  layer.weight.rows(), layer.weight.cols()));
    tensors.push_back(
        tensor_json(prefix + ".b" + std::to_string(k), layer.bias.data(), layer.bias.size(), 1));
  }
  return {{"tensors", std::move(tensors)}};
}

void dense_from_json(const nlohmann::json& j, const std::string& prefix, DenseNet& net) {
  for (size_t k = 0; k < net.layers.size(); ++k) {
    auto& layer = net.layers[k];
    tensor_load(find_tensor(j, prefix + ".w" + std::to_string(k)), layer.weight.data(),
                layer.weight.rows(), layer.weight.cols());
    tensor_load(find_tensor(j, prefix + ".b" + std::to_string(k)), layer.bias.data(),
                layer.bias.size(), 1);
  }
}

nlohmann::json gru_to_json(const GruParams& p) {
  nlohmann::json tensors = nlohmann::json::array();
  tensors.push_back(tensor_json("gru.reset", p.w_reset.data(), p.w_reset.rows(), p.w_reset.cols()));
  tensors.push_back(
      tensor_json("gru.update", p.w_update.data(), p.w_update.rows(), p.w_update.cols()));
  tensors.push_back(tensor_json("gru.cand", p.w_cand.data(), p.w_cand.rows(), p.w_cand.cols()));
  return {{"tensors", std::move(tensors)}};
}

void gru_from_json(const nlohmann::json& j, GruParams& p) {
  tensor_load(find_tensor(j, "gru.reset"), p.w_reset.data(), p.w_reset.rows(), p.w_reset.cols());
  tensor_load(find_tensor(j, "gru.update"), p.w_update.data(), p.w_update.rows(),
              p.w_update.cols());
  tensor_load(find_tensor(j, "gru.cand"), p.w_cand.data(), p.w_cand.rows(), p.w_cand.cols());
}

}  // namespace swarmdet
