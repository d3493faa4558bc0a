#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "swarmdet/dense_net.hpp"
#include "swarmdet/gru.hpp"

namespace swarmdet {

// Max-subtracted softmax over a vector of scores.
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

// Given y = softmax(s) and dL/dy, returns dL/ds.
Eigen::VectorXd softmax_backward(const Eigen::VectorXd& y, const Eigen::VectorXd& grad_y);

// Flat view over one parameter or gradient tensor. Views stay valid as long
// as the owning object is neither resized nor destroyed.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
};

ParamRef param_ref(const std::string& name, Eigen::MatrixXd& m);
ParamRef param_ref(const std::string& name, Eigen::VectorXd& v);

std::vector<ParamRef> param_refs(const std::string& prefix, DenseNet& net);
std::vector<ParamRef> param_refs(const std::string& prefix, DenseGrads& grads);
std::vector<ParamRef> param_refs(const std::string& prefix, GruParams& p);
std::vector<ParamRef> param_refs(const std::string& prefix, GruGrads& g);

void append_refs(std::vector<ParamRef>& dst, std::vector<ParamRef> src);

// theta <- theta - rate * grad, pairwise over congruent ref lists.
void sgd_apply(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
               double rate);

// First/second gradient-moment accumulators for per-parameter scaled
// descent, one flat pair per ParamRef.
struct AdamState {
  std::vector<Eigen::VectorXd> m1;
  std::vector<Eigen::VectorXd> m2;
  int step = 0;
};

AdamState make_adam(const std::vector<ParamRef>& params);

// Bias-corrected per-parameter scaled step: the raw window-data scales span
// several orders of magnitude, which leaves the plain-SGD loss surface too
// ill-conditioned for a single rate. Gradients themselves are untouched
// (finite-difference checks run on them directly).
void adam_apply(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
                AdamState& state, double rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

struct GradCheckEntry {
  std::string name;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  GradCheckEntry worst;
  Eigen::Index coords_checked = 0;
  bool pass = false;
};

// Central-difference check of every coordinate in params against the
// already-populated analytic refs. loss() must be a pure function of the
// referenced parameters. rel err uses a floor so near-zero gradients do not
// blow up the ratio.
GradCheckReport check_gradient(const std::function<double()>& loss,
                               const std::vector<ParamRef>& params,
                               const std::vector<ParamRef>& analytic, double step = 1e-5,
                               double tol = 1e-4, double denom_floor = 1e-3);

// Flat tensor checkpoint format: {"tensors": [{name, rows, cols, data}]}
// with row-major data. Shapes must already match on load.
nlohmann::json tensors_to_json(const std::vector<ParamRef>& params,
                               const std::vector<Eigen::Index>& rows,
                               const std::vector<Eigen::Index>& cols);

nlohmann::json dense_to_json(const std::string& prefix, const DenseNet& net);
void dense_from_json(const nlohmann::json& j, const std::string& prefix, DenseNet& net);

nlohmann::json gru_to_json(const GruParams& p);
void gru_from_json(const nlohmann::json& j, GruParams& p);

}  // namespace swarmdet
