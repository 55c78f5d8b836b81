#include "mran/adam.hpp"

#include <cmath>

#include "mran/error.hpp"

namespace mran {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.requires_grad())
      throw UsageError("Adam parameter without a gradient buffer: " + p.shape_str());
    m_.emplace_back(static_cast<size_t>(p.size()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.size()), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));

  double clip_scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& p : params_)
      for (double gv : p.grad()) sq += gv * gv;
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip_scale = config_.clip_norm / norm;
  }

  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    auto vals = p.values();
    auto grads = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < m.size(); ++j) {
      double gv = grads[j] * clip_scale;
      if (config_.weight_decay > 0.0) gv += config_.weight_decay * vals[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gv;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gv * gv;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      vals[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace mran
