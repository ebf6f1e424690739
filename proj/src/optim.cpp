#include "mygo/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mygo {

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<Tensor> params)
    : cfg_(cfg), params_(std::move(params)) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].size(), 0.0);
    if (cfg_.kind == OptKind::adam) v_[i].assign(params_[i].size(), 0.0);
  }
}

void Optimizer::step() {
  for (const Tensor& p : params_)
    if (!p.has_grad())
      throw std::logic_error("optimizer step with a missing gradient");
  ++steps_;
  if (cfg_.kind == OptKind::sgd_momentum) {
    for (size_t i = 0; i < params_.size(); ++i) {
      auto pd = params_[i].data();
      auto gd = params_[i].grad();
      auto& vel = m_[i];
      for (size_t j = 0; j < pd.size(); ++j) {
        vel[j] = cfg_.momentum * vel[j] + gd[j];
        pd[j] -= cfg_.lr * vel[j];
      }
    }
  } else {
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto pd = params_[i].data();
      auto gd = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < pd.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gd[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gd[j] * gd[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        pd[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }
  for (Tensor& p : params_) p.clear_grad();
}

}  // namespace mygo
