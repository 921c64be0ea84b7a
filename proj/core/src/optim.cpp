#include "physlaw/numkit/optim.hpp"

#include <cmath>

#include "physlaw/common.hpp"

namespace physlaw::numkit {

AdamW::AdamW(std::vector<NamedParam> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.total_steps < 1) throw DataError("AdamW: total_steps must be >= 1");
  if (cfg_.warmup_steps < 0 || cfg_.warmup_steps >= cfg_.total_steps)
    throw DataError("AdamW: warmup_steps must lie in [0, total_steps)");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    if (!p.tensor.requires_grad())
      throw DataError("AdamW: parameter '" + p.name + "' does not require grad");
    m_.emplace_back(size_t(p.tensor.numel()), 0.0f);
    v_.emplace_back(size_t(p.tensor.numel()), 0.0f);
  }
}

float AdamW::lr_at(std::int64_t step) const {
  if (step < 1) throw DataError("AdamW::lr_at: step is 1-based");
  if (cfg_.warmup_steps > 0 && step <= cfg_.warmup_steps)
    return cfg_.lr_max * float(step) / float(cfg_.warmup_steps);
  std::int64_t span = cfg_.total_steps - cfg_.warmup_steps;
  if (span < 1) span = 1;
  double progress = double(step - 1 - cfg_.warmup_steps) / double(span);
  if (progress > 1.0) progress = 1.0;
  double cosine = 0.5 * (1.0 + std::cos(3.141592653589793238462643383279502884 * progress));
  return float(cfg_.lr_min + (cfg_.lr_max - cfg_.lr_min) * cosine);
}

void AdamW::step() {
  std::int64_t t = step_count_ + 1;
  // Refuse the whole update before touching any parameter.
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto g = params_[pi].tensor.grad();
    if (g.size() != size_t(params_[pi].tensor.numel()))
      throw NumericError("AdamW: parameter '" + params_[pi].name + "' has no gradient");
    for (float gv : g)
      if (!std::isfinite(gv))
        throw NumericError("AdamW: non-finite gradient in '" + params_[pi].name +
                           "' at step " + std::to_string(t) + "; update refused");
  }
  float lr = lr_at(t);
  float bc1 = 1.0f - std::pow(cfg_.beta1, float(t));
  float bc2 = 1.0f - std::pow(cfg_.beta2, float(t));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto val = params_[pi].tensor.value_mut();
    auto g = params_[pi].tensor.grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < val.size(); ++i) {
      float gv = g[i];
      m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * gv;
      v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * gv * gv;
      float mhat = m[i] / bc1;
      float vhat = v[i] / bc2;
      val[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * val[i]);
    }
  }
  step_count_ = t;
  last_lr_ = lr;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace physlaw::numkit
