#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "physlaw/numkit/tensor.hpp"

namespace physlaw::numkit {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct AdamWConfig {
  float lr_max = 1e-4f;  // peak learning rate; cosine-decays toward lr_min
  float lr_min = 0.0f;
  std::int64_t total_steps = 1;
  std::int64_t warmup_steps = 0;  // linear ramp 0 -> lr_max before the decay
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.01f;  // decoupled: p -= lr * wd * p
};

// AdamW with bias correction and a warmup+cosine learning-rate schedule.
// The first post-warmup update runs at exactly lr_max.
class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, AdamWConfig cfg);

  // Learning rate used by update number `step` (1-based).
  float lr_at(std::int64_t step) const;

  // Applies one update from the parameters' current grads, then increments
  // the step counter. A non-finite gradient refuses the whole update and
  // throws NumericError naming the parameter.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  float last_lr() const { return last_lr_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<NamedParam>& params() const { return params_; }

  // First/second moment buffers, index-aligned with params(); exposed for
  // checkpoint round trips.
  std::vector<std::vector<float>>& moments_m() { return m_; }
  std::vector<std::vector<float>>& moments_v() { return v_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

 private:
  std::vector<NamedParam> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t step_count_ = 0;
  float last_lr_ = 0.0f;
};

}  // namespace physlaw::numkit
