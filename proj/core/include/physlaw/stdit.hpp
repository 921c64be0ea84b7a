#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "physlaw/numkit/optim.hpp"
#include "physlaw/numkit/tensor.hpp"

namespace physlaw::stdit {

// Spacetime-patch transformer sizes. The denoiser consumes a 9-channel stack
// (noisy RGB | condition RGB | mask RGB) and predicts a 3-channel velocity.
struct ModelConfig {
  int layers = 4;
  int hidden = 128;
  int heads = 4;
  int p_t = 2;
  int p_h = 4;
  int p_w = 4;
  int in_channels = 9;
  int out_channels = 3;
  int temb_dim = 128;

  int head_dim() const { return hidden / heads; }
  // DataError on violated invariants: hidden divisible by heads, even head
  // dim of at least 8 (three rotary bands need whole pairs), even timestep
  // embedding, positive patch sizes.
  void validate() const;
};

// nano (4/128/4) and micro (8/256/8) are the desk-scale defaults; dit-s
// (12/384/6), dit-b (12/768/12), dit-l (24/1024/16) and dit-xl (28/1152/16)
// match the published size table. All use patch (2, 4, 4).
ModelConfig preset_config(const std::string& name);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& json);

// Patch-grid coordinates of one token.
struct GridCoord {
  int t = 0;
  int y = 0;
  int x = 0;
  bool operator==(const GridCoord&) const = default;
};

struct TokenSequence {
  numkit::Tensor tokens;  // (N, p_t*p_h*p_w*C), token-major patch vectors
  std::vector<GridCoord> coords;
};

// Lexicographic (t, y, x) token order; within a token, (dt, dy, dx, c) order.
// unpatchify(patchify(v).tokens) reproduces v exactly; channel count comes
// from the tensor, so the same maps serve the 9-channel input and 3-channel
// output.
TokenSequence patchify(const numkit::Tensor& video, const ModelConfig& cfg);
numkit::Tensor unpatchify(const numkit::Tensor& tokens, const ModelConfig& cfg,
                          const numkit::Shape& video_shape);

// Head-dim split into (t, y, x) rotary bands: a quarter to time rounded down
// to a whole pair count, the rest halved between y and x with x absorbing the
// rounding remainder. 32 -> (8, 12, 12), 64 -> (16, 24, 24), 72 -> (18, 26, 28).
std::array<int, 3> rope_bands(int head_dim);

struct RopeTables {
  std::shared_ptr<const std::vector<float>> cos_tab;
  std::shared_ptr<const std::vector<float>> sin_tab;
};

// Per-token cos/sin tables, laid out token-major with head_dim/2 pairs per
// token, angles coord * base^(-2j/band) within each band. Rotating queries
// and keys with these makes their dot products depend only on coordinate
// differences per band.
RopeTables rope3d_tables(const std::vector<GridCoord>& coords, int head_dim,
                         double base = 10000.0);

// Observability hook for the attention invariant (softmax rows sum to 1).
struct ForwardStats {
  float attn_row_sum_min = 0.0f;
  float attn_row_sum_max = 0.0f;
};

// DiT-style denoiser: patch embed, adaLN-zero transformer blocks with full
// spatiotemporal self-attention and 3D-rotary q/k, modulated final norm, and
// a zero-initialized output projection (the forward pass is exactly zero at
// init). Timestep enters as a sinusoidal embedding through a two-layer MLP.
class StDiT {
 public:
  StDiT(const ModelConfig& cfg, std::uint64_t seed);

  // stack: (L, H, W, in_channels) with L, H, W divisible by the patch sizes.
  // Returns (L, H, W, out_channels). Forward/backward are single-threaded per
  // step; numkit ops may parallelize internally.
  numkit::Tensor forward(const numkit::Tensor& stack, int t,
                         ForwardStats* stats = nullptr);

  // Stable name -> tensor view of every parameter, checkpoint order.
  std::vector<numkit::NamedParam> named_params() const;
  const ModelConfig& config() const { return cfg_; }

  // Closed-form parameter count; matches named_params() numels exactly.
  static std::int64_t param_count(const ModelConfig& cfg);

 private:
  struct Block {
    numkit::Tensor adaln_w, adaln_b;
    numkit::Tensor qkv_w, qkv_b;
    numkit::Tensor proj_w, proj_b;
    numkit::Tensor fc1_w, fc1_b;
    numkit::Tensor fc2_w, fc2_b;
  };

  // Shape-dependent index maps and rotary tables, rebuilt when the input
  // shape changes. One entry; training and sampling use a fixed shape.
  struct Plan {
    numkit::Shape video_shape;
    std::int64_t n_tokens = 0;
    std::shared_ptr<std::vector<std::int64_t>> patch_idx;
    std::shared_ptr<std::vector<std::int64_t>> unpatch_idx;
    std::shared_ptr<std::vector<std::int64_t>> q_idx, k_idx, v_idx, merge_idx;
    std::shared_ptr<const std::vector<float>> cos_tab, sin_tab;
  };
  const Plan& plan_for(const numkit::Shape& shape) const;

  ModelConfig cfg_;
  numkit::Tensor embed_w_, embed_b_;
  numkit::Tensor temb1_w_, temb1_b_, temb2_w_, temb2_b_;
  std::vector<Block> blocks_;
  numkit::Tensor final_adaln_w_, final_adaln_b_;
  numkit::Tensor final_w_, final_b_;
  std::vector<std::shared_ptr<std::vector<std::int64_t>>> mod_slice_;  // 6 of (hidden)
  std::vector<std::shared_ptr<std::vector<std::int64_t>>> fin_slice_;  // 2 of (hidden)
  mutable std::unique_ptr<Plan> plan_;
};

}  // namespace physlaw::stdit
