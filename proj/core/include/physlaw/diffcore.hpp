#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "physlaw/datagen.hpp"
#include "physlaw/numkit/optim.hpp"
#include "physlaw/numkit/rng.hpp"
#include "physlaw/numkit/tensor.hpp"
#include "physlaw/raster.hpp"

namespace physlaw::diffcore {

// Which way the velocity target orients its coefficients. `standard` is the
// usual v-prediction pair y = sqrt(g)*eps - sqrt(1-g)*V, an orthogonal
// rotation with an exact inverse at every signal level. `swapped` is
// y = sqrt(1-g)*eps - sqrt(g)*V; its inverse divides by sqrt(g) and
// sqrt(1-g), so samples cannot be recovered at zero signal. Kept behind this
// flag for comparison; the default everywhere is `standard`.
enum class VParamOrder { standard, swapped };

enum class ScheduleKind { cosine };

// Signal fractions gamma_t for t = 1..steps. gamma_1 = 1 - 1e-4 (clean end,
// finite SNR), gamma_steps = 0 exactly (zero terminal SNR), strictly
// decreasing in between.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> gamma;

  double gamma_at(int t) const;  // 1-based, bounds-checked
  double snr_at(int t) const;    // gamma / (1 - gamma)
};

// Cosine signal curve sampled at T points, rescaled in sqrt-gamma space so
// the endpoints land exactly on 1-1e-4 and 0.
NoiseSchedule make_schedule(int T, ScheduleKind kind = ScheduleKind::cosine);

// V_t = sqrt(gamma_t) V + sqrt(1 - gamma_t) eps.
numkit::Tensor forward_corrupt(const NoiseSchedule& sch,
                               const numkit::Tensor& V, int t,
                               const numkit::Tensor& eps);

numkit::Tensor velocity_target(const NoiseSchedule& sch,
                               const numkit::Tensor& V, int t,
                               const numkit::Tensor& eps,
                               VParamOrder order = VParamOrder::standard);

struct Recovered {
  numkit::Tensor sample;  // V-hat
  numkit::Tensor noise;   // eps-hat
};

// Exact algebraic inverse of (forward_corrupt, velocity_target). The swapped
// order throws NumericError at gamma = 0 (sample side) or gamma = 1 (noise
// side) where its inverse divides by zero.
Recovered recover_from_v(const NoiseSchedule& sch, const numkit::Tensor& V_t,
                         const numkit::Tensor& y, int t,
                         VParamOrder order = VParamOrder::standard);

// Frame-conditioned example. Videos are (L, H, W, 3) channels-last float
// tensors in [-1, 1]; condition equals the clean video on the first c frames
// and is zero elsewhere; mask is 1 on the first c frames.
struct ConditionedBatch {
  numkit::Tensor clean;
  numkit::Tensor condition;
  numkit::Tensor mask;
  int c = 0;
};

ConditionedBatch build_condition(const numkit::Tensor& V, int c);

// u8 video <-> [-1, 1] float tensor, x/127.5 - 1. Quantization rounds to
// nearest and saturates; normalize-then-quantize returns the original bytes.
numkit::Tensor tensor_from_video(const raster::Video& video);
raster::Video video_from_tensor(const numkit::Tensor& t);

// Per-pixel channel concatenation of equally shaped (L, H, W, 3) tensors
// into (L, H, W, 9). Value-level: the result is a leaf.
numkit::Tensor concat_channels(const numkit::Tensor& a,
                               const numkit::Tensor& b,
                               const numkit::Tensor& c);

// The denoiser contract: (L, H, W, 9) input (noisy | condition | mask) and a
// 1-based schedule step, returning the predicted velocity (L, H, W, 3).
using DenoiserFn =
    std::function<numkit::Tensor(const numkit::Tensor& input, int t)>;

// The noise draw used for one example at one training step: timestep uniform
// over [1, T] and a standard-normal tensor, both keyed by (seed, episode_id,
// step) alone. Order of examples in the batch cannot change them.
struct NoiseDraw {
  int t = 0;
  numkit::Tensor eps;
};
NoiseDraw example_noise(const numkit::Shape& shape, const NoiseSchedule& sch,
                        std::uint64_t seed, std::uint64_t episode_id,
                        std::int64_t step);

struct TrainExample {
  numkit::Tensor clean;  // (L, H, W, 3) in [-1, 1]
  int c = 0;
  std::uint64_t episode_id = 0;
};

// One optimization objective evaluation: per example draws (t, eps), corrupts,
// predicts, and accumulates mean squared velocity error over the frames the
// condition does not pin (conditioned frames are clamped at sampling time, so
// supervision there would be vacuous). Runs backward(); the caller owns the
// optimizer step. The per-example reduction happens in episode-id order, so
// the loss is bit-invariant under batch permutation. A non-finite example
// loss throws NumericError naming the episode and timestep.
float training_step(const DenoiserFn& fwd,
                    const std::vector<TrainExample>& batch,
                    const NoiseSchedule& sch, std::uint64_t seed,
                    std::int64_t step,
                    VParamOrder order = VParamOrder::standard);

struct SampleConfig {
  int steps = 50;
  bool ddpm = false;  // ancestral updates instead of deterministic DDIM
  VParamOrder order = VParamOrder::standard;
};

// Generates one video from a condition (zero-padded (L, H, W, 3) tensor whose
// first c frames hold the observed clip). Deterministic DDIM by default; the
// recovered sample is clamped to the condition on the first c frames at every
// step and to [-1, 1] throughout. Output conditioned frames therefore equal
// the condition exactly. steps must be in [1, schedule steps].
numkit::Tensor sample(const DenoiserFn& fwd, const NoiseSchedule& sch,
                      const numkit::Tensor& condition, int c,
                      const SampleConfig& cfg, numkit::Rng& rng);

// --- training loop ----------------------------------------------------------

struct TrainConfig {
  std::int64_t steps = 100;
  int batch_size = 8;
  int schedule_steps = 1000;
  int condition_frames = 3;
  VParamOrder order = VParamOrder::standard;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 500;  // also writes at the final step
  std::int64_t log_every = 10;          // CSV row cadence (also final step)
  std::string out_dir;                  // train_log.csv and model.phyw land here
  std::string extra_config_json;        // embedded verbatim in checkpoints
};

struct TrainResult {
  std::int64_t final_step = 0;
  float final_loss = 0.0f;
};

// Runs optimization steps opt.step_count()+1 .. cfg.steps (so a caller that
// loaded a checkpoint resumes where it stopped). Batches draw example indices
// uniformly from the dataset (mirrored examples included when the manifest
// enables flip augmentation), keyed by (seed, step). Appends
// "step,loss,lr,wall_time" rows to out_dir/train_log.csv and checkpoints to
// out_dir/model.phyw. One logical thread owns parameters and optimizer state.
TrainResult train_loop(const DenoiserFn& fwd, numkit::AdamW& opt,
                       const datagen::Dataset& data, const TrainConfig& cfg);

// Checkpoint layout: param/<name> f32 tensors, opt/m/<name> and opt/v/<name>
// moment buffers, meta/step, and meta/config (the JSON string passed in).
void save_train_state(const std::string& path, numkit::AdamW& opt,
                      const std::string& config_json);
// Restores parameter values, moments, and step count in place; parameter
// names must match exactly. Returns the embedded config JSON.
std::string load_train_state(const std::string& path, numkit::AdamW& opt);

}  // namespace physlaw::diffcore
