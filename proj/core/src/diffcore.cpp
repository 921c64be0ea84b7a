#include "physlaw/diffcore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "physlaw/common.hpp"
#include "physlaw/numkit/checkpoint.hpp"

namespace physlaw::diffcore {

namespace fs = std::filesystem;
using numkit::Rng;
using numkit::Shape;
using numkit::Tensor;

namespace {

constexpr std::uint64_t kSaltNoise = 0x6e6f697365ULL;
constexpr std::uint64_t kSaltBatchSel = 0x6261746368ULL;

void check_video_shape(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() != 4 || t.dim(3) != 3)
    throw DataError(std::string(what) +
                    " must be an (L, H, W, 3) tensor, got shape " +
                    (t.defined() ? numkit::shape_str(t.shape()) : "<empty>"));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw DataError(std::string(what) + ": shape mismatch, " +
                    numkit::shape_str(a.shape()) + " vs " +
                    numkit::shape_str(b.shape()));
}

struct Coeffs {
  float sg;   // sqrt(gamma)
  float sog;  // sqrt(1 - gamma)
};

Coeffs coeffs_at(const NoiseSchedule& sch, int t) {
  double g = sch.gamma_at(t);
  return {float(std::sqrt(g)), float(std::sqrt(1.0 - g))};
}

}  // namespace

double NoiseSchedule::gamma_at(int t) const {
  if (t < 1 || t > steps)
    throw DataError("schedule step " + std::to_string(t) +
                    " outside [1, " + std::to_string(steps) + "]");
  return gamma[size_t(t) - 1];
}

double NoiseSchedule::snr_at(int t) const {
  double g = gamma_at(t);
  return g / (1.0 - g);
}

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
  if (kind != ScheduleKind::cosine)
    throw UsageError("unknown noise schedule kind");
  if (T < 2) throw DataError("noise schedule needs at least 2 steps");

  // Normalized cosine signal curve g(x) = cos^2((x+s)/(1+s) * pi/2) / g(0)
  // on x in [0, 1]; g(0) = 1, g(1) = 0.
  const double s = 0.008;
  const double half_pi = std::numbers::pi / 2.0;
  auto curve = [&](double x) {
    double c = std::cos((x + s) / (1.0 + s) * half_pi);
    return c * c;
  };
  const double f0 = curve(0.0);
  const double g1 = 1.0 - 1e-4;

  // Start the sampled segment where the curve crosses g1 so the first step
  // sits at 1-1e-4 for every T, then rescale in sqrt-gamma space so the last
  // step lands exactly on zero. Endpoints are pinned outright; floating-point
  // rescale residue must not nudge them across the invariant boundaries.
  double x1 = std::acos(std::sqrt(g1 * f0)) / half_pi * (1.0 + s) - s;
  double u1 = std::sqrt(g1);
  double uT = std::sqrt(curve(1.0) / f0);
  double rescale = u1 / (u1 - uT);

  NoiseSchedule sch;
  sch.steps = T;
  sch.gamma.assign(size_t(T), 0.0);
  sch.gamma[0] = g1;
  sch.gamma[size_t(T) - 1] = 0.0;
  for (int t = 2; t < T; ++t) {
    double x = x1 + (1.0 - x1) * double(t - 1) / double(T - 1);
    double u = (std::sqrt(curve(x) / f0) - uT) * rescale;
    sch.gamma[size_t(t) - 1] = u * u;
  }
  return sch;
}

Tensor forward_corrupt(const NoiseSchedule& sch, const Tensor& V, int t,
                       const Tensor& eps) {
  check_same_shape(V, eps, "forward_corrupt");
  Coeffs k = coeffs_at(sch, t);
  return numkit::add(numkit::scale(V, k.sg), numkit::scale(eps, k.sog));
}

Tensor velocity_target(const NoiseSchedule& sch, const Tensor& V, int t,
                       const Tensor& eps, VParamOrder order) {
  check_same_shape(V, eps, "velocity_target");
  Coeffs k = coeffs_at(sch, t);
  if (order == VParamOrder::standard)
    return numkit::sub(numkit::scale(eps, k.sg), numkit::scale(V, k.sog));
  return numkit::sub(numkit::scale(eps, k.sog), numkit::scale(V, k.sg));
}

Recovered recover_from_v(const NoiseSchedule& sch, const Tensor& V_t,
                         const Tensor& y, int t, VParamOrder order) {
  check_same_shape(V_t, y, "recover_from_v");
  double g = sch.gamma_at(t);
  Coeffs k = coeffs_at(sch, t);
  Recovered r;
  if (order == VParamOrder::standard) {
    r.sample = numkit::sub(numkit::scale(V_t, k.sg), numkit::scale(y, k.sog));
    r.noise = numkit::add(numkit::scale(V_t, k.sog), numkit::scale(y, k.sg));
    return r;
  }
  if (g <= 0.0)
    throw NumericError(
        "swapped velocity order cannot recover the sample at zero signal "
        "(t=" + std::to_string(t) + ")");
  if (g >= 1.0)
    throw NumericError(
        "swapped velocity order cannot recover the noise at full signal "
        "(t=" + std::to_string(t) + ")");
  r.sample = numkit::scale(numkit::sub(V_t, y), float(0.5 / std::sqrt(g)));
  r.noise = numkit::scale(numkit::add(V_t, y), float(0.5 / std::sqrt(1.0 - g)));
  return r;
}

ConditionedBatch build_condition(const Tensor& V, int c) {
  check_video_shape(V, "build_condition: video");
  std::int64_t L = V.dim(0);
  if (c < 1 || c > L)
    throw DataError("condition length " + std::to_string(c) +
                    " outside [1, " + std::to_string(L) + "]");
  std::int64_t frame = V.numel() / L;
  std::vector<float> cond(size_t(V.numel()), 0.0f);
  std::vector<float> mask(size_t(V.numel()), 0.0f);
  auto v = V.value();
  std::copy(v.begin(), v.begin() + c * frame, cond.begin());
  std::fill(mask.begin(), mask.begin() + size_t(c * frame), 1.0f);
  ConditionedBatch out;
  out.clean = V;
  out.condition = Tensor::from_data(V.shape(), std::move(cond));
  out.mask = Tensor::from_data(V.shape(), std::move(mask));
  out.c = c;
  return out;
}

Tensor tensor_from_video(const raster::Video& video) {
  Shape shape{video.frames, video.height, video.width, 3};
  std::vector<float> data(video.rgb.size());
  for (size_t i = 0; i < video.rgb.size(); ++i)
    data[i] = float(video.rgb[i]) / 127.5f - 1.0f;
  return Tensor::from_data(std::move(shape), std::move(data));
}

raster::Video video_from_tensor(const Tensor& t) {
  check_video_shape(t, "video_from_tensor: tensor");
  raster::Video v;
  v.frames = int(t.dim(0));
  v.height = int(t.dim(1));
  v.width = int(t.dim(2));
  v.rgb.resize(size_t(t.numel()));
  auto x = t.value();
  for (size_t i = 0; i < v.rgb.size(); ++i) {
    float f = std::clamp(x[i], -1.0f, 1.0f);
    long q = std::lround((f + 1.0f) * 127.5f);
    v.rgb[i] = std::uint8_t(std::clamp(q, 0L, 255L));
  }
  return v;
}

Tensor concat_channels(const Tensor& a, const Tensor& b, const Tensor& c) {
  check_video_shape(a, "concat_channels");
  check_same_shape(a, b, "concat_channels");
  check_same_shape(a, c, "concat_channels");
  std::int64_t px = a.numel() / 3;
  std::vector<float> out(size_t(px) * 9);
  auto va = a.value();
  auto vb = b.value();
  auto vc = c.value();
  for (std::int64_t p = 0; p < px; ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      out[size_t(p * 9 + ch)] = va[size_t(p * 3 + ch)];
      out[size_t(p * 9 + 3 + ch)] = vb[size_t(p * 3 + ch)];
      out[size_t(p * 9 + 6 + ch)] = vc[size_t(p * 3 + ch)];
    }
  }
  return Tensor::from_data({a.dim(0), a.dim(1), a.dim(2), 9}, std::move(out));
}

NoiseDraw example_noise(const numkit::Shape& shape, const NoiseSchedule& sch,
                        std::uint64_t seed, std::uint64_t episode_id,
                        std::int64_t step) {
  if (sch.steps < 2) throw DataError("noise schedule needs at least 2 steps");
  Rng rng(Rng::mix({seed, kSaltNoise, episode_id, std::uint64_t(step)}));
  NoiseDraw d;
  d.t = 1 + int(rng.below(std::uint64_t(sch.steps)));
  std::vector<float> eps(size_t(numkit::shape_numel(shape)));
  for (float& e : eps) e = rng.gaussian_f();
  d.eps = Tensor::from_data(shape, std::move(eps));
  return d;
}

float training_step(const DenoiserFn& fwd, const std::vector<TrainExample>& batch,
                    const NoiseSchedule& sch, std::uint64_t seed,
                    std::int64_t step, VParamOrder order) {
  if (batch.empty()) throw DataError("training_step: empty batch");

  // Reduce in episode order so the loss and its gradients do not depend on
  // how the caller happened to arrange the batch.
  std::vector<size_t> by_id(batch.size());
  std::iota(by_id.begin(), by_id.end(), size_t(0));
  std::stable_sort(by_id.begin(), by_id.end(), [&](size_t a, size_t b) {
    return batch[a].episode_id < batch[b].episode_id;
  });

  Tensor total;
  for (size_t k : by_id) {
    const TrainExample& ex = batch[k];
    check_video_shape(ex.clean, "training_step: clean video");
    std::int64_t L = ex.clean.dim(0);
    std::int64_t supervised = (L - ex.c) * ex.clean.numel() / L;
    if (supervised <= 0)
      throw DataError("training_step: condition covers every frame of episode " +
                      std::to_string(ex.episode_id) + "; nothing to supervise");
    ConditionedBatch cb = build_condition(ex.clean, ex.c);
    NoiseDraw draw = example_noise(ex.clean.shape(), sch, seed, ex.episode_id, step);
    Tensor noisy = forward_corrupt(sch, ex.clean, draw.t, draw.eps);
    Tensor target = velocity_target(sch, ex.clean, draw.t, draw.eps, order);
    Tensor pred = fwd(concat_channels(noisy, cb.condition, cb.mask), draw.t);
    if (!pred.defined() || pred.shape() != ex.clean.shape())
      throw DataError("training_step: denoiser output shape " +
                      (pred.defined() ? numkit::shape_str(pred.shape()) : "<empty>") +
                      " does not match the video shape " +
                      numkit::shape_str(ex.clean.shape()));

    std::vector<float> keep(size_t(ex.clean.numel()), 1.0f);
    std::fill(keep.begin(), keep.begin() + size_t(ex.c * (ex.clean.numel() / L)), 0.0f);
    Tensor diff = numkit::sub(pred, target);
    Tensor masked = numkit::mul(numkit::mul(diff, diff),
                                Tensor::from_data(ex.clean.shape(), std::move(keep)));
    Tensor ex_loss = numkit::scale(numkit::sum(masked), 1.0f / float(supervised));
    float value = ex_loss.value()[0];
    if (!std::isfinite(value))
      throw NumericError("training loss is not finite at t=" +
                         std::to_string(draw.t) + " for episode " +
                         std::to_string(ex.episode_id));
    total = total.defined() ? numkit::add(total, ex_loss) : ex_loss;
  }
  Tensor loss = numkit::scale(total, 1.0f / float(batch.size()));
  loss.backward();
  return loss.value()[0];
}

numkit::Tensor sample(const DenoiserFn& fwd, const NoiseSchedule& sch,
                      const Tensor& condition, int c, const SampleConfig& cfg,
                      Rng& rng) {
  check_video_shape(condition, "sample: condition");
  std::int64_t L = condition.dim(0);
  if (c < 1 || c > L)
    throw DataError("condition length " + std::to_string(c) +
                    " outside [1, " + std::to_string(L) + "]");
  if (cfg.steps < 1) throw UsageError("sampling needs at least 1 step");
  if (cfg.steps > sch.steps)
    throw UsageError("sampling steps " + std::to_string(cfg.steps) +
                     " exceed the schedule's " + std::to_string(sch.steps));

  // Evenly spaced sub-schedule from T down to 1; spacing >= 1 keeps the
  // entries distinct.
  std::vector<int> tau(size_t(cfg.steps));
  for (int j = 0; j < cfg.steps; ++j)
    tau[size_t(j)] = cfg.steps == 1
                         ? sch.steps
                         : sch.steps - int(std::llround(double(j) * (sch.steps - 1) /
                                                        double(cfg.steps - 1)));

  std::int64_t n = condition.numel();
  std::int64_t frame = n / L;
  std::int64_t cond_elems = std::int64_t(c) * frame;
  auto cond = condition.value();

  std::vector<float> mask(size_t(n), 0.0f);
  std::fill(mask.begin(), mask.begin() + size_t(cond_elems), 1.0f);
  Tensor mask_t = Tensor::from_data(condition.shape(), mask);

  std::vector<float> x(static_cast<size_t>(n));
  for (float& v : x) v = rng.gaussian_f();

  std::vector<float> vhat(x.size()), ehat(x.size());
  for (size_t j = 0; j < tau.size(); ++j) {
    int t = tau[j];
    double g = sch.gamma_at(t);
    Tensor input = concat_channels(Tensor::from_data(condition.shape(), x),
                                   condition, mask_t);
    Tensor pred = fwd(input, t);
    if (!pred.defined() || pred.shape() != condition.shape())
      throw DataError("sample: denoiser output shape does not match the video");
    auto y = pred.value();

    if (cfg.order == VParamOrder::standard) {
      float sg = float(std::sqrt(g)), sog = float(std::sqrt(1.0 - g));
      for (std::int64_t i = 0; i < n; ++i) {
        vhat[size_t(i)] = sg * x[size_t(i)] - sog * y[size_t(i)];
        ehat[size_t(i)] = sog * x[size_t(i)] + sg * y[size_t(i)];
      }
    } else {
      if (g <= 0.0)
        throw NumericError(
            "swapped velocity order cannot recover the sample at zero signal "
            "(t=" + std::to_string(t) + ")");
      float iv = float(0.5 / std::sqrt(g)), ie = float(0.5 / std::sqrt(1.0 - g));
      for (std::int64_t i = 0; i < n; ++i) {
        vhat[size_t(i)] = (x[size_t(i)] - y[size_t(i)]) * iv;
        ehat[size_t(i)] = (x[size_t(i)] + y[size_t(i)]) * ie;
      }
    }

    for (std::int64_t i = 0; i < n; ++i)
      vhat[size_t(i)] = std::clamp(vhat[size_t(i)], -1.0f, 1.0f);
    std::copy(cond.begin(), cond.begin() + cond_elems, vhat.begin());

    if (j + 1 == tau.size()) {
      x = vhat;
      break;
    }
    double gn = sch.gamma_at(tau[j + 1]);
    if (!cfg.ddpm) {
      float sgn = float(std::sqrt(gn)), sogn = float(std::sqrt(1.0 - gn));
      for (std::int64_t i = 0; i < n; ++i)
        x[size_t(i)] = sgn * vhat[size_t(i)] + sogn * ehat[size_t(i)];
    } else {
      double a = g / gn;
      double mx = std::sqrt(a) * (1.0 - gn) / (1.0 - g);
      double mv = std::sqrt(gn) * (1.0 - a) / (1.0 - g);
      double sd = std::sqrt(std::max(0.0, (1.0 - a) * (1.0 - gn) / (1.0 - g)));
      float fmx = float(mx), fmv = float(mv), fsd = float(sd);
      for (std::int64_t i = 0; i < n; ++i)
        x[size_t(i)] = fmx * x[size_t(i)] + fmv * vhat[size_t(i)] +
                       fsd * rng.gaussian_f();
    }
  }
  return Tensor::from_data(condition.shape(), std::move(x));
}

// --- training loop ----------------------------------------------------------

namespace {

std::string csv_row(std::int64_t step, float loss, float lr, double wall) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.3f",
                static_cast<long long>(step), double(loss), double(lr), wall);
  return buf;
}

}  // namespace

TrainResult train_loop(const DenoiserFn& fwd, numkit::AdamW& opt,
                       const datagen::Dataset& data, const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw UsageError("batch size must be positive");
  if (cfg.steps < 0) throw UsageError("step count must be non-negative");
  if (cfg.out_dir.empty()) throw UsageError("training needs an output directory");
  std::uint64_t n = data.num_examples();
  if (n == 0) throw DataError("training dataset is empty");

  NoiseSchedule sch = make_schedule(cfg.schedule_steps);
  fs::create_directories(cfg.out_dir);
  fs::path csv = fs::path(cfg.out_dir) / "train_log.csv";
  bool fresh = !fs::exists(csv);
  std::ofstream log(csv, std::ios::app);
  if (!log) throw DataError("cannot open " + csv.string() + " for writing");
  if (fresh) log << "step,loss,lr,wall_time\n";
  fs::path ckpt = fs::path(cfg.out_dir) / "model.phyw";

  TrainResult result;
  result.final_step = opt.step_count();
  auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t step = opt.step_count() + 1; step <= cfg.steps; ++step) {
    Rng pick(Rng::mix({cfg.seed, kSaltBatchSel, std::uint64_t(step)}));
    std::vector<TrainExample> batch;
    batch.reserve(size_t(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      std::uint64_t idx = pick.below(n);
      batch.push_back({tensor_from_video(data.load_video(size_t(idx) % data.size(),
                                                         idx >= data.size())),
                       cfg.condition_frames, idx});
    }
    opt.zero_grad();
    result.final_loss = training_step(fwd, batch, sch, cfg.seed, step, cfg.order);
    opt.step();
    result.final_step = step;

    if ((cfg.log_every > 0 && step % cfg.log_every == 0) || step == cfg.steps) {
      double wall = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0).count();
      log << csv_row(step, result.final_loss, opt.last_lr(), wall) << "\n";
      log.flush();
    }
    if ((cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) ||
        step == cfg.steps)
      save_train_state(ckpt.string(), opt, cfg.extra_config_json);
  }
  return result;
}

void save_train_state(const std::string& path, numkit::AdamW& opt,
                      const std::string& config_json) {
  std::vector<numkit::CheckpointRecord> recs;
  recs.push_back(numkit::record_from_bytes("meta/config", config_json));
  recs.push_back(
      numkit::record_from_bytes("meta/step", std::to_string(opt.step_count())));
  for (size_t i = 0; i < opt.params().size(); ++i) {
    const numkit::NamedParam& p = opt.params()[i];
    recs.push_back(numkit::record_from_tensor("param/" + p.name, p.tensor));
    Shape mshape{std::int64_t(opt.moments_m()[i].size())};
    recs.push_back(numkit::record_from_tensor(
        "opt/m/" + p.name, Tensor::from_data(mshape, opt.moments_m()[i])));
    recs.push_back(numkit::record_from_tensor(
        "opt/v/" + p.name, Tensor::from_data(mshape, opt.moments_v()[i])));
  }
  numkit::write_checkpoint(path, recs);
}

std::string load_train_state(const std::string& path, numkit::AdamW& opt) {
  std::vector<numkit::CheckpointRecord> recs = numkit::read_checkpoint(path);
  auto load_into = [&](const std::string& name, std::span<float> dst) {
    Tensor t = numkit::tensor_from_record(numkit::find_record(recs, name));
    if (t.numel() != std::int64_t(dst.size()))
      throw DataError("checkpoint record " + name + " holds " +
                      std::to_string(t.numel()) + " values, expected " +
                      std::to_string(dst.size()));
    std::copy(t.value().begin(), t.value().end(), dst.begin());
  };
  for (size_t i = 0; i < opt.params().size(); ++i) {
    const numkit::NamedParam& p = opt.params()[i];
    Tensor param = p.tensor;  // handle copy, same storage
    load_into("param/" + p.name, param.value_mut());
    load_into("opt/m/" + p.name, opt.moments_m()[i]);
    load_into("opt/v/" + p.name, opt.moments_v()[i]);
  }
  std::string step_str =
      numkit::bytes_from_record(numkit::find_record(recs, "meta/step"));
  try {
    opt.set_step_count(std::stoll(step_str));
  } catch (const std::exception&) {
    throw DataError("checkpoint step record is not a number: " + step_str);
  }
  return numkit::bytes_from_record(numkit::find_record(recs, "meta/config"));
}

}  // namespace physlaw::diffcore
