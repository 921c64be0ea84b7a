#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "physlaw/common.hpp"
#include "physlaw/datagen.hpp"
#include "physlaw/diffcore.hpp"
#include "physlaw/numkit/threading.hpp"

using namespace physlaw;
using namespace physlaw::diffcore;
using numkit::Rng;
using numkit::Shape;
using numkit::Tensor;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("physlaw_dc_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

template <class E, class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  } catch (const std::exception& e) {
    return std::string("<wrong exception type> ") + e.what();
  }
  return "<no exception>";
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

bool same_floats(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

Tensor randn(Shape shape, Rng& rng) {
  std::vector<float> v(size_t(numkit::shape_numel(shape)));
  for (float& x : v) x = rng.gaussian_f();
  return Tensor::from_data(std::move(shape), std::move(v));
}

raster::Video pattern_video(int frames, int res, unsigned salt) {
  raster::Video v;
  v.frames = frames;
  v.height = res;
  v.width = res;
  v.rgb.resize(size_t(frames) * res * res * 3);
  for (size_t i = 0; i < v.rgb.size(); ++i)
    v.rgb[i] = std::uint8_t((i * 37 + salt * 101 + 13) % 256);
  return v;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(bool(in));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("cosine schedule pins both endpoints and decreases strictly") {
  NoiseSchedule two = make_schedule(2);
  CHECK(two.steps == 2);
  CHECK(two.gamma[0] == 1.0 - 1e-4);
  CHECK(two.gamma[1] == 0.0);

  NoiseSchedule sch = make_schedule(1000);
  CHECK(sch.gamma.size() == 1000);
  CHECK(sch.gamma_at(1) == 1.0 - 1e-4);
  CHECK(sch.gamma_at(1000) == 0.0);
  for (int t = 1; t < 1000; ++t) {
    CHECK(sch.gamma_at(t) > sch.gamma_at(t + 1));
    CHECK(sch.gamma_at(t) <= 1.0);
    CHECK(std::isfinite(sch.snr_at(t)));
    CHECK(sch.snr_at(t) > sch.snr_at(t + 1));
  }
  CHECK(sch.snr_at(1000) == 0.0);
  CHECK(sch.snr_at(1) == doctest::Approx(9999.0).epsilon(1e-8));
  // midpoint of the sampled cosine segment, worked out by hand
  CHECK(std::abs(sch.gamma_at(500) - 0.4943) < 0.005);

  NoiseSchedule five = make_schedule(5);
  CHECK(five.gamma[0] == 1.0 - 1e-4);
  CHECK(five.gamma[4] == 0.0);
  for (int t = 1; t < 5; ++t) CHECK(five.gamma_at(t) > five.gamma_at(t + 1));

  CHECK(contains(error_of<DataError>([] { make_schedule(1); }), "at least 2"));
  CHECK(contains(error_of<DataError>([] { make_schedule(0); }), "at least 2"));
  CHECK(contains(error_of<DataError>([&] { sch.gamma_at(0); }), "outside"));
  CHECK(contains(error_of<DataError>([&] { sch.gamma_at(1001); }), "outside"));
}

TEST_CASE("corruption, velocity target, and recovery match hand arithmetic") {
  NoiseSchedule sch{3, {0.9999, 0.25, 0.0}};
  Tensor V = Tensor::from_data({1}, {0.8f});
  Tensor eps = Tensor::from_data({1}, {-0.4f});

  Tensor vt = forward_corrupt(sch, V, 2, eps);
  CHECK(std::abs(vt.value()[0] - 0.05358983848622454) < 1e-6);

  Tensor y = velocity_target(sch, V, 2, eps);
  CHECK(std::abs(y.value()[0] - -0.8928203230275509) < 1e-6);
  Recovered rec = recover_from_v(sch, vt, y, 2);
  CHECK(std::abs(rec.sample.value()[0] - 0.8) < 1e-6);
  CHECK(std::abs(rec.noise.value()[0] - -0.4) < 1e-6);

  Tensor ys = velocity_target(sch, V, 2, eps, VParamOrder::swapped);
  CHECK(std::abs(ys.value()[0] - -0.7464101615137754) < 1e-6);
  Recovered recs = recover_from_v(sch, vt, ys, 2, VParamOrder::swapped);
  CHECK(std::abs(recs.sample.value()[0] - 0.8) < 1e-6);
  CHECK(std::abs(recs.noise.value()[0] - -0.4) < 1e-6);
}

TEST_CASE("signal-fraction endpoints reduce corruption to identity") {
  NoiseSchedule sch{3, {1.0, 0.5, 0.0}};
  Rng rng(31);
  Tensor V = randn({2, 1, 2, 3}, rng);
  Tensor eps = randn({2, 1, 2, 3}, rng);

  // full signal: V_t = V, y = eps, recovery returns V_t itself
  Tensor vt1 = forward_corrupt(sch, V, 1, eps);
  CHECK(same_floats(vt1.value(), V.value()));
  Tensor y1 = velocity_target(sch, V, 1, eps);
  CHECK(same_floats(y1.value(), eps.value()));
  Recovered r1 = recover_from_v(sch, vt1, y1, 1);
  CHECK(same_floats(r1.sample.value(), vt1.value()));

  // zero signal: V_t = eps, y = -V
  Tensor vt3 = forward_corrupt(sch, V, 3, eps);
  CHECK(same_floats(vt3.value(), eps.value()));
  Tensor y3 = velocity_target(sch, V, 3, eps);
  for (std::int64_t i = 0; i < V.numel(); ++i)
    CHECK(y3.value()[size_t(i)] == -V.value()[size_t(i)]);

  // the swapped order loses one side at each endpoint
  CHECK(contains(error_of<NumericError>([&] {
          recover_from_v(sch, vt3, y3, 3, VParamOrder::swapped);
        }),
        "zero signal"));
  CHECK(contains(error_of<NumericError>([&] {
          recover_from_v(sch, vt1, y1, 1, VParamOrder::swapped);
        }),
        "full signal"));

  CHECK(contains(error_of<DataError>([&] {
          forward_corrupt(sch, V, 1, randn({2, 1, 2, 2}, rng));
        }),
        "shape mismatch"));
}

TEST_CASE("corrupt-target-recover is an exact inverse across the schedule") {
  Rng rng(123);
  for (int T : {2, 10, 1000}) {
    NoiseSchedule sch = make_schedule(T);
    std::vector<int> ts;
    if (T <= 10)
      for (int t = 1; t <= T; ++t) ts.push_back(t);
    else
      ts = {1, 2, 250, 500, 999, 1000};
    for (int trial = 0; trial < 3; ++trial) {
      Tensor V = randn({2, 2, 2, 3}, rng);
      Tensor eps = randn({2, 2, 2, 3}, rng);
      for (int t : ts) {
        Tensor vt = forward_corrupt(sch, V, t, eps);
        Tensor y = velocity_target(sch, V, t, eps);
        Recovered rec = recover_from_v(sch, vt, y, t);
        for (std::int64_t i = 0; i < V.numel(); ++i) {
          CHECK(std::abs(rec.sample.value()[size_t(i)] - V.value()[size_t(i)]) <= 1e-5);
          CHECK(std::abs(rec.noise.value()[size_t(i)] - eps.value()[size_t(i)]) <= 1e-5);
        }
        double g = sch.gamma_at(t);
        if (g > 1e-3 && g < 1.0 - 1e-3) {
          Tensor yw = velocity_target(sch, V, t, eps, VParamOrder::swapped);
          Recovered rw = recover_from_v(sch, vt, yw, t, VParamOrder::swapped);
          for (std::int64_t i = 0; i < V.numel(); ++i) {
            CHECK(std::abs(rw.sample.value()[size_t(i)] - V.value()[size_t(i)]) <= 1e-5);
            CHECK(std::abs(rw.noise.value()[size_t(i)] - eps.value()[size_t(i)]) <= 1e-5);
          }
        }
      }
    }
  }
}

TEST_CASE("condition builder zero-pads and masks the leading frames") {
  Rng rng(7);
  Tensor V = randn({8, 2, 2, 3}, rng);
  std::int64_t frame = V.numel() / 8;

  ConditionedBatch cb = build_condition(V, 3);
  CHECK(cb.c == 3);
  CHECK(same_floats(cb.clean.value(), V.value()));
  for (std::int64_t i = 0; i < V.numel(); ++i) {
    bool lead = i < 3 * frame;
    CHECK(cb.mask.value()[size_t(i)] == (lead ? 1.0f : 0.0f));
    CHECK(cb.condition.value()[size_t(i)] == (lead ? V.value()[size_t(i)] : 0.0f));
  }

  ConditionedBatch one = build_condition(V, 1);
  CHECK(std::count(one.mask.value().begin(), one.mask.value().end(), 1.0f) == frame);

  ConditionedBatch full = build_condition(V, 8);
  CHECK(same_floats(full.condition.value(), V.value()));
  CHECK(std::count(full.mask.value().begin(), full.mask.value().end(), 1.0f) ==
        V.numel());

  CHECK(contains(error_of<DataError>([&] { build_condition(V, 0); }), "outside"));
  CHECK(contains(error_of<DataError>([&] { build_condition(V, 9); }), "outside"));
  CHECK(contains(error_of<DataError>(
                     [&] { build_condition(Tensor::from_data({4}, {1, 2, 3, 4}), 1); }),
                 "(L, H, W, 3)"));
}

TEST_CASE("byte normalization round-trips and saturates") {
  raster::Video v;
  v.frames = 1;
  v.height = 2;
  v.width = 2;
  v.rgb = {0, 255, 127, 128, 1, 254, 63, 191, 10, 100, 200, 50};

  Tensor t = tensor_from_video(v);
  CHECK(t.shape() == Shape{1, 2, 2, 3});
  CHECK(t.value()[0] == -1.0f);
  CHECK(t.value()[1] == 1.0f);
  CHECK(t.value()[2] == doctest::Approx(127.0 / 127.5 - 1.0));
  for (float x : t.value()) {
    CHECK(x >= -1.0f);
    CHECK(x <= 1.0f);
  }

  raster::Video back = video_from_tensor(t);
  CHECK(back.rgb == v.rgb);

  raster::Video big = pattern_video(4, 16, 3);
  CHECK(video_from_tensor(tensor_from_video(big)).rgb == big.rgb);

  Tensor off = Tensor::from_data({1, 1, 1, 3}, {1.5f, -2.0f, 0.0f});
  raster::Video q = video_from_tensor(off);
  CHECK(q.rgb == std::vector<std::uint8_t>{255, 0, 128});
}

TEST_CASE("channel concatenation interleaves per pixel") {
  Tensor a = Tensor::from_data({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_data({1, 1, 2, 3}, {10, 20, 30, 40, 50, 60});
  Tensor c = Tensor::from_data({1, 1, 2, 3}, {100, 200, 300, 400, 500, 600});
  Tensor out = concat_channels(a, b, c);
  CHECK(out.shape() == Shape{1, 1, 2, 9});
  std::vector<float> want{1,  2,  3,  10, 20, 30, 100, 200, 300,
                          4,  5,  6,  40, 50, 60, 400, 500, 600};
  CHECK(same_floats(out.value(), want));
}

TEST_CASE("per-example noise draws are keyed, not positional") {
  NoiseSchedule sch = make_schedule(40);
  Shape shape{2, 2, 2, 3};

  NoiseDraw a = example_noise(shape, sch, 9, 4, 17);
  NoiseDraw b = example_noise(shape, sch, 9, 4, 17);
  CHECK(a.t == b.t);
  CHECK(same_floats(a.eps.value(), b.eps.value()));

  NoiseDraw other = example_noise(shape, sch, 9, 5, 17);
  CHECK(!same_floats(a.eps.value(), other.eps.value()));
  NoiseDraw next = example_noise(shape, sch, 9, 4, 18);
  CHECK(!same_floats(a.eps.value(), next.eps.value()));

  // uniform timestep coverage and roughly standard-normal noise
  std::map<int, int> hist;
  double sum = 0.0, sq = 0.0;
  std::int64_t n = 0;
  for (int e = 0; e < 400; ++e) {
    NoiseDraw d = example_noise(shape, sch, 1, std::uint64_t(e), 0);
    CHECK(d.t >= 1);
    CHECK(d.t <= 40);
    hist[d.t]++;
    for (float x : d.eps.value()) {
      sum += x;
      sq += double(x) * x;
      ++n;
    }
  }
  CHECK(hist.size() == 40);
  double mean = sum / double(n);
  double var = sq / double(n) - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("training step is zero for an oracle and matches brute force for zero") {
  NoiseSchedule sch = make_schedule(40);
  Rng rng(55);
  std::vector<TrainExample> batch;
  for (std::uint64_t id : {3ull, 9ull, 12ull})
    batch.push_back({randn({4, 2, 2, 3}, rng), 1, id});

  // oracle: reproduce the exact keyed draw for each episode and answer with
  // the true velocity; distinct timesteps let the closure key on t
  std::map<int, Tensor> truth;
  for (const TrainExample& ex : batch) {
    NoiseDraw d = example_noise(ex.clean.shape(), sch, 77, ex.episode_id, 5);
    REQUIRE(truth.find(d.t) == truth.end());
    truth.emplace(d.t, velocity_target(sch, ex.clean, d.t, d.eps));
  }
  auto oracle = [&](const Tensor&, int t) { return truth.at(t); };
  CHECK(training_step(oracle, batch, sch, 77, 5) == 0.0f);

  // zero model: loss equals the masked mean of y^2, recomputed in double
  auto zero_model = [](const Tensor& in, int) {
    return Tensor::zeros({in.dim(0), in.dim(1), in.dim(2), 3});
  };
  float loss = training_step(zero_model, batch, sch, 77, 5);
  double brute = 0.0;
  for (const TrainExample& ex : batch) {
    NoiseDraw d = example_noise(ex.clean.shape(), sch, 77, ex.episode_id, 5);
    double g = sch.gamma_at(d.t);
    std::int64_t frame = ex.clean.numel() / ex.clean.dim(0);
    double acc = 0.0;
    for (std::int64_t i = ex.c * frame; i < ex.clean.numel(); ++i) {
      double y = std::sqrt(g) * d.eps.value()[size_t(i)] -
                 std::sqrt(1.0 - g) * ex.clean.value()[size_t(i)];
      acc += y * y;
    }
    brute += acc / double((ex.clean.dim(0) - ex.c) * frame);
  }
  brute /= double(batch.size());
  CHECK(loss == doctest::Approx(brute).epsilon(1e-4));
}

TEST_CASE("training loss and gradients ignore batch order") {
  NoiseSchedule sch = make_schedule(25);
  Rng rng(8);
  std::vector<TrainExample> batch;
  for (std::uint64_t id : {11ull, 3ull, 7ull, 5ull})
    batch.push_back({randn({4, 2, 2, 3}, rng), 2, id});

  Tensor w = Tensor::from_data({1}, {0.3f}, true);
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->assign(size_t(batch[0].clean.numel()), 0);
  auto model = [&](const Tensor& in, int) {
    return numkit::gather(w, idx, {in.dim(0), in.dim(1), in.dim(2), 3});
  };

  float l1 = training_step(model, batch, sch, 4, 9);
  std::vector<float> g1(w.grad().begin(), w.grad().end());

  std::vector<TrainExample> shuffled{batch[2], batch[0], batch[3], batch[1]};
  w.zero_grad();
  float l2 = training_step(model, shuffled, sch, 4, 9);

  CHECK(l1 == l2);
  CHECK(g1[0] != 0.0f);
  CHECK(g1[0] == w.grad()[0]);
}

TEST_CASE("training step rejects bad batches and non-finite losses") {
  NoiseSchedule sch = make_schedule(25);
  Rng rng(19);
  std::vector<TrainExample> batch{{randn({4, 2, 2, 3}, rng), 1, 7}};

  auto nan_model = [](const Tensor& in, int) {
    return Tensor::full({in.dim(0), in.dim(1), in.dim(2), 3},
                        std::numeric_limits<float>::quiet_NaN());
  };
  std::string msg = error_of<NumericError>(
      [&] { training_step(nan_model, batch, sch, 1, 1); });
  CHECK(contains(msg, "episode 7"));
  CHECK(contains(msg, "t="));

  auto zero_model = [](const Tensor& in, int) {
    return Tensor::zeros({in.dim(0), in.dim(1), in.dim(2), 3});
  };
  CHECK(contains(error_of<DataError>([&] {
          training_step(zero_model, {}, sch, 1, 1);
        }),
        "empty"));
  std::vector<TrainExample> saturated{{randn({4, 2, 2, 3}, rng), 4, 2}};
  CHECK(contains(error_of<DataError>([&] {
          training_step(zero_model, saturated, sch, 1, 1);
        }),
        "nothing to supervise"));
  auto bad_shape = [](const Tensor& in, int) {
    return Tensor::zeros({in.dim(0), in.dim(1), in.dim(2), 1});
  };
  CHECK(contains(error_of<DataError>([&] {
          training_step(bad_shape, batch, sch, 1, 1);
        }),
        "does not match"));
}

TEST_CASE("single oracle step reproduces the conditioned video exactly") {
  NoiseSchedule sch = make_schedule(1000);
  raster::Video src = pattern_video(8, 8, 1);
  Tensor V = tensor_from_video(src);
  ConditionedBatch cb = build_condition(V, 3);

  // at zero terminal signal the true velocity is -V, no noise knowledge needed
  auto oracle = [&](const Tensor&, int) { return numkit::scale(V, -1.0f); };
  Rng rng(5);
  SampleConfig cfg;
  cfg.steps = 1;
  Tensor out = sample(oracle, sch, cb.condition, 3, cfg, rng);
  CHECK(same_floats(out.value(), V.value()));
  CHECK(video_from_tensor(out).rgb == src.rgb);
}

TEST_CASE("sampler clamps conditioned frames to the condition bytes") {
  NoiseSchedule sch = make_schedule(50);
  raster::Video src = pattern_video(6, 8, 2);
  Tensor V = tensor_from_video(src);
  ConditionedBatch cb = build_condition(V, 3);

  // arbitrary fixed response, unrelated to the condition
  auto garbage = [](const Tensor& in, int t) {
    std::vector<float> v(size_t(in.numel() / 9 * 3));
    for (size_t i = 0; i < v.size(); ++i)
      v[i] = 0.3f * std::sin(float(i) * 0.7f + float(t));
    return Tensor::from_data({in.dim(0), in.dim(1), in.dim(2), 3}, std::move(v));
  };

  Rng rng(41);
  SampleConfig cfg;
  cfg.steps = 50;
  Tensor out = sample(garbage, sch, cb.condition, 3, cfg, rng);
  for (float x : out.value()) {
    CHECK(x >= -1.0f);
    CHECK(x <= 1.0f);
  }
  raster::Video got = video_from_tensor(out);
  std::int64_t lead = 3 * (V.numel() / 6);
  for (std::int64_t i = 0; i < lead; ++i)
    CHECK(got.rgb[size_t(i)] == src.rgb[size_t(i)]);

  SUBCASE("bit-identical under strict determinism") {
    numkit::set_strict_deterministic(true);
    Rng r1(9), r2(9);
    Tensor s1 = sample(garbage, sch, cb.condition, 3, cfg, r1);
    Tensor s2 = sample(garbage, sch, cb.condition, 3, cfg, r2);
    numkit::set_strict_deterministic(false);
    CHECK(same_floats(s1.value(), s2.value()));
  }

  SUBCASE("ancestral flag changes the trajectory but stays deterministic") {
    SampleConfig dd;
    dd.steps = 10;
    Rng r1(9), r2(9), r3(9);
    Tensor ddim = sample(garbage, sch, cb.condition, 3, dd, r1);
    dd.ddpm = true;
    Tensor ddpm1 = sample(garbage, sch, cb.condition, 3, dd, r2);
    Tensor ddpm2 = sample(garbage, sch, cb.condition, 3, dd, r3);
    CHECK(same_floats(ddpm1.value(), ddpm2.value()));
    CHECK(!same_floats(ddim.value(), ddpm1.value()));
  }

  SUBCASE("step counts outside [1, T] are refused") {
    Rng r(1);
    SampleConfig bad;
    bad.steps = 0;
    CHECK(contains(error_of<UsageError>(
                       [&] { sample(garbage, sch, cb.condition, 3, bad, r); }),
                   "at least 1"));
    bad.steps = 51;
    CHECK(contains(error_of<UsageError>(
                       [&] { sample(garbage, sch, cb.condition, 3, bad, r); }),
                   "exceed"));
  }

  SUBCASE("swapped order cannot start from pure noise") {
    Rng r(1);
    SampleConfig sw;
    sw.steps = 10;
    sw.order = VParamOrder::swapped;
    CHECK(contains(error_of<NumericError>(
                       [&] { sample(garbage, sch, cb.condition, 3, sw, r); }),
                   "zero signal"));
  }

  SUBCASE("condition length is validated") {
    Rng r(1);
    CHECK(contains(error_of<DataError>(
                       [&] { sample(garbage, sch, cb.condition, 0, cfg, r); }),
                   "outside"));
  }
}

TEST_CASE("train loop learns, logs, checkpoints, and resumes bit-exactly") {
  TempDir tmp("train");
  auto specs = datagen::grid_sample(physim::ScenarioKind::uniform, 16, 7, 8);
  datagen::write_dataset(specs, (tmp.path / "data").string(), "train", 32, 7, true);
  datagen::Dataset ds((tmp.path / "data").string());
  REQUIRE(ds.num_examples() == 32);

  auto make_model = [](Tensor& W, Tensor& B) {
    return [&W, &B](const Tensor& in, int) {
      std::int64_t n = in.numel() / 9;
      Tensor h = numkit::add_rowvec(numkit::matmul(numkit::reshape(in, {n, 9}), W), B);
      return numkit::reshape(h, {in.dim(0), in.dim(1), in.dim(2), 3});
    };
  };

  numkit::AdamWConfig ocfg;
  ocfg.lr_max = 1e-2f;
  ocfg.total_steps = 220;
  ocfg.warmup_steps = 10;
  ocfg.weight_decay = 0.0f;

  Tensor W1 = Tensor::zeros({9, 3}, true);
  Tensor B1 = Tensor::zeros({3}, true);
  numkit::AdamW opt1({{"w", W1}, {"b", B1}}, ocfg);

  TrainConfig cfg;
  cfg.steps = 200;
  cfg.batch_size = 8;
  cfg.schedule_steps = 100;
  cfg.condition_frames = 3;
  cfg.seed = 42;
  cfg.checkpoint_every = 100;
  cfg.log_every = 1;
  cfg.out_dir = (tmp.path / "run").string();
  cfg.extra_config_json = "{\"probe\":1}";

  TrainResult res = train_loop(make_model(W1, B1), opt1, ds, cfg);
  CHECK(res.final_step == 200);
  CHECK(std::isfinite(res.final_loss));
  CHECK(opt1.step_count() == 200);

  auto rows = read_csv(fs::path(cfg.out_dir) / "train_log.csv");
  REQUIRE(rows.size() == 201);
  CHECK(rows[0] == std::vector<std::string>{"step", "loss", "lr", "wall_time"});
  CHECK(rows[1][0] == "1");
  CHECK(rows[200][0] == "200");
  double first = 0, last = 0, prev_wall = -1.0;
  for (int i = 1; i <= 200; ++i) {
    REQUIRE(rows[size_t(i)].size() == 4);
    double wall = std::stod(rows[size_t(i)][3]);
    CHECK(wall >= prev_wall);
    prev_wall = wall;
    double lr = std::stod(rows[size_t(i)][2]);
    CHECK(lr > 0.0);
    CHECK(lr <= 1e-2 + 1e-9);
    if (i <= 10) first += std::stod(rows[size_t(i)][1]);
    if (i > 190) last += std::stod(rows[size_t(i)][1]);
  }
  CHECK(last / 10.0 < 0.95 * (first / 10.0));

  // restore into a fresh model and compare states
  Tensor W2 = Tensor::zeros({9, 3}, true);
  Tensor B2 = Tensor::zeros({3}, true);
  numkit::AdamW opt2({{"w", W2}, {"b", B2}}, ocfg);
  std::string meta =
      load_train_state((fs::path(cfg.out_dir) / "model.phyw").string(), opt2);
  CHECK(meta == "{\"probe\":1}");
  CHECK(opt2.step_count() == 200);
  CHECK(same_floats(W2.value(), W1.value()));
  CHECK(same_floats(B2.value(), B1.value()));
  CHECK(opt2.moments_m() == opt1.moments_m());
  CHECK(opt2.moments_v() == opt1.moments_v());

  // twenty more steps on both the original and the restored state agree
  TrainConfig more = cfg;
  more.steps = 220;
  train_loop(make_model(W1, B1), opt1, ds, more);
  TrainConfig more2 = more;
  more2.out_dir = (tmp.path / "run2").string();
  train_loop(make_model(W2, B2), opt2, ds, more2);
  CHECK(opt1.step_count() == 220);
  CHECK(opt2.step_count() == 220);
  CHECK(same_floats(W1.value(), W2.value()));
  CHECK(same_floats(B1.value(), B2.value()));

  auto rows2 = read_csv(fs::path(more.out_dir) / "train_log.csv");
  CHECK(rows2.size() == 221);
  CHECK(rows2[220][0] == "220");

  // a loop already past its target does nothing
  TrainResult idle = train_loop(make_model(W1, B1), opt1, ds, more);
  CHECK(idle.final_step == 220);
  CHECK(read_csv(fs::path(more.out_dir) / "train_log.csv").size() == 221);
}

TEST_CASE("checkpoint restore validates names and sizes") {
  TempDir tmp("ckpt");
  Tensor w = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  numkit::AdamWConfig ocfg;
  numkit::AdamW opt({{"w", w}}, ocfg);
  std::string path = (tmp.path / "m.phyw").string();
  save_train_state(path, opt, "{}");

  Tensor other = Tensor::zeros({2, 3}, true);
  numkit::AdamW misnamed({{"weights", other}}, ocfg);
  CHECK(contains(error_of<DataError>([&] { load_train_state(path, misnamed); }),
                 "param/weights"));

  Tensor small = Tensor::zeros({3}, true);
  numkit::AdamW missized({{"w", small}}, ocfg);
  std::string msg =
      error_of<DataError>([&] { load_train_state(path, missized); });
  CHECK(contains(msg, "holds 6"));
  CHECK(contains(msg, "expected 3"));
}

TEST_CASE("train loop validates its configuration") {
  TempDir tmp("cfg");
  auto specs = datagen::grid_sample(physim::ScenarioKind::uniform, 4, 3, 6);
  datagen::write_dataset(specs, (tmp.path / "d").string(), "train", 16, 3, false);
  datagen::Dataset ds((tmp.path / "d").string());
  Tensor w = Tensor::zeros({1}, true);
  numkit::AdamW opt({{"w", w}}, numkit::AdamWConfig{});
  auto fwd = [](const Tensor& in, int) {
    return Tensor::zeros({in.dim(0), in.dim(1), in.dim(2), 3});
  };

  TrainConfig cfg;
  cfg.out_dir = (tmp.path / "o").string();
  cfg.batch_size = 0;
  CHECK(contains(error_of<UsageError>([&] { train_loop(fwd, opt, ds, cfg); }),
                 "batch size"));
  cfg.batch_size = 2;
  cfg.out_dir = "";
  CHECK(contains(error_of<UsageError>([&] { train_loop(fwd, opt, ds, cfg); }),
                 "output directory"));
}
