#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "doctest.h"
#include "physlaw/datagen.hpp"
#include "physlaw/palette.hpp"
#include "physlaw/physim/sim.hpp"
#include "physlaw/probe.hpp"
#include "physlaw/raster.hpp"

using namespace physlaw;
using namespace physlaw::probe;
using datagen::Attribute;
using physim::Body;
using physim::Episode;
using physim::ScenarioKind;
using physim::ShapeKind;
using physim::WorldState;
using raster::RenderConfig;
using raster::Video;

namespace {

Body ball(double r, Vec2 pos, Rgb8 color, Vec2 vel = {}) {
  Body b;
  b.shape = ShapeKind::circle;
  b.radius = r;
  b.position = pos;
  b.velocity = vel;
  b.color = color;
  return b;
}

Episode still_episode(std::vector<std::vector<Body>> frames) {
  Episode ep;
  for (auto& bodies : frames) {
    WorldState w;
    w.bodies = std::move(bodies);
    ep.frames.push_back(std::move(w));
  }
  return ep;
}

Video render_bodies(std::vector<std::vector<Body>> frames, int res) {
  RenderConfig rc;
  rc.resolution = res;
  return raster::render_episode(still_episode(std::move(frames)), rc);
}

std::vector<datagen::FrameStates> gt_of(const Episode& ep) {
  std::vector<datagen::FrameStates> out;
  for (const auto& w : ep.frames) {
    datagen::FrameStates fs;
    for (const Body& b : w.bodies)
      fs.push_back(
          {b.position.x, b.position.y, b.velocity.x, b.velocity.y, b.radius});
    out.push_back(std::move(fs));
  }
  return out;
}

Video render_at(const Episode& ep, int res) {
  RenderConfig rc;
  rc.resolution = res;
  return raster::render_episode(ep, rc);
}

// Tracks whose centers sit exactly on given world positions, all frames
// fully visible.
TrackSet tracks_from_positions(const std::vector<std::vector<Vec2>>& per_obj) {
  TrackSet ts;
  for (const auto& centers : per_obj) {
    Track tr;
    tr.color = palette::kRed;
    for (Vec2 c : centers) {
      Detection d;
      d.present = true;
      d.center = c;
      d.mass = 100.0;
      tr.frames.push_back(d);
    }
    ts.tracks.push_back(std::move(tr));
  }
  return ts;
}

std::vector<datagen::FrameStates> gt_from_positions(
    const std::vector<std::vector<Vec2>>& per_obj) {
  std::vector<datagen::FrameStates> gt(per_obj[0].size());
  for (const auto& centers : per_obj)
    for (size_t t = 0; t < centers.size(); ++t)
      gt[t].push_back({centers[t].x, centers[t].y, 0.0, 0.0, 0.5});
  return gt;
}

}  // namespace

TEST_CASE("detected centers recover sub-pixel positions") {
  Video v = render_bodies({{ball(1.0, {5.2, 4.7}, palette::kRed)}}, 128);
  auto det = detect_centers(v, 0, {palette::kRed});
  REQUIRE(det.size() == 1);
  REQUIRE(det[0].present);
  CHECK(std::abs(det[0].center.x - 5.2) < 0.01);
  CHECK(std::abs(det[0].center.y - 4.7) < 0.01);
  CHECK(!det[0].clipped);
  CHECK(det[0].mass > 100.0);
  // a centered ball lands within half a pixel, and far tighter in practice
  Video c = render_bodies({{ball(1.0, {5.0, 5.0}, palette::kRed)}}, 128);
  auto dc = detect_centers(c, 0, {palette::kRed});
  double half_px = 0.5 * 10.0 / 128;
  CHECK(std::abs(dc[0].center.x - 5.0) < half_px);
  CHECK(std::abs(dc[0].center.y - 5.0) < half_px);
  CHECK(std::abs(dc[0].center.x - 5.0) < 0.005);
  CHECK(std::abs(dc[0].center.y - 5.0) < 0.005);

  SUBCASE("coarse grid stays within a sixth of a pixel") {
    Video lo = render_bodies({{ball(1.0, {5.2, 4.7}, palette::kRed)}}, 32);
    auto d32 = detect_centers(lo, 0, {palette::kRed});
    CHECK(std::abs(d32[0].center.x - 5.2) < 0.05);
    CHECK(std::abs(d32[0].center.y - 4.7) < 0.05);
  }

  SUBCASE("empty frame yields no detection") {
    Video empty = render_bodies({{}}, 32);
    auto d = detect_centers(empty, 0, {palette::kRed, palette::kBlue});
    REQUIRE(d.size() == 2);
    CHECK(!d[0].present);
    CHECK(!d[1].present);
    CHECK(d[0].mass == 0.0);
  }

  SUBCASE("half-out ball is flagged clipped with a biased center") {
    Video edge = render_bodies({{ball(1.0, {0.1, 5.0}, palette::kRed)}}, 128);
    auto d = detect_centers(edge, 0, {palette::kRed});
    REQUIRE(d[0].present);
    CHECK(d[0].clipped);
    CHECK(d[0].center.x > 0.1);  // only the interior part is visible
  }

  SUBCASE("colors resolve to their own objects") {
    Video two = render_bodies({{ball(1.0, {3.0, 6.0}, palette::kRed),
                                ball(0.8, {7.0, 4.0}, palette::kBlue)}},
                              128);
    auto d = detect_centers(two, 0, {palette::kRed, palette::kBlue});
    CHECK(std::abs(d[0].center.x - 3.0) < 0.01);
    CHECK(std::abs(d[0].center.y - 6.0) < 0.01);
    CHECK(std::abs(d[1].center.x - 7.0) < 0.01);
    CHECK(std::abs(d[1].center.y - 4.0) < 0.01);
  }

  SUBCASE("ring and box centers are recovered too") {
    Body rg;
    rg.shape = ShapeKind::ring;
    rg.radius = 1.2;
    rg.inner_radius = 0.66;
    rg.position = {4.3, 5.6};
    rg.color = palette::kRed;
    Body bx;
    bx.shape = ShapeKind::box;
    bx.half_extent = {0.9, 0.9};
    bx.position = {7.4, 3.2};
    bx.color = palette::kBlue;
    Video v2 = render_bodies({{rg, bx}}, 128);
    auto d = detect_centers(v2, 0, {palette::kRed, palette::kBlue});
    CHECK(std::abs(d[0].center.x - 4.3) < 0.01);
    CHECK(std::abs(d[0].center.y - 5.6) < 0.01);
    CHECK(std::abs(d[1].center.x - 7.4) < 0.01);
    CHECK(std::abs(d[1].center.y - 3.2) < 0.01);
  }

  SUBCASE("frame index is range checked") {
    Video one = render_bodies({{}}, 32);
    CHECK_THROWS_AS(detect_centers(one, 1, {palette::kRed}), DataError);
    CHECK_THROWS_AS(detect_centers(one, -1, {palette::kRed}), DataError);
  }
}

TEST_CASE("parsed tracks carry geometry and pixel scale") {
  Video v = render_bodies({{ball(1.0, {5.0, 5.0}, palette::kRed)},
                           {ball(1.0, {5.3, 5.0}, palette::kRed)}},
                          128);
  TrackSet ts = parse_tracks(v, {palette::kRed});
  REQUIRE(ts.tracks.size() == 1);
  REQUIRE(ts.frame_count() == 2);
  CHECK(ts.px_x == 10.0 / 128);
  CHECK(ts.px_y == 10.0 / 128);
  CHECK(ts.tracks[0].color == palette::kRed);
  CHECK(std::abs(ts.tracks[0].frames[1].center.x - 5.3) < 0.01);
}

TEST_CASE("validity masks follow the view border") {
  SUBCASE("fully visible episode is valid everywhere") {
    std::vector<std::vector<Body>> frames;
    for (int t = 0; t < 6; ++t)
      frames.push_back({ball(0.8, {3.0 + 0.1 * t, 5.0}, palette::kRed)});
    Video v = render_bodies(frames, 64);
    TrackSet ts = parse_tracks(v, {palette::kRed});
    auto mask = valid_frames(ts, ScenarioKind::uniform);
    for (bool m : mask) CHECK(m);
  }

  SUBCASE("frames with the bounding circle over the border are invalid") {
    WorldState w;
    w.bodies = {ball(0.8, {6.0, 5.0}, palette::kRed, {3.0, 0.0})};
    Episode ep = physim::simulate_world(w, 16);
    Video v = render_at(ep, 128);
    TrackSet ts = parse_tracks(v, {palette::kRed});
    auto mask = valid_frames(ts, ScenarioKind::uniform);
    double px = 10.0 / 128;
    int checked = 0;
    for (int t = 0; t < 16; ++t) {
      const Body& b = ep.frames[size_t(t)].bodies[0];
      double gap = 10.0 - (b.position.x + b.radius);
      if (std::abs(gap) <= 1.5 * px) continue;  // tangent zone is ambiguous
      CHECK(mask[size_t(t)] == (gap > 0.0));
      ++checked;
    }
    CHECK(checked >= 14);
    CHECK(!mask[15]);
  }
}

TEST_CASE("collision masks exclude frames through first contact") {
  auto specs = datagen::grid_sample(ScenarioKind::collision, 6, 31, 32);
  REQUIRE(specs.size() == 6);
  for (const auto& s : specs) {
    Episode ep = physim::simulate_episode(s);
    Video v = render_at(ep, 128);
    TrackSet ts = parse_tracks(v, fundamental_palette(ScenarioKind::collision));
    auto gt = gt_of(ep);
    auto with_gt = valid_frames(ts, ScenarioKind::collision, &gt);
    auto fallback = valid_frames(ts, ScenarioKind::collision);

    // contact straight from the sidecar velocities
    int contact = -1;
    for (size_t t = 1; t < gt.size() && contact < 0; ++t)
      for (size_t i = 0; i < gt[t].size(); ++i)
        if (std::abs(gt[t][i].vx - gt[t - 1][i].vx) > 1e-9) {
          contact = int(t);
          break;
        }
    REQUIRE(contact > 4);  // scenario construction puts first touch there
    for (int t = 0; t <= contact; ++t) CHECK(!with_gt[size_t(t)]);

    int first_gt = -1, first_fb = -1;
    for (size_t t = 0; t < with_gt.size(); ++t)
      if (with_gt[t]) {
        first_gt = int(t);
        break;
      }
    for (size_t t = 0; t < fallback.size(); ++t)
      if (fallback[t]) {
        first_fb = int(t);
        break;
      }
    if (first_gt < 0) continue;  // everything clipped after contact
    CHECK(first_gt == contact + 1);
    // the parsed fallback may only tighten the mask, by at most one frame
    REQUIRE(first_fb >= first_gt);
    CHECK(first_fb <= first_gt + 1);
    for (size_t t = 0; t < with_gt.size(); ++t)
      if (fallback[t]) CHECK(with_gt[t]);
  }
}

TEST_CASE("velocity error evaluates the deviation formula") {
  SUBCASE("parsed identical to ground truth gives exactly zero") {
    std::vector<std::vector<Vec2>> pos = {
        {{2.0, 5.0}, {2.3, 5.1}, {2.6, 5.2}, {2.9, 5.3}}};
    TrackSet ts = tracks_from_positions(pos);
    auto gt = gt_from_positions(pos);
    std::vector<bool> mask(4, true);
    auto rep = velocity_error(ts, gt, ScenarioKind::parabola, mask);
    REQUIRE(rep.has_value);
    CHECK(rep.e == 0.0);
    CHECK(rep.objects == 1);
    CHECK(rep.metric_frames == 3);
  }

  SUBCASE("hand-evaluated two-object case") {
    // deviations per (object, step): {0.1, 0.1} and {0, 0.2} -> e = 0.1
    std::vector<std::vector<Vec2>> parsed = {
        {{1.00, 5.0}, {1.01, 5.0}, {1.02, 5.0}},
        {{5.00, 5.0}, {5.00, 5.0}, {5.02, 5.0}}};
    std::vector<std::vector<Vec2>> truth = {
        {{1.0, 5.0}, {1.0, 5.0}, {1.0, 5.0}},
        {{5.0, 5.0}, {5.0, 5.0}, {5.0, 5.0}}};
    TrackSet ts = tracks_from_positions(parsed);
    auto gt = gt_from_positions(truth);
    std::vector<bool> mask(3, true);
    auto rep = velocity_error(ts, gt, ScenarioKind::collision, mask);
    REQUIRE(rep.has_value);
    CHECK(rep.e == doctest::Approx(0.1).epsilon(1e-12));
  }

  SUBCASE("motion-axis scenarios ignore cross-axis deviations") {
    std::vector<std::vector<Vec2>> parsed = {{{2.0, 5.0}, {2.3, 5.4}}};
    std::vector<std::vector<Vec2>> truth = {{{2.0, 5.0}, {2.3, 5.0}}};
    TrackSet ts = tracks_from_positions(parsed);
    auto gt = gt_from_positions(truth);
    std::vector<bool> mask(2, true);
    auto uni = velocity_error(ts, gt, ScenarioKind::uniform, mask);
    CHECK(uni.e == 0.0);  // deviation is all in y
    auto par = velocity_error(ts, gt, ScenarioKind::parabola, mask);
    CHECK(par.e == doctest::Approx(4.0).epsilon(1e-12));
  }

  SUBCASE("translation invariance") {
    std::vector<std::vector<Vec2>> parsed = {
        {{2.0, 5.0}, {2.31, 5.12}, {2.58, 5.19}, {2.93, 5.31}}};
    std::vector<std::vector<Vec2>> truth = {
        {{2.0, 5.0}, {2.3, 5.1}, {2.6, 5.2}, {2.9, 5.3}}};
    std::vector<bool> mask(4, true);
    auto base = velocity_error(tracks_from_positions(parsed),
                               gt_from_positions(truth),
                               ScenarioKind::parabola, mask);
    Vec2 shift{1.2345, -2.5};
    for (auto& track : parsed)
      for (auto& c : track) c += shift;
    for (auto& track : truth)
      for (auto& c : track) c += shift;
    auto moved = velocity_error(tracks_from_positions(parsed),
                                gt_from_positions(truth),
                                ScenarioKind::parabola, mask);
    CHECK(std::abs(moved.e - base.e) < 1e-12);
  }

  SUBCASE("empty mask reports an absent value") {
    std::vector<std::vector<Vec2>> pos = {{{2.0, 5.0}, {2.3, 5.1}}};
    TrackSet ts = tracks_from_positions(pos);
    auto gt = gt_from_positions(pos);
    std::vector<bool> mask(2, false);
    auto rep = velocity_error(ts, gt, ScenarioKind::uniform, mask);
    CHECK(!rep.has_value);
    CHECK(rep.metric_frames == 0);
  }

  SUBCASE("shape mismatches are rejected") {
    std::vector<std::vector<Vec2>> pos = {{{2.0, 5.0}, {2.3, 5.1}}};
    TrackSet ts = tracks_from_positions(pos);
    auto gt = gt_from_positions(pos);
    std::vector<bool> mask(2, true);
    auto short_gt = gt;
    short_gt.pop_back();
    CHECK_THROWS_AS(velocity_error(ts, short_gt, ScenarioKind::uniform, mask),
                    DataError);
    std::vector<bool> short_mask(1, true);
    CHECK_THROWS_AS(velocity_error(ts, gt, ScenarioKind::uniform, short_mask),
                    DataError);
    auto fat_gt = gt;
    fat_gt[0].push_back({1.0, 1.0, 0.0, 0.0, 0.5});
    CHECK_THROWS_AS(velocity_error(ts, fat_gt, ScenarioKind::uniform, mask),
                    DataError);
  }
}

TEST_CASE("parsed tracks round trip rendered episodes") {
  const ScenarioKind kinds[] = {ScenarioKind::uniform, ScenarioKind::parabola,
                                ScenarioKind::collision};
  for (auto [res, bound] : {std::pair{128, 0.03}, {32, 0.12}}) {
    for (ScenarioKind kind : kinds) {
      auto specs = datagen::grid_sample(kind, 6, 2024, 32);
      auto pal = fundamental_palette(kind);
      std::vector<ErrorReport> reps;
      for (const auto& s : specs) {
        Episode ep = physim::simulate_episode(s);
        Video v = render_at(ep, res);
        TrackSet ts = parse_tracks(v, pal);
        auto gt = gt_of(ep);
        auto mask = valid_frames(ts, kind, &gt);
        reps.push_back(velocity_error(ts, gt, kind, mask));
      }
      int counted = 0;
      for (const auto& r : reps) {
        if (!r.has_value) continue;
        ++counted;
        INFO("kind ", int(kind), " res ", res, " e ", r.e);
        CHECK(r.e <= bound);
      }
      CHECK(counted >= 4);  // late collisions can leave no usable frames
    }
  }
}

TEST_CASE("ssim and psnr match hand values") {
  auto specs = datagen::grid_sample(ScenarioKind::uniform, 1, 5, 8);
  Episode ep = physim::simulate_episode(specs[0]);
  Video a = render_at(ep, 64);

  SUBCASE("identical videos score the caps") {
    CHECK(ssim(a, a) == 1.0);
    CHECK(psnr(a, a) == 99.0);
  }

  SUBCASE("inverted video scores near zero similarity") {
    Video b = a;
    for (auto& px : b.rgb) px = std::uint8_t(255 - px);
    CHECK(ssim(a, b) < 0.2);
    CHECK(psnr(a, b) < 10.0);
  }

  SUBCASE("ssim is symmetric") {
    Video b = a;
    for (size_t i = 0; i < b.rgb.size(); i += 3)
      b.rgb[i] = std::uint8_t(std::min(255, b.rgb[i] + 25));
    CHECK(ssim(a, b) == ssim(b, a));
  }

  SUBCASE("constant offset gives the closed-form psnr") {
    Video x, y;
    x.frames = y.frames = 2;
    x.height = y.height = 16;
    x.width = y.width = 16;
    x.rgb.assign(size_t(2) * 16 * 16 * 3, 100);
    y.rgb.assign(size_t(2) * 16 * 16 * 3, 110);
    CHECK(psnr(x, y) ==
          doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 100.0))
              .epsilon(1e-12));
  }

  SUBCASE("dimension mismatches are rejected") {
    Video b = a;
    b.width = a.width / 2;
    b.rgb.resize(size_t(b.frames) * b.height * b.width * 3);
    CHECK_THROWS_AS(ssim(a, b), DataError);
    CHECK_THROWS_AS(psnr(a, b), DataError);
    Video tiny;
    tiny.frames = 1;
    tiny.height = 8;
    tiny.width = 8;
    tiny.rgb.assign(size_t(8) * 8 * 3, 0);
    CHECK_THROWS_AS(ssim(tiny, tiny), DataError);
  }
}

TEST_CASE("anomaly checks stay quiet on rendered episodes") {
  for (ScenarioKind kind : {ScenarioKind::uniform, ScenarioKind::parabola,
                            ScenarioKind::collision}) {
    auto specs = datagen::grid_sample(kind, 12, 55, 32);
    auto pal = fundamental_palette(kind);
    for (const auto& s : specs) {
      Episode ep = physim::simulate_episode(s);
      Video v = render_at(ep, 32);
      TrackSet ts = parse_tracks(v, pal);
      AnomalyFlags f = anomaly_check(ts, 3, 6.0);
      INFO("kind ", int(kind), " seed ", s.seed);
      CHECK(!f.any());
    }
  }
}

TEST_CASE("anomaly checks flag synthetic corruptions") {
  SUBCASE("object blanked mid-video trips persistence") {
    std::vector<std::vector<Body>> frames;
    for (int t = 0; t < 10; ++t) {
      if (t < 6)
        frames.push_back({ball(1.0, {3.0 + 0.2 * t, 5.0}, palette::kRed)});
      else
        frames.push_back({});
    }
    TrackSet ts = parse_tracks(render_bodies(frames, 128), {palette::kRed});
    AnomalyFlags f = anomaly_check(ts, 3, 6.0);
    CHECK(f.persistence);
    CHECK(!f.teleport);
    CHECK(!f.shape);
  }

  SUBCASE("redraw across the frame trips teleport") {
    std::vector<std::vector<Body>> frames;
    for (int t = 0; t < 8; ++t) {
      double x = t < 4 ? 3.0 : 7.0;  // 4-unit jump, limit is 2.4
      frames.push_back({ball(1.0, {x, 5.0}, palette::kRed)});
    }
    TrackSet ts = parse_tracks(render_bodies(frames, 128), {palette::kRed});
    AnomalyFlags f = anomaly_check(ts, 3, 6.0);
    CHECK(f.teleport);
    CHECK(!f.persistence);
    CHECK(!f.shape);
  }

  SUBCASE("mass-preserving smear trips the shape check alone") {
    // one disk splits into two of half the area: same mass, same centroid,
    // outline fits a disk of twice the area
    double r = 1.0 / std::sqrt(2.0);
    std::vector<std::vector<Body>> frames;
    for (int t = 0; t < 8; ++t) {
      if (t < 3)
        frames.push_back({ball(1.0, {5.0, 5.0}, palette::kRed)});
      else
        frames.push_back({ball(r, {3.5, 5.0}, palette::kRed),
                          ball(r, {6.5, 5.0}, palette::kRed)});
    }
    TrackSet ts = parse_tracks(render_bodies(frames, 128), {palette::kRed});
    AnomalyFlags f = anomaly_check(ts, 3, 6.0);
    CHECK(f.shape);
    CHECK(!f.persistence);
    CHECK(!f.teleport);
  }

  SUBCASE("colors never seen while conditioning are skipped") {
    std::vector<std::vector<Body>> frames(6);
    for (int t = 0; t < 6; ++t)
      frames[size_t(t)] = {ball(1.0, {4.0, 5.0}, palette::kRed)};
    TrackSet ts = parse_tracks(render_bodies(frames, 64),
                               {palette::kRed, palette::kBlue});
    CHECK(!anomaly_check(ts, 3, 6.0).any());
  }

  SUBCASE("arguments are validated") {
    std::vector<std::vector<Body>> frames(4);
    TrackSet ts = parse_tracks(render_bodies(frames, 32), {palette::kRed});
    CHECK_THROWS_AS(anomaly_check(ts, 0, 6.0), UsageError);
    CHECK_THROWS_AS(anomaly_check(ts, 4, 6.0), UsageError);
    CHECK_THROWS_AS(anomaly_check(ts, 2, 0.0), UsageError);
  }
}

TEST_CASE("attribute outcomes on rendered combinations") {
  const Attribute all[] = {Attribute::color, Attribute::shape,
                           Attribute::size, Attribute::velocity};

  SUBCASE("every pair keeps its own conditioned combination") {
    for (int ai = 0; ai < 4; ++ai)
      for (int bi = ai + 1; bi < 4; ++bi) {
        auto split =
            datagen::attribute_pair_dataset(all[ai], all[bi], 1, 99, 8);
        auto run = [&](const std::vector<physim::ScenarioSpec>& specs,
                       const std::vector<std::pair<int, int>>& combos) {
          for (size_t i = 0; i < specs.size(); ++i) {
            Video v = render_at(physim::simulate_episode(specs[i]), 128);
            auto j = classify_attribute_outcome(v, 3, all[ai], all[bi],
                                                combos[i]);
            INFO("pair ", ai, "/", bi, " combo ", combos[i].first, ",",
                 combos[i].second, " measured ", j.measured_a, ",",
                 j.measured_b);
            CHECK(j.outcome == AttrOutcome::kept_both);
            CHECK(j.measured_a == combos[i].first);
            CHECK(j.measured_b == combos[i].second);
          }
        };
        run(split.train, split.train_combo);
        run(split.test, split.test_combo);
      }
  }

  SUBCASE("mismatches map to the kept/changed quadrants") {
    auto split = datagen::attribute_pair_dataset(Attribute::color,
                                                 Attribute::shape, 1, 7, 8);
    // combos in emission order: train (0,0), (1,1); test (0,1), (1,0)
    std::vector<Video> vids;
    for (const auto& s : split.train)
      vids.push_back(render_at(physim::simulate_episode(s), 128));
    for (const auto& s : split.test)
      vids.push_back(render_at(physim::simulate_episode(s), 128));
    auto against_00 = [&](const Video& v) {
      return classify_attribute_outcome(v, 3, Attribute::color,
                                        Attribute::shape, {0, 0})
          .outcome;
    };
    CHECK(against_00(vids[0]) == AttrOutcome::kept_both);     // red ball
    CHECK(against_00(vids[1]) == AttrOutcome::kept_neither);  // blue square
    CHECK(against_00(vids[2]) == AttrOutcome::kept_a);        // red square
    CHECK(against_00(vids[3]) == AttrOutcome::kept_b);        // blue ball
    CHECK(outcome_name(AttrOutcome::kept_b) == std::string("kept_b"));
  }

  SUBCASE("ring variant of the shape attribute classifies too") {
    auto split = datagen::attribute_pair_dataset(Attribute::shape,
                                                 Attribute::size, 1, 13, 8,
                                                 /*alt_ring=*/true);
    auto run = [&](const std::vector<physim::ScenarioSpec>& specs,
                   const std::vector<std::pair<int, int>>& combos) {
      for (size_t i = 0; i < specs.size(); ++i) {
        Video v = render_at(physim::simulate_episode(specs[i]), 128);
        auto j = classify_attribute_outcome(v, 3, Attribute::shape,
                                            Attribute::size, combos[i], true);
        INFO("ring combo ", combos[i].first, ",", combos[i].second,
             " measured ", j.measured_a, ",", j.measured_b);
        CHECK(j.outcome == AttrOutcome::kept_both);
      }
    };
    run(split.train, split.train_combo);
    run(split.test, split.test_combo);
  }

  SUBCASE("arguments are validated") {
    Video v = render_bodies({{ball(1.0, {5.0, 5.0}, palette::kRed)},
                             {ball(1.0, {5.1, 5.0}, palette::kRed)}},
                            32);
    CHECK_THROWS_AS(classify_attribute_outcome(v, 1, Attribute::color,
                                               Attribute::color, {0, 0}),
                    UsageError);
    CHECK_THROWS_AS(classify_attribute_outcome(v, 0, Attribute::color,
                                               Attribute::shape, {0, 0}),
                    UsageError);
    CHECK_THROWS_AS(classify_attribute_outcome(v, 2, Attribute::color,
                                               Attribute::shape, {0, 0}),
                    UsageError);
  }
}

TEST_CASE("summaries aggregate error reports") {
  ErrorReport a;
  a.e = 0.1;
  a.has_value = true;
  ErrorReport b;
  b.e = 0.3;
  b.has_value = true;
  ErrorReport c;
  c.e = 0.2;
  c.has_value = true;
  ErrorReport skip;  // no usable frames
  auto s = summarize({a, b, c, skip});
  REQUIRE(s.has_value);
  CHECK(s.mean == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.median == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.counted == 3);
  CHECK(s.skipped == 1);
  auto t = summarize({a, b});
  CHECK(t.median == doctest::Approx(0.2).epsilon(1e-12));
  auto none = summarize({skip});
  CHECK(!none.has_value);
  CHECK(none.skipped == 1);
  CHECK(summarize({}).counted == 0);
}
