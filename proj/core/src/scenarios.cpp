#include <algorithm>
#include <cmath>
#include <string>

#include "physlaw/numkit/rng.hpp"
#include "physlaw/palette.hpp"
#include "physlaw/physim/sim.hpp"

namespace physlaw::physim {
namespace {

using numkit::Rng;

constexpr double kMargin = 0.05;
constexpr double kGravity = 9.8;
constexpr double kCombRestitution = 0.2;
// Contact approach speeds below this settle instead of bouncing. Must beat
// gravity*dt (0.98) or a body resting on support re-bounces its own
// free-fall kick every step.
constexpr double kCombRestCutoff = 1.0;
// Placement keeps this much clearance between freshly seeded bodies.
constexpr double kSeedClearance = 0.08;

double jitter(Rng& rng, double lo, double hi) {
  return lo >= hi ? lo : rng.uniform(lo, hi);
}

Body body_from_object(const ObjectSpec& o, int id) {
  if (o.size <= 0.0)
    throw DataError("scenario object size must be positive, got " +
                    std::to_string(o.size));
  Body b;
  b.id = id;
  b.color = o.color;
  switch (o.shape) {
    case VisualShape::ball:
      b.shape = ShapeKind::circle;
      b.radius = o.size;
      break;
    case VisualShape::ring:
      b.shape = ShapeKind::ring;
      b.radius = o.size;
      b.inner_radius = 0.55 * o.size;
      break;
    case VisualShape::square:
      b.shape = ShapeKind::box;
      b.half_extent = {o.size, o.size};
      break;
  }
  return b;
}

void require_objects(const ScenarioSpec& spec, size_t n, const char* kind) {
  if (spec.objects.size() < n)
    throw DataError(std::string(kind) + " spec needs " + std::to_string(n) +
                    " object(s), got " + std::to_string(spec.objects.size()));
}

// Start position giving the longest fully visible run at this speed.
double visible_run_start(Rng& rng, double ext, double speed, double dt,
                         int frames, double span) {
  double travel = speed * dt * (frames - 1);
  double lo = ext + kMargin;
  double hi = std::max(lo, span - ext - kMargin - travel);
  return jitter(rng, lo, hi);
}

WorldState build_uniform(const ScenarioSpec& spec, bool with_gravity) {
  require_objects(spec, 1, with_gravity ? "parabola" : "uniform");
  const ObjectSpec& o = spec.objects[0];
  WorldState w;
  w.gravity = with_gravity ? kGravity : 0.0;
  Rng rng(spec.seed);
  Body b = body_from_object(o, 0);
  b.velocity = {o.speed, 0.0};
  double ext = o.size;
  double span = w.bounds_max.y - w.bounds_min.y;
  if (with_gravity) {
    // Launched horizontally near the top left so the arc crosses the view.
    double yhi = w.bounds_max.y - ext - kMargin;
    b.position.y = jitter(rng, std::max(ext + kMargin, yhi - 0.8), yhi);
    double xlo = ext + kMargin;
    b.position.x = jitter(rng, xlo, std::min(w.bounds_max.x - ext - kMargin,
                                             xlo + 1.5));
  } else {
    b.position.y = jitter(rng, ext + kMargin, span - ext - kMargin);
    b.position.x = visible_run_start(rng, ext, o.speed, w.dt, spec.frames,
                                     w.bounds_max.x - w.bounds_min.x);
  }
  w.bodies.push_back(b);
  return w;
}

// Head-on pair with first touch at an exact seed-chosen time past frame 4.
WorldState build_collision(const ScenarioSpec& spec) {
  require_objects(spec, 2, "collision");
  const ObjectSpec& o1 = spec.objects[0];
  const ObjectSpec& o2 = spec.objects[1];
  double closing = o1.speed + o2.speed;
  if (closing < 1e-6)
    throw DataError("collision spec has no closing speed; the balls never meet");
  if (spec.frames < 7)
    throw DataError(
        "collision episodes need at least 7 frames so first touch can land "
        "after frame 4, got " +
        std::to_string(spec.frames));
  WorldState w;
  Rng rng(spec.seed);
  Body b1 = body_from_object(o1, 0);
  Body b2 = body_from_object(o2, 1);
  b1.velocity = {o1.speed, 0.0};
  b2.velocity = {-o2.speed, 0.0};
  double fhi = std::min<double>(spec.frames - 2, 12.0);
  double tstar = jitter(rng, 4.6, fhi) * w.dt;
  double r1 = o1.size, r2 = o2.size;
  // Contact point: prefer mid-view, clamp into the band where both start
  // positions stay fully visible; fall back to the band midpoint.
  double clo = 2.0 * r1 + o1.speed * tstar + kMargin;
  double chi = w.bounds_max.x - 2.0 * r2 - o2.speed * tstar - kMargin;
  double cx;
  if (clo <= chi)
    cx = jitter(rng, std::max(clo, std::min(4.0, chi)),
                std::min(chi, std::max(6.0, clo)));
  else
    cx = 0.5 * (clo + chi);
  double rmax = std::max(r1, r2);
  double y = jitter(rng, rmax + kMargin, w.bounds_max.y - rmax - kMargin);
  b1.position = {cx - r1 - o1.speed * tstar, y};
  b2.position = {cx + r2 + o2.speed * tstar, y};
  w.bodies.push_back(b1);
  w.bodies.push_back(b2);
  return w;
}

double seed_radius(const Body& b) {
  if (b.shape == ShapeKind::box)
    return std::sqrt(b.half_extent.x * b.half_extent.x +
                     b.half_extent.y * b.half_extent.y);
  return b.radius;
}

bool clear_of_existing(const WorldState& w, Vec2 pos, double rad) {
  for (const Body& b : w.bodies) {
    double need = rad + seed_radius(b) + kSeedClearance;
    if ((pos - b.position).norm2() < need * need) return false;
  }
  return true;
}

// Places `proto` (and optional second group member at `partner_offset`)
// uniformly inside [lo, hi], rejecting overlaps with what is already seeded.
void place_with_rejection(WorldState& w, Rng& rng, Body proto, Vec2 lo, Vec2 hi,
                          int type_tag, Vec2 partner_offset = {0.0, 0.0},
                          const Body* partner = nullptr) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Vec2 pos{jitter(rng, lo.x, hi.x), jitter(rng, lo.y, hi.y)};
    if (!clear_of_existing(w, pos, seed_radius(proto))) continue;
    if (partner &&
        !clear_of_existing(w, pos + partner_offset, seed_radius(*partner)))
      continue;
    proto.position = pos;
    proto.id = int(w.bodies.size());
    w.bodies.push_back(proto);
    if (partner) {
      Body second = *partner;
      second.position = pos + partner_offset;
      second.id = int(w.bodies.size());
      w.bodies.push_back(second);
    }
    return;
  }
  throw DataError("combinatorial placement failed for object type " +
                  std::to_string(type_tag) + "; scene too crowded");
}

Body comb_body(ShapeKind shape, Rgb8 color, bool dynamic) {
  Body b;
  b.shape = shape;
  b.color = color;
  b.dynamic = dynamic;
  b.restitution = kCombRestitution;
  return b;
}

void place_dynamic_ball(WorldState& w, Rng& rng, double rlo, double rhi,
                        Rgb8 color, int tag) {
  Body b = comb_body(ShapeKind::circle, color, true);
  b.radius = rng.uniform(rlo, rhi);
  Vec2 lo{b.radius + kMargin, std::max(4.0, b.radius + kMargin)};
  Vec2 hi{w.bounds_max.x - b.radius - kMargin,
          w.bounds_max.y - b.radius - kMargin};
  place_with_rejection(w, rng, b, lo, hi, tag);
}

void place_type(WorldState& w, Rng& rng, int type) {
  switch (type) {
    case 0:  // small dynamic ball
      place_dynamic_ball(w, rng, 0.3, 0.5, palette::kGray, type);
      return;
    case 1:  // large dynamic ball
      place_dynamic_ball(w, rng, 0.7, 1.1, palette::kBlue, type);
      return;
    case 2: {  // fixed ball cluster: touching triangle, seeded as one blob
      double rc = rng.uniform(0.25, 0.35);
      Body b = comb_body(ShapeKind::circle, palette::kStaticBlack, false);
      b.radius = rc;
      double blob = 2.2 * rc;
      Vec2 lo{blob + kMargin, blob + kMargin};
      Vec2 hi{w.bounds_max.x - blob - kMargin, 6.0};
      for (int attempt = 0; attempt < 200; ++attempt) {
        Vec2 center{jitter(rng, lo.x, hi.x), jitter(rng, lo.y, hi.y)};
        if (!clear_of_existing(w, center, blob)) continue;
        Vec2 offs[3] = {{-rc, 0.0}, {rc, 0.0}, {0.0, rc * 1.7320508075688772}};
        for (Vec2 off : offs) {
          Body m = b;
          m.position = center + off;
          m.id = int(w.bodies.size());
          w.bodies.push_back(m);
        }
        return;
      }
      throw DataError("combinatorial placement failed for object type 2");
    }
    case 3: {  // fixed floor bar
      Body b = comb_body(ShapeKind::box, palette::kStaticBlack, false);
      b.half_extent = {rng.uniform(1.2, 2.0), 0.12};
      Vec2 lo{b.half_extent.x + kMargin, 0.4};
      Vec2 hi{w.bounds_max.x - b.half_extent.x - kMargin, 2.5};
      place_with_rejection(w, rng, b, lo, hi, type);
      return;
    }
    case 4: {  // fixed ledge bar
      Body b = comb_body(ShapeKind::box, palette::kStaticBlack, false);
      b.half_extent = {rng.uniform(0.8, 1.4), 0.12};
      Vec2 lo{b.half_extent.x + kMargin, 3.0};
      Vec2 hi{w.bounds_max.x - b.half_extent.x - kMargin, 6.5};
      place_with_rejection(w, rng, b, lo, hi, type);
      return;
    }
    case 5: {  // dynamic box
      Body b = comb_body(ShapeKind::box, palette::kGreen, true);
      b.half_extent = {rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6)};
      Vec2 lo{seed_radius(b) + kMargin, 4.0};
      Vec2 hi{w.bounds_max.x - seed_radius(b) - kMargin,
              w.bounds_max.y - seed_radius(b) - kMargin};
      place_with_rejection(w, rng, b, lo, hi, type);
      return;
    }
    case 6: {  // dynamic box stack: two equal boxes, top resting on bottom
      Body b = comb_body(ShapeKind::box, palette::kYellow, true);
      b.half_extent = {rng.uniform(0.35, 0.55), rng.uniform(0.25, 0.4)};
      Vec2 offset{0.0, 2.0 * b.half_extent.y};
      Vec2 lo{seed_radius(b) + kMargin, 4.0};
      Vec2 hi{w.bounds_max.x - seed_radius(b) - kMargin,
              w.bounds_max.y - seed_radius(b) - kMargin - offset.y};
      place_with_rejection(w, rng, b, lo, hi, type, offset, &b);
      return;
    }
    default: {  // 7: fixed wall segment
      Body b = comb_body(ShapeKind::box, palette::kStaticBlack, false);
      b.half_extent = {0.12, rng.uniform(1.0, 2.0)};
      Vec2 lo{b.half_extent.x + kMargin, b.half_extent.y + kMargin};
      Vec2 hi{w.bounds_max.x - b.half_extent.x - kMargin,
              w.bounds_max.y - b.half_extent.y - kMargin};
      place_with_rejection(w, rng, b, lo, hi, type);
      return;
    }
  }
}

// Red ball plus the template's four object types, everything at rest in a
// walled box; free fall starts at frame 0.
WorldState build_combinatorial(const ScenarioSpec& spec) {
  WorldState w;
  w.gravity = kGravity;
  w.bounded = true;
  w.rest_speed_cutoff = kCombRestCutoff;
  Rng rng(spec.seed);
  Body red = comb_body(ShapeKind::circle, palette::kRed, true);
  red.radius = rng.uniform(0.35, 0.6);
  Vec2 lo{red.radius + kMargin, std::max(4.0, red.radius + kMargin)};
  Vec2 hi{w.bounds_max.x - red.radius - kMargin,
          w.bounds_max.y - red.radius - kMargin};
  place_with_rejection(w, rng, red, lo, hi, -1);
  for (int type : template_combo(spec.template_id)) place_type(w, rng, type);
  return w;
}

constexpr double kWallFaceX = 9.7;  // composition scenes: right wall surface

void add_side_wall(WorldState& w) {
  Body wall;
  wall.shape = ShapeKind::box;
  wall.half_extent = {0.15, 5.0};
  wall.position = {kWallFaceX + wall.half_extent.x, 5.0};
  wall.color = palette::kGray;
  wall.dynamic = false;
  wall.id = int(w.bodies.size());
  w.bodies.push_back(wall);
}

// Two event kinds on separate horizontal bands: object A translating, object
// B bouncing off the side wall. event_a / event_b select which fire.
WorldState build_composition_spatial(const ScenarioSpec& spec) {
  require_objects(spec, 2, "composition-spatial");
  const ObjectSpec& oa = spec.objects[0];  // band-bouncer (ball, upper)
  const ObjectSpec& ob = spec.objects[1];  // translator (square, lower)
  WorldState w;
  Rng rng(spec.seed);
  Body mover = body_from_object(ob, 1);
  Body bouncer = body_from_object(oa, 0);

  double byhi = w.bounds_max.y - oa.size - kMargin;
  bouncer.position.y = jitter(rng, std::min(6.8, byhi), byhi);
  if (spec.event_b) {
    bouncer.velocity = {oa.speed, 0.0};
    double fb = jitter(rng, 4.5, std::min<double>(spec.frames - 2, 12.0));
    bouncer.position.x = std::max(oa.size + kMargin,
                                  kWallFaceX - oa.size - oa.speed * fb * w.dt);
  } else {
    bouncer.position.x =
        jitter(rng, oa.size + kMargin, kWallFaceX - oa.size - kMargin);
  }

  mover.position.y =
      jitter(rng, ob.size + kMargin, std::max(ob.size + kMargin, 3.2));
  if (spec.event_a) {
    mover.velocity = {ob.speed, 0.0};
    double travel = ob.speed * w.dt * (spec.frames - 1);
    double xlo = ob.size + kMargin;
    mover.position.x =
        jitter(rng, xlo, std::max(xlo, kWallFaceX - ob.size - kMargin - travel));
  } else {
    mover.position.x =
        jitter(rng, ob.size + kMargin, kWallFaceX - ob.size - kMargin);
  }

  w.bodies.push_back(bouncer);
  w.bodies.push_back(mover);
  add_side_wall(w);
  return w;
}

// Event A: head-on two-ball collision clear of the wall. Event B: lone ball
// bouncing off the wall. Both: collision whose outgoing ball reaches the
// wall inside the clip.
WorldState build_composition_temporal(const ScenarioSpec& spec) {
  require_objects(spec, 2, "composition-temporal");
  if (!spec.event_a && !spec.event_b)
    throw DataError("composition-temporal spec enables neither event");
  const ObjectSpec& o1 = spec.objects[0];
  const ObjectSpec& o2 = spec.objects[1];
  WorldState w;
  Rng rng(spec.seed);

  if (!spec.event_a) {  // wall bounce only
    Body b = body_from_object(o1, 0);
    b.velocity = {o1.speed, 0.0};
    double byhi = w.bounds_max.y - o1.size - kMargin;
    b.position.y = jitter(rng, o1.size + kMargin, byhi);
    double fb = jitter(rng, 4.6, std::min<double>(spec.frames - 2, 12.0));
    b.position.x = std::max(o1.size + kMargin,
                            kWallFaceX - o1.size - o1.speed * fb * w.dt);
    w.bodies.push_back(b);
    add_side_wall(w);
    return w;
  }

  if (spec.frames < 7)
    throw DataError("composition-temporal collisions need at least 7 frames");
  double closing = o1.speed + o2.speed;
  if (closing < 1e-6)
    throw DataError("composition-temporal spec has no closing speed");
  Body b1 = body_from_object(o1, 0);
  Body b2 = body_from_object(o2, 1);
  b1.velocity = {o1.speed, 0.0};
  b2.velocity = {-o2.speed, 0.0};
  double r1 = o1.size, r2 = o2.size;
  auto [u1, u2] = resolve_elastic_collision(b1.mass(), o1.speed, b2.mass(),
                                            -o2.speed);
  double T = (spec.frames - 1) * w.dt;
  double fhi = std::min<double>(spec.frames - (spec.event_b ? 3 : 2), 8.0);
  // Every placement constraint is linear in the contact time t*, so capping
  // the draw range up front makes feasibility a property of the spec alone,
  // never of the seed.
  bool feasible = true;
  auto constrain = [&](double alpha, double beta) {
    if (alpha > 0.0)
      fhi = std::min(fhi, beta / alpha / w.dt);
    else if (alpha * (4.6 * w.dt) > beta)
      feasible = false;
  };
  // Both start positions fully visible.
  constrain(closing, kWallFaceX - 2.0 * (r1 + r2) - 2.0 * kMargin);
  if (spec.event_b) {
    if (u2 < 0.05)
      throw DataError(
          "composition-temporal: collision does not send the second ball "
          "toward the wall");
    // Outgoing ball reaches the wall with 1.5 frames to spare...
    constrain(u2 + o2.speed, u2 * (T - 1.5 * w.dt) - kMargin);
    // ...yet ends the clip clear of the re-closing first ball...
    constrain(0.5 * (u2 - u1),
              0.5 * (u2 - u1) * T - 1.5 * w.dt * u2 - 0.5 * kMargin);
    // ...while the first ball's start stays left of that placement band.
    constrain(o1.speed - 0.5 * (u1 + u2),
              kWallFaceX - 2.0 * (r1 + r2) - 1.5 * kMargin -
                  0.5 * (u1 + u2) * T);
  } else if (u2 > 0.0) {
    // Outgoing ball must never touch the wall inside the clip.
    constrain(o1.speed - u2,
              kWallFaceX - 2.0 * (r1 + r2) - kMargin - 0.2 - u2 * T);
  }
  if (!feasible || fhi < 4.6)
    throw DataError(
        "composition-temporal: frames/speeds leave no contact time after "
        "frame 4; raise frames or speeds");
  double tstar = jitter(rng, 4.6, fhi) * w.dt;
  double trest = T - tstar;
  double clo = 2.0 * r1 + o1.speed * tstar + kMargin;
  double chi = kWallFaceX - 2.0 * r2 - o2.speed * tstar - kMargin;
  double cx;
  if (spec.event_b) {
    clo = std::max(clo, kWallFaceX - 2.0 * r2 - u2 * (trest - 1.5 * w.dt));
    chi = std::min(chi, kWallFaceX - 2.0 * r2 -
                            0.5 * (kMargin + (u1 + u2) * trest));
    cx = jitter(rng, clo, chi);
  } else {
    if (u2 > 0.0) chi = std::min(chi, kWallFaceX - 2.0 * r2 - u2 * trest - 0.2);
    cx = jitter(rng, clo, std::min(chi, std::max(5.0, clo)));
  }
  double rmax = std::max(r1, r2);
  double y = jitter(rng, rmax + kMargin, w.bounds_max.y - rmax - kMargin);
  b1.position = {cx - r1 - o1.speed * tstar, y};
  b2.position = {cx + r2 + o2.speed * tstar, y};
  w.bodies.push_back(b1);
  w.bodies.push_back(b2);
  add_side_wall(w);
  return w;
}

}  // namespace

WorldState world_from_spec(const ScenarioSpec& spec) {
  if (spec.frames < 1)
    throw DataError("scenario frame count must be >= 1, got " +
                    std::to_string(spec.frames));
  switch (spec.kind) {
    case ScenarioKind::uniform: return build_uniform(spec, false);
    case ScenarioKind::parabola: return build_uniform(spec, true);
    case ScenarioKind::collision: return build_collision(spec);
    case ScenarioKind::combinatorial: return build_combinatorial(spec);
    case ScenarioKind::composition_spatial:
      return build_composition_spatial(spec);
    case ScenarioKind::composition_temporal:
      return build_composition_temporal(spec);
  }
  throw DataError("unknown scenario kind");
}

Episode simulate_episode(const ScenarioSpec& spec) {
  WorldState w0 = world_from_spec(spec);
  if (spec.kind == ScenarioKind::collision) {
    double t = collision_first_touch_time(w0);
    if (!(t > 4.0 * w0.dt))
      throw DataError("collision first touch at frame " +
                      std::to_string(int(std::ceil(t / w0.dt))) +
                      "; must land after frame 4");
  }
  Episode ep = simulate_world(w0, spec.frames);
  ep.spec = spec;
  return ep;
}

}  // namespace physlaw::physim
