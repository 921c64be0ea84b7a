#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "physlaw/physim/sim.hpp"

namespace physlaw::physim {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Per-slice travel cap: half the smallest collidable feature (r >= 0.3, bar
// half-thickness 0.12 paired with r >= 0.25), so an end-of-slice overlap
// test cannot miss a full crossing. Grazing passes shorter than the cap can
// still slip through; they carry no impulse either way.
constexpr double kMaxTravel = 0.125;

// Penetration must grow by this much past its slice-start value to count as
// a new contact. Bodies therefore never interpenetrate by more than ~1e-9.
constexpr double kContactGap = 1e-9;

constexpr double kApproachEps = 1e-12;
constexpr int kMaxEventsPerStep = 256;
// Sequential impulses over a resting chain converge geometrically; enough
// passes leave residual approach speeds below kApproachEps.
constexpr int kMaxImpulsePasses = 64;

bool collides_as_circle(const Body& b) { return b.shape != ShapeKind::box; }

struct ContactGeom {
  double overlap;  // positive when penetrating
  Vec2 normal;     // unit, points from the second participant toward the first
};

ContactGeom geom_circles(double ra, Vec2 pa, double rb, Vec2 pb) {
  Vec2 d = pa - pb;
  double dist = d.norm();
  if (dist > 1e-12) return {ra + rb - dist, d * (1.0 / dist)};
  return {ra + rb, {1.0, 0.0}};
}

ContactGeom geom_circle_box(double r, Vec2 pc, Vec2 pb, Vec2 he) {
  Vec2 q{std::clamp(pc.x, pb.x - he.x, pb.x + he.x),
         std::clamp(pc.y, pb.y - he.y, pb.y + he.y)};
  Vec2 d = pc - q;
  double dist = d.norm();
  if (dist > 1e-12) return {r - dist, d * (1.0 / dist)};
  // Center inside the box: exit along the shallow axis.
  double px = he.x - std::abs(pc.x - pb.x);
  double py = he.y - std::abs(pc.y - pb.y);
  if (px < py) return {r + px, {pc.x >= pb.x ? 1.0 : -1.0, 0.0}};
  return {r + py, {0.0, pc.y >= pb.y ? 1.0 : -1.0}};
}

ContactGeom geom_boxes(Vec2 pa, Vec2 ha, Vec2 pb, Vec2 hb) {
  double ox = ha.x + hb.x - std::abs(pa.x - pb.x);
  double oy = ha.y + hb.y - std::abs(pa.y - pb.y);
  if (ox < oy) return {ox, {pa.x >= pb.x ? 1.0 : -1.0, 0.0}};
  return {oy, {0.0, pa.y >= pb.y ? 1.0 : -1.0}};
}

ContactGeom geom_pair(const Body& a, Vec2 pa, const Body& b, Vec2 pb) {
  bool ca = collides_as_circle(a);
  bool cb = collides_as_circle(b);
  if (ca && cb) return geom_circles(a.radius, pa, b.radius, pb);
  if (ca && !cb) return geom_circle_box(a.radius, pa, pb, b.half_extent);
  if (!ca && cb) {
    ContactGeom g = geom_circle_box(b.radius, pb, pa, a.half_extent);
    return {g.overlap, g.normal * -1.0};
  }
  return geom_boxes(pa, a.half_extent, pb, b.half_extent);
}

// Walls 0..3 = left, right, bottom, top. Normal points into the world.
ContactGeom geom_wall(const Body& b, Vec2 p, int wall, Vec2 bmin, Vec2 bmax) {
  double rx = collides_as_circle(b) ? b.radius : b.half_extent.x;
  double ry = collides_as_circle(b) ? b.radius : b.half_extent.y;
  switch (wall) {
    case 0: return {bmin.x + rx - p.x, {1.0, 0.0}};
    case 1: return {p.x + rx - bmax.x, {-1.0, 0.0}};
    case 2: return {bmin.y + ry - p.y, {0.0, 1.0}};
    default: return {p.y + ry - bmax.y, {0.0, -1.0}};
  }
}

struct Candidate {
  int i;
  int j;     // -1 for wall contacts
  int wall;  // 0..3 when j == -1
};

std::vector<Candidate> contact_candidates(const WorldState& s) {
  std::vector<Candidate> out;
  int n = int(s.bodies.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!s.bodies[i].dynamic && !s.bodies[j].dynamic) continue;
      out.push_back({i, j, -1});
    }
    if (s.bounded && s.bodies[i].dynamic)
      for (int w = 0; w < 4; ++w) out.push_back({i, -1, w});
  }
  return out;
}

ContactGeom geom_candidate(const WorldState& s, const Candidate& c,
                           const std::vector<Vec2>& pos) {
  if (c.j >= 0) return geom_pair(s.bodies[c.i], pos[c.i], s.bodies[c.j], pos[c.j]);
  return geom_wall(s.bodies[c.i], pos[c.i], c.wall, s.bounds_min, s.bounds_max);
}

void resolve_contacts(WorldState& s, const std::vector<Candidate>& cands,
                      std::vector<Vec2>& pos) {
  auto inv_mass = [&](int idx) {
    return s.bodies[idx].dynamic ? 1.0 / s.bodies[idx].mass() : 0.0;
  };
  for (int pass = 0; pass < kMaxImpulsePasses; ++pass) {
    bool applied = false;
    for (const Candidate& c : cands) {
      ContactGeom g = geom_candidate(s, c, pos);
      if (g.overlap < -kContactGap) continue;
      Body& a = s.bodies[c.i];
      Vec2 vrel = c.j >= 0 ? a.velocity - s.bodies[c.j].velocity : a.velocity;
      double vn = vrel.dot(g.normal);
      if (vn >= -kApproachEps) continue;
      double e = c.j >= 0 ? std::max(a.restitution, s.bodies[c.j].restitution)
                          : a.restitution;
      if (-vn < s.rest_speed_cutoff) e = 0.0;
      double inv_a = inv_mass(c.i);
      double inv_b = c.j >= 0 ? inv_mass(c.j) : 0.0;
      double denom = inv_a + inv_b;
      if (denom == 0.0) continue;
      double imp = -(1.0 + e) * vn / denom;
      a.velocity += g.normal * (imp * inv_a);
      if (c.j >= 0) s.bodies[c.j].velocity -= g.normal * (imp * inv_b);
      applied = true;
    }
    if (!applied) break;
  }
  // Project out whatever tiny penetration the bisection admitted so resting
  // stacks do not ratchet downward step after step. Separating one pair can
  // reopen a chained contact (stack on floor), so iterate until clean.
  for (int pass = 0; pass < kMaxImpulsePasses; ++pass) {
    bool pushed = false;
    for (const Candidate& c : cands) {
      ContactGeom g = geom_candidate(s, c, pos);
      if (g.overlap <= 1e-15) continue;
      double inv_a = inv_mass(c.i);
      double inv_b = c.j >= 0 ? inv_mass(c.j) : 0.0;
      double denom = inv_a + inv_b;
      if (denom == 0.0) continue;
      pos[c.i] += g.normal * (g.overlap * inv_a / denom);
      if (c.j >= 0) pos[c.j] -= g.normal * (g.overlap * inv_b / denom);
      pushed = true;
    }
    if (!pushed) break;
  }
}

void advance(WorldState& s, double h) {
  int n = int(s.bodies.size());
  std::vector<Candidate> cands = contact_candidates(s);
  std::vector<Vec2> base(n), probe(n);
  std::vector<double> over0(cands.size());

  double remaining = h;
  int events = 0;
  while (remaining > 1e-15) {
    double vmax = 0.0;
    for (const Body& b : s.bodies)
      if (b.dynamic) vmax = std::max(vmax, b.velocity.norm());
    double slice =
        vmax * remaining <= kMaxTravel ? remaining : kMaxTravel / vmax;

    for (int i = 0; i < n; ++i) base[i] = s.bodies[i].position;
    for (size_t k = 0; k < cands.size(); ++k)
      over0[k] = std::max(geom_candidate(s, cands[k], base).overlap, 0.0);

    auto positions_at = [&](double t) {
      for (int i = 0; i < n; ++i)
        probe[i] = s.bodies[i].dynamic ? base[i] + s.bodies[i].velocity * t
                                       : base[i];
    };
    // Largest penetration growth over the slice-start state; a contact event
    // is wherever this first exceeds kContactGap.
    auto excess = [&](double t) {
      positions_at(t);
      double worst = -std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < cands.size(); ++k)
        worst = std::max(
            worst, geom_candidate(s, cands[k], probe).overlap - over0[k]);
      return worst;
    };

    if (excess(slice) <= kContactGap) {
      for (int i = 0; i < n; ++i) s.bodies[i].position = probe[i];
      remaining -= slice;
      continue;
    }
    double lo = 0.0, hi = slice;
    for (int it = 0; it < 80 && hi - lo > 1e-13 * slice; ++it) {
      double mid = 0.5 * (lo + hi);
      (excess(mid) > kContactGap ? hi : lo) = mid;
    }
    positions_at(lo);
    resolve_contacts(s, cands, probe);
    for (int i = 0; i < n; ++i) s.bodies[i].position = probe[i];
    remaining -= lo;
    if (++events >= kMaxEventsPerStep) {
      // Pathological contact storm: finish the step contact-blind rather
      // than spin. Unreachable for the scenario families shipped here.
      for (int i = 0; i < n; ++i) {
        Body& b = s.bodies[i];
        if (b.dynamic) b.position += b.velocity * remaining;
      }
      break;
    }
  }
}

}  // namespace

double Body::mass() const {
  if (shape == ShapeKind::box) return 4.0 * half_extent.x * half_extent.y;
  return kPi * radius * radius;
}

std::pair<double, double> resolve_elastic_collision(double m1, double v1,
                                                    double m2, double v2) {
  if (std::isinf(m1) && std::isinf(m2)) return {v1, v2};
  if (std::isinf(m2)) return {2.0 * v2 - v1, v2};
  if (std::isinf(m1)) return {v1, 2.0 * v1 - v2};
  double sum = m1 + m2;
  return {((m1 - m2) * v1 + 2.0 * m2 * v2) / sum,
          ((m2 - m1) * v2 + 2.0 * m1 * v1) / sum};
}

WorldState step(const WorldState& state) {
  WorldState s = state;
  for (Body& b : s.bodies)
    if (b.dynamic) b.velocity.y -= s.gravity * s.dt;
  advance(s, s.dt);
  return s;
}

Episode simulate_world(const WorldState& initial, int frames) {
  if (frames < 1)
    throw DataError("simulate_world: frame count must be >= 1, got " +
                    std::to_string(frames));
  Episode ep;
  ep.frames.reserve(size_t(frames));
  ep.frames.push_back(initial);
  for (int k = 1; k < frames; ++k) ep.frames.push_back(step(ep.frames.back()));
  return ep;
}

double max_penetration(const WorldState& state) {
  std::vector<Vec2> pos(state.bodies.size());
  for (size_t i = 0; i < pos.size(); ++i) pos[i] = state.bodies[i].position;
  double worst = 0.0;
  for (const Candidate& c : contact_candidates(state))
    worst = std::max(worst, geom_candidate(state, c, pos).overlap);
  return worst;
}

double collision_first_touch_time(const WorldState& state) {
  // First two dynamic circles; exact under straight-line motion.
  const Body* a = nullptr;
  const Body* b = nullptr;
  for (const Body& body : state.bodies) {
    if (!body.dynamic || !collides_as_circle(body)) continue;
    if (!a) {
      a = &body;
    } else {
      b = &body;
      break;
    }
  }
  if (!a || !b)
    throw DataError("collision_first_touch_time: world lacks two dynamic balls");
  Vec2 dp = a->position - b->position;
  Vec2 dv = a->velocity - b->velocity;
  double rsum = a->radius + b->radius;
  double c = dp.dot(dp) - rsum * rsum;
  if (c <= 0.0) return 0.0;
  double qa = dv.dot(dv);
  double qb = 2.0 * dp.dot(dv);
  double inf = std::numeric_limits<double>::infinity();
  if (qa == 0.0) return inf;
  double disc = qb * qb - 4.0 * qa * c;
  if (disc < 0.0) return inf;
  double t1 = (-qb - std::sqrt(disc)) / (2.0 * qa);
  return t1 >= 0.0 ? t1 : inf;
}

std::array<int, 4> template_combo(int template_id) {
  if (template_id < 0 || template_id >= 70)
    throw DataError("template id out of range [0,70): " +
                    std::to_string(template_id));
  // Lexicographic unranking of 4-subsets of {0..7}.
  auto choose = [](int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return int(r);
  };
  std::array<int, 4> out{};
  int rank = template_id;
  int next = 0;
  for (int slot = 0; slot < 4; ++slot) {
    for (int v = next; v < 8; ++v) {
      int block = choose(8 - v - 1, 4 - slot - 1);
      if (rank < block) {
        out[size_t(slot)] = v;
        next = v + 1;
        break;
      }
      rank -= block;
    }
  }
  return out;
}

}  // namespace physlaw::physim
