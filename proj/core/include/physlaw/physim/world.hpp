#pragma once

#include <cstdint>
#include <vector>

#include "physlaw/common.hpp"

namespace physlaw::physim {

enum class ShapeKind { circle, box, ring };

// Rigid body in world units. A ring collides as a solid disc of its outer
// radius; the hole is visual only. Boxes are axis-aligned and never rotate.
struct Body {
  int id = 0;
  ShapeKind shape = ShapeKind::circle;
  double radius = 0.0;        // circle and ring outer radius
  double inner_radius = 0.0;  // ring hole radius, < radius
  Vec2 half_extent{};         // box half extents
  Vec2 position{};
  Vec2 velocity{};
  Rgb8 color{};
  bool dynamic = true;
  double restitution = 1.0;

  // Density 1, mass = area. Rings weigh as full discs so a ring and a ball
  // of equal outer radius follow identical trajectories.
  double mass() const;
};

struct WorldState {
  std::vector<Body> bodies;
  double gravity = 0.0;  // units/s^2, acts along -y
  double dt = 0.1;
  Vec2 bounds_min{0.0, 0.0};
  Vec2 bounds_max{10.0, 10.0};
  // When set, the bounds box is a rigid container and bodies bounce off it.
  bool bounded = false;
  // Contact approach speeds below this resolve with restitution 0 so piles
  // can settle instead of bouncing forever. Must exceed gravity*dt to absorb
  // the per-step free-fall kick of a body resting on support.
  double rest_speed_cutoff = 0.0;
};

enum class ScenarioKind {
  uniform,
  collision,
  parabola,
  combinatorial,
  composition_spatial,
  composition_temporal,
};

enum class VisualShape { ball, square, ring };

// One movable object of a fundamental scenario: what it looks like plus its
// two degrees of freedom (size, speed). Placement comes from the spec seed.
struct ObjectSpec {
  VisualShape shape = VisualShape::ball;
  Rgb8 color{220, 30, 30};
  double size = 1.0;   // ball/ring radius, or box half extent
  double speed = 0.0;  // magnitude along the scenario motion axis
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::uniform;
  std::vector<ObjectSpec> objects;
  int template_id = -1;  // combinatorial: index into the 4-of-8 type subsets
  bool event_a = true;   // composition scenarios: which event halves fire
  bool event_b = false;
  std::uint64_t seed = 0;
  int frames = 32;
};

struct Episode {
  ScenarioSpec spec;
  std::vector<WorldState> frames;
};

}  // namespace physlaw::physim
