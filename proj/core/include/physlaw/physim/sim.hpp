#pragma once

#include <array>
#include <utility>

#include "physlaw/physim/world.hpp"

namespace physlaw::physim {

// One-dimensional perfectly elastic exchange along a shared axis. An
// infinite mass models a wall or other immovable obstacle.
std::pair<double, double> resolve_elastic_collision(double m1, double v1,
                                                    double m2, double v2);

// Advances one frame interval: v += g*dt for dynamic bodies, then positions
// integrate through dt with contacts located by bisection and resolved as
// restitution impulses along the contact normal. Bodies never interpenetrate
// by more than 1e-9.
WorldState step(const WorldState& state);

// Runs `frames` stored states starting from (and including) the initial one.
Episode simulate_world(const WorldState& initial, int frames);

// Deterministic world construction for a scenario spec. Placement randomness
// comes entirely from spec.seed.
WorldState world_from_spec(const ScenarioSpec& spec);

// world_from_spec + first-contact validation + simulate_world.
Episode simulate_episode(const ScenarioSpec& spec);

// Deepest pairwise (or wall) penetration in the state. Audit hook: stepped
// states stay at or below 1e-9.
double max_penetration(const WorldState& state);

// Continuous time until the two leading bodies first touch, assuming
// straight-line motion (exact for the zero-gravity head-on construction).
// Infinity when they never meet.
double collision_first_touch_time(const WorldState& state);

// Lexicographically ranked 4-element subsets of the 8 combinatorial object
// types; id 0 -> {0,1,2,3}, id 69 -> {4,5,6,7}.
std::array<int, 4> template_combo(int template_id);

}  // namespace physlaw::physim
