#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "physlaw/physim/world.hpp"

namespace physlaw::raster {

using physim::Episode;
using physim::WorldState;

struct RenderConfig {
  int resolution = 32;  // square frames
  int supersample = 4;  // samples per pixel axis
  Rgb8 background{0, 0, 0};
};

// Packed RGB8 video. Frame-major, rows top to bottom, then column, channel.
struct Video {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  std::size_t index(int t, int y, int x, int c) const {
    return ((std::size_t(t) * height + y) * std::size_t(width) + x) * 3 + c;
  }
  std::uint8_t at(int t, int y, int x, int c) const {
    return rgb[index(t, y, x, c)];
  }
};

// Writes resolution^2 * 3 bytes. World y-up maps to image y-down, the world
// bounds rectangle fills the frame, later-listed bodies paint over earlier
// ones, and each pixel averages supersample^2 point samples (integer
// accumulation, round half up). Sample grids are mirror-symmetric inside the
// pixel, so for power-of-two resolutions rendering commutes bit-exactly with
// mirror_state/hflip whenever body x-coordinates mirror to representable
// doubles.
void render_frame(const WorldState& state, const RenderConfig& cfg,
                  std::uint8_t* out);

Video render_episode(const Episode& ep, const RenderConfig& cfg);

// Reflects positions across the vertical mid-plane of the bounds and negates
// x-velocities. The physics is mirror-symmetric, so simulating a mirrored
// state mirrors the trajectory.
WorldState mirror_state(const WorldState& state);

Video hflip(const Video& v);

}  // namespace physlaw::raster
