#include <algorithm>
#include <cmath>
#include <string>

#include "physlaw/raster.hpp"

namespace physlaw::raster {
namespace {

using physim::Body;
using physim::ShapeKind;

struct Extent {
  double xlo, xhi, ylo, yhi;
};

// Slack absorbs the subtraction rounding so the box gate never rejects a
// body one of whose samples would hit.
constexpr double kGateSlack = 1e-9;

Extent body_extent(const Body& b) {
  double ex = b.shape == ShapeKind::box ? b.half_extent.x : b.radius;
  double ey = b.shape == ShapeKind::box ? b.half_extent.y : b.radius;
  return {b.position.x - ex - kGateSlack, b.position.x + ex + kGateSlack,
          b.position.y - ey - kGateSlack, b.position.y + ey + kGateSlack};
}

bool sample_hit(const Body& b, double wx, double wy) {
  double dx = wx - b.position.x;
  double dy = wy - b.position.y;
  switch (b.shape) {
    case ShapeKind::box:
      return std::abs(dx) <= b.half_extent.x && std::abs(dy) <= b.half_extent.y;
    case ShapeKind::ring: {
      double d2 = dx * dx + dy * dy;
      return d2 >= b.inner_radius * b.inner_radius && d2 <= b.radius * b.radius;
    }
    default:
      return dx * dx + dy * dy <= b.radius * b.radius;
  }
}

}  // namespace

void render_frame(const WorldState& state, const RenderConfig& cfg,
                  std::uint8_t* out) {
  if (cfg.resolution < 1 || cfg.supersample < 1)
    throw DataError("render config needs positive resolution and supersample");
  const int res = cfg.resolution;
  const int ss = cfg.supersample;
  const double sx = (state.bounds_max.x - state.bounds_min.x) / res;
  const double sy = (state.bounds_max.y - state.bounds_min.y) / res;

  const int n = int(state.bodies.size());
  std::vector<Extent> ext(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) ext[size_t(k)] = body_extent(state.bodies[k]);

  std::vector<int> cand;
  const int half = ss * ss / 2;
  for (int i = 0; i < res; ++i) {
    double py_hi = state.bounds_max.y - i * sy;
    double py_lo = state.bounds_max.y - (i + 1) * sy;
    for (int j = 0; j < res; ++j) {
      double px_lo = state.bounds_min.x + j * sx;
      double px_hi = state.bounds_min.x + (j + 1) * sx;
      cand.clear();
      for (int k = 0; k < n; ++k)
        if (ext[size_t(k)].xlo <= px_hi && ext[size_t(k)].xhi >= px_lo &&
            ext[size_t(k)].ylo <= py_hi && ext[size_t(k)].yhi >= py_lo)
          cand.push_back(k);

      std::uint8_t* px = out + (std::size_t(i) * res + j) * 3;
      if (cand.empty()) {
        px[0] = cfg.background.r;
        px[1] = cfg.background.g;
        px[2] = cfg.background.b;
        continue;
      }
      int acc[3] = {0, 0, 0};
      for (int oy = 0; oy < ss; ++oy) {
        double wy =
            state.bounds_max.y - (i + (oy + 0.5) / ss) * sy;
        for (int ox = 0; ox < ss; ++ox) {
          double wx = state.bounds_min.x + (j + (ox + 0.5) / ss) * sx;
          Rgb8 c = cfg.background;
          for (int t = int(cand.size()) - 1; t >= 0; --t) {
            const Body& b = state.bodies[size_t(cand[size_t(t)])];
            if (sample_hit(b, wx, wy)) {
              c = b.color;
              break;
            }
          }
          acc[0] += c.r;
          acc[1] += c.g;
          acc[2] += c.b;
        }
      }
      px[0] = std::uint8_t((acc[0] + half) / (ss * ss));
      px[1] = std::uint8_t((acc[1] + half) / (ss * ss));
      px[2] = std::uint8_t((acc[2] + half) / (ss * ss));
    }
  }
}

Video render_episode(const Episode& ep, const RenderConfig& cfg) {
  Video v;
  v.frames = int(ep.frames.size());
  v.height = v.width = cfg.resolution;
  v.rgb.resize(std::size_t(v.frames) * v.height * v.width * 3);
  for (int t = 0; t < v.frames; ++t)
    render_frame(ep.frames[size_t(t)], cfg, v.rgb.data() + v.index(t, 0, 0, 0));
  return v;
}

WorldState mirror_state(const WorldState& state) {
  WorldState m = state;
  double pivot = state.bounds_min.x + state.bounds_max.x;
  for (Body& b : m.bodies) {
    b.position.x = pivot - b.position.x;
    b.velocity.x = -b.velocity.x;
  }
  return m;
}

Video hflip(const Video& v) {
  Video f = v;
  for (int t = 0; t < v.frames; ++t)
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x)
        for (int c = 0; c < 3; ++c)
          f.rgb[f.index(t, y, x, c)] = v.at(t, y, v.width - 1 - x, c);
  return f;
}

}  // namespace physlaw::raster
