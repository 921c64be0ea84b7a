#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace physlaw {

// Error taxonomy mirrored by the CLI exit codes: usage errors exit 1,
// data errors (missing/corrupt files, bad configs, bad shapes) exit 2,
// numeric failures (non-finite values, violated invariants) exit 3.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb8&) const = default;
};

// Largest per-channel distance; the track parser matches pixels to palette
// entries with this metric.
inline int max_channel_distance(Rgb8 a, Rgb8 b) {
  int dr = std::abs(int(a.r) - int(b.r));
  int dg = std::abs(int(a.g) - int(b.g));
  int db = std::abs(int(a.b) - int(b.b));
  return dr > dg ? (dr > db ? dr : db) : (dg > db ? dg : db);
}

}  // namespace physlaw
