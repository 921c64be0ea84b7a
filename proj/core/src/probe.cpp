#include "physlaw/probe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "physlaw/palette.hpp"

namespace physlaw::probe {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMatchDistance = 40;        // hard palette match, max-channel
constexpr double kAlphaFloor = 1.0 / 32;  // below this a pixel is background
constexpr double kMinShapePx = 2.5;  // smallest half extent with shape signal

struct PixelScale {
  double sx = 0.0, sy = 0.0;  // world units per pixel
};

PixelScale scale_of(const raster::Video& v, const FrameGeometry& geo) {
  if (v.width < 1 || v.height < 1 || v.frames < 1)
    throw DataError("probe needs a non-empty video");
  if (geo.world_max.x <= geo.world_min.x || geo.world_max.y <= geo.world_min.y)
    throw DataError("frame geometry needs a positive world rectangle");
  return {(geo.world_max.x - geo.world_min.x) / v.width,
          (geo.world_max.y - geo.world_min.y) / v.height};
}

// Coverage weights of one color over one frame. Pixels within the hard
// match distance always count at their blend coverage; beyond it a pixel
// counts only if it sits on the background-to-color blend line, which is
// what the anti-aliased skirt of an object looks like. Entries are 0 for
// background, other objects, and overlap seams.
std::vector<double> alpha_plane(const raster::Video& v, int t, Rgb8 color,
                                Rgb8 bg) {
  int span = max_channel_distance(bg, color);
  if (span == 0)
    throw DataError("palette color coincides with the background");
  std::vector<double> plane(size_t(v.height) * v.width, 0.0);
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x) {
      Rgb8 p{v.at(t, y, x, 0), v.at(t, y, x, 1), v.at(t, y, x, 2)};
      int dist = max_channel_distance(p, color);
      double alpha = 1.0 - double(dist) / span;
      if (dist <= kMatchDistance) {
        plane[size_t(y) * v.width + x] = std::max(alpha, kAlphaFloor);
        continue;
      }
      if (alpha < kAlphaFloor) continue;
      double rr = std::abs(p.r - (bg.r + alpha * (double(color.r) - bg.r)));
      double rg = std::abs(p.g - (bg.g + alpha * (double(color.g) - bg.g)));
      double rb = std::abs(p.b - (bg.b + alpha * (double(color.b) - bg.b)));
      if (std::max({rr, rg, rb}) <= kMatchDistance)
        plane[size_t(y) * v.width + x] = alpha;
    }
  return plane;
}

// Sum of gradient magnitudes of a coverage plane: the boundary length in
// pixels (coarea), sub-pixel accurate on anti-aliased edges.
double plane_perimeter(const std::vector<double>& plane, int h, int w) {
  auto at = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return plane[size_t(y) * w + x];
  };
  double total = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = 0.5 * (at(y, x + 1) - at(y, x - 1));
      double gy = 0.5 * (at(y + 1, x) - at(y - 1, x));
      total += std::sqrt(gx * gx + gy * gy);
    }
  return total;
}

// Fills interior holes: background connected to the frame border stays
// outside, the outermost soft layer keeps its coverage, everything else
// becomes solid. The filled outline is the object's outer boundary.
std::vector<double> fill_holes(const std::vector<double>& plane, int h,
                               int w) {
  std::vector<std::uint8_t> outside(plane.size(), 0);
  std::vector<int> stack;
  auto push = [&](int y, int x) {
    size_t i = size_t(y) * w + x;
    if (!outside[i] && plane[i] <= 0.0) {
      outside[i] = 1;
      stack.push_back(int(i));
    }
  };
  for (int x = 0; x < w; ++x) {
    push(0, x);
    push(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    push(y, 0);
    push(y, w - 1);
  }
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    int y = i / w, x = i % w;
    if (y > 0) push(y - 1, x);
    if (y + 1 < h) push(y + 1, x);
    if (x > 0) push(y, x - 1);
    if (x + 1 < w) push(y, x + 1);
  }
  std::vector<double> filled(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t i = size_t(y) * w + x;
      if (outside[i]) {
        filled[i] = 0.0;
        continue;
      }
      bool rim = (y > 0 && outside[i - w]) || (y + 1 < h && outside[i + w]) ||
                 (x > 0 && outside[i - 1]) || (x + 1 < w && outside[i + 1]);
      filled[i] = rim && plane[i] > 0.0 ? plane[i] : 1.0;
    }
  return filled;
}

// mass / (pi r^2) with r fitted from the hole-filled outline length.
double disk_fit_ratio(const std::vector<double>& plane, int h, int w) {
  std::vector<double> filled = fill_holes(plane, h, w);
  double per = plane_perimeter(filled, h, w);
  if (per <= 0.0) return 1.0;
  double mass = 0.0;
  for (double v : plane) mass += v;
  double r = per / (2.0 * kPi);
  return mass / (kPi * r * r);
}

Detection detect_one(const raster::Video& v, int t, Rgb8 color, Rgb8 bg,
                     const FrameGeometry& geo, const PixelScale& px) {
  std::vector<double> plane = alpha_plane(v, t, color, bg);
  int span = max_channel_distance(bg, color);
  double hard = 1.0 - double(kMatchDistance) / span;
  Detection d;
  double wsum = 0.0, wx = 0.0, wy = 0.0;
  int min_x = v.width, max_x = -1, min_y = v.height, max_y = -1;
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x) {
      double a = plane[size_t(y) * v.width + x];
      if (a <= 0.0) continue;
      wsum += a;
      wx += a * (x + 0.5);
      wy += a * (y + 0.5);
      if (a >= hard) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
  if (max_x < 0) return d;
  d.present = true;
  d.mass = wsum;
  d.center = {geo.world_min.x + (wx / wsum) * px.sx,
              geo.world_max.y - (wy / wsum) * px.sy};
  double ex = 0.5 * (max_x - min_x + 1);
  double ey = 0.5 * (max_y - min_y + 1);
  d.extent = std::max(ex * px.sx, ey * px.sy);
  d.clipped = min_x == 0 || min_y == 0 || max_x == v.width - 1 ||
              max_y == v.height - 1;
  if (!d.clipped && std::max(ex, ey) >= kMinShapePx)
    d.disk_ratio = disk_fit_ratio(plane, v.height, v.width);
  return d;
}

bool motion_axis_only(physim::ScenarioKind kind) {
  return kind == physim::ScenarioKind::uniform ||
         kind == physim::ScenarioKind::collision;
}

// First frame at or after which a sidecar velocity has changed: the contact
// happened inside the preceding interval. -1 when nothing ever changes.
int contact_frame_from_gt(const std::vector<datagen::FrameStates>& gt) {
  for (size_t t = 1; t < gt.size(); ++t) {
    size_t n = std::min(gt[t].size(), gt[t - 1].size());
    for (size_t i = 0; i < n; ++i) {
      if (std::abs(gt[t][i].vx - gt[t - 1][i].vx) > 1e-9 ||
          std::abs(gt[t][i].vy - gt[t - 1][i].vy) > 1e-9)
        return int(t);
    }
  }
  return -1;
}

// Parsed fallback: one frame past the closest approach of the two centers.
// The extra frame keeps a step that straddles the bounce out of the metric;
// head-on approach and separation both outrun centroid noise, so the
// minimum needs no hysteresis. -1 when no frame shows both centers.
int contact_frame_from_tracks(const TrackSet& ts) {
  if (ts.tracks.size() < 2) return -1;
  const auto& a = ts.tracks[0].frames;
  const auto& b = ts.tracks[1].frames;
  int best = -1;
  double best_d = 0.0;
  for (size_t t = 0; t < a.size(); ++t) {
    if (!a[t].present || !b[t].present) continue;
    double d = (a[t].center - b[t].center).norm();
    if (best < 0 || d < best_d) {
      best = int(t);
      best_d = d;
    }
  }
  return best < 0 ? -1 : best + 1;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Isoperimetric anchors, squared boundary length over area: a disk gives
// 4*pi, a square 16, and a ring with the 0.55 inner radius about 43 since
// its hole boundary counts.
constexpr double kBallIso = 4.0 * kPi;
constexpr double kSquareIso = 16.0;

double ring_iso() {
  double per = 2.0 * kPi * (1.0 + 0.55);
  double area = kPi * (1.0 - 0.55 * 0.55);
  return per * per / area;
}

}  // namespace

std::vector<Detection> detect_centers(const raster::Video& video, int t,
                                      const std::vector<Rgb8>& palette,
                                      Rgb8 background,
                                      const FrameGeometry& geo) {
  if (t < 0 || t >= video.frames)
    throw DataError("frame index " + std::to_string(t) +
                    " outside video with " + std::to_string(video.frames) +
                    " frames");
  PixelScale px = scale_of(video, geo);
  std::vector<Detection> out;
  out.reserve(palette.size());
  for (Rgb8 c : palette)
    out.push_back(detect_one(video, t, c, background, geo, px));
  return out;
}

TrackSet parse_tracks(const raster::Video& video,
                      const std::vector<Rgb8>& palette, Rgb8 background,
                      const FrameGeometry& geo) {
  PixelScale px = scale_of(video, geo);
  TrackSet ts;
  ts.geo = geo;
  ts.px_x = px.sx;
  ts.px_y = px.sy;
  ts.tracks.resize(palette.size());
  for (size_t i = 0; i < palette.size(); ++i) {
    ts.tracks[i].color = palette[i];
    ts.tracks[i].frames.reserve(size_t(video.frames));
  }
  for (int t = 0; t < video.frames; ++t)
    for (size_t i = 0; i < palette.size(); ++i)
      ts.tracks[i].frames.push_back(
          detect_one(video, t, palette[i], background, geo, px));
  return ts;
}

std::vector<Rgb8> fundamental_palette(physim::ScenarioKind kind) {
  switch (kind) {
    case physim::ScenarioKind::uniform:
    case physim::ScenarioKind::parabola:
      return {palette::kRed};
    case physim::ScenarioKind::collision:
      return {palette::kRed, palette::kBlue};
    default:
      throw DataError(
          "only the fundamental scenarios have a fixed object palette");
  }
}

std::vector<bool> valid_frames(const TrackSet& tracks,
                               physim::ScenarioKind kind,
                               const std::vector<datagen::FrameStates>* gt) {
  int n = tracks.frame_count();
  std::vector<bool> mask(size_t(n), true);
  for (const Track& tr : tracks.tracks)
    for (int t = 0; t < n; ++t)
      if (!tr.frames[t].present || tr.frames[t].clipped)
        mask[size_t(t)] = false;
  if (kind == physim::ScenarioKind::collision) {
    int contact = gt && !gt->empty() ? contact_frame_from_gt(*gt)
                                     : contact_frame_from_tracks(tracks);
    if (contact < 0) contact = n - 1;
    for (int t = 0; t <= contact && t < n; ++t) mask[size_t(t)] = false;
  }
  return mask;
}

ErrorReport velocity_error(const TrackSet& tracks,
                           const std::vector<datagen::FrameStates>& gt,
                           physim::ScenarioKind kind,
                           const std::vector<bool>& mask) {
  ErrorReport rep;
  int frames = tracks.frame_count();
  rep.objects = int(tracks.tracks.size());
  if (rep.objects == 0) return rep;
  if (int(gt.size()) != frames)
    throw DataError("ground truth has " + std::to_string(gt.size()) +
                    " frames, video parse has " + std::to_string(frames));
  if (int(mask.size()) != frames)
    throw DataError("validity mask length does not match the frame count");
  for (const auto& fs : gt)
    if (int(fs.size()) != rep.objects)
      throw DataError("ground truth tracks " + std::to_string(fs.size()) +
                      " objects, palette has " + std::to_string(rep.objects));
  bool axis_only = motion_axis_only(kind);
  double total = 0.0;
  int counted = 0;
  double inv_dt = 1.0 / tracks.geo.dt;
  for (int t = 0; t + 1 < frames; ++t) {
    if (!mask[size_t(t)] || !mask[size_t(t) + 1]) continue;
    ++counted;
    for (int i = 0; i < rep.objects; ++i) {
      const Detection& d0 = tracks.tracks[size_t(i)].frames[size_t(t)];
      const Detection& d1 = tracks.tracks[size_t(i)].frames[size_t(t) + 1];
      const datagen::ObjectState& g0 = gt[size_t(t)][size_t(i)];
      const datagen::ObjectState& g1 = gt[size_t(t) + 1][size_t(i)];
      double dvx = (d1.center.x - d0.center.x - (g1.x - g0.x)) * inv_dt;
      double dvy = (d1.center.y - d0.center.y - (g1.y - g0.y)) * inv_dt;
      total += axis_only ? std::abs(dvx) : std::abs(dvx) + std::abs(dvy);
    }
  }
  rep.metric_frames = counted;
  if (counted > 0) {
    rep.e = total / (double(rep.objects) * counted);
    rep.has_value = true;
  }
  return rep;
}

SplitSummary summarize(const std::vector<ErrorReport>& reports) {
  SplitSummary s;
  std::vector<double> es;
  for (const ErrorReport& r : reports) {
    if (r.has_value)
      es.push_back(r.e);
    else
      ++s.skipped;
  }
  s.counted = int(es.size());
  if (es.empty()) return s;
  s.has_value = true;
  double sum = 0.0;
  for (double e : es) sum += e;
  s.mean = sum / es.size();
  s.median = median_of(es);
  return s;
}

namespace {

void check_same_dims(const raster::Video& a, const raster::Video& b,
                     const char* op) {
  if (a.frames != b.frames || a.height != b.height || a.width != b.width)
    throw DataError(std::string(op) + " needs videos of identical dimensions");
  if (a.frames < 1)
    throw DataError(std::string(op) + " needs at least one frame");
}

constexpr int kWin = 11;

std::array<double, kWin> gaussian_window() {
  std::array<double, kWin> w{};
  double sigma = 1.5, sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - (kWin - 1) / 2.0;
    w[size_t(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[size_t(i)];
  }
  for (double& x : w) x /= sum;
  return w;
}

// Valid-mode separable convolution with the 11-tap window, rows then columns.
std::vector<double> conv_valid(const std::vector<double>& in, int h, int w,
                               const std::array<double, kWin>& k) {
  int wv = w - kWin + 1, hv = h - kWin + 1;
  std::vector<double> mid(size_t(h) * wv), out(size_t(hv) * wv);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i)
        acc += k[size_t(i)] * in[size_t(y) * w + x + i];
      mid[size_t(y) * wv + x] = acc;
    }
  for (int y = 0; y < hv; ++y)
    for (int x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i)
        acc += k[size_t(i)] * mid[size_t(y + i) * wv + x];
      out[size_t(y) * wv + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const raster::Video& a, const raster::Video& b) {
  check_same_dims(a, b, "ssim");
  if (a.height < kWin || a.width < kWin)
    throw DataError("ssim needs frames at least 11x11");
  static const std::array<double, kWin> win = gaussian_window();
  const double c1 = 6.5025, c2 = 58.5225;  // (K*255)^2 for K1 0.01, K2 0.03
  int h = a.height, w = a.width;
  size_t n = size_t(h) * w;
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  double frame_sum = 0.0;
  for (int t = 0; t < a.frames; ++t) {
    double chan_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          size_t i = size_t(y) * w + x;
          double va = a.at(t, y, x, c), vb = b.at(t, y, x, c);
          pa[i] = va;
          pb[i] = vb;
          paa[i] = va * va;
          pbb[i] = vb * vb;
          pab[i] = va * vb;
        }
      std::vector<double> ma = conv_valid(pa, h, w, win);
      std::vector<double> mb = conv_valid(pb, h, w, win);
      std::vector<double> maa = conv_valid(paa, h, w, win);
      std::vector<double> mbb = conv_valid(pbb, h, w, win);
      std::vector<double> mab = conv_valid(pab, h, w, win);
      double acc = 0.0;
      for (size_t i = 0; i < ma.size(); ++i) {
        double mu_a = ma[i], mu_b = mb[i];
        double va = maa[i] - mu_a * mu_a;
        double vb = mbb[i] - mu_b * mu_b;
        double cov = mab[i] - mu_a * mu_b;
        acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
      }
      chan_sum += acc / double(ma.size());
    }
    frame_sum += chan_sum / 3.0;
  }
  return frame_sum / a.frames;
}

double psnr(const raster::Video& a, const raster::Video& b) {
  check_same_dims(a, b, "psnr");
  const double cap = 99.0;
  double sum = 0.0;
  size_t per_frame = size_t(a.height) * a.width * 3;
  for (int t = 0; t < a.frames; ++t) {
    double mse = 0.0;
    size_t base = size_t(t) * per_frame;
    for (size_t i = 0; i < per_frame; ++i) {
      double d = double(a.rgb[base + i]) - double(b.rgb[base + i]);
      mse += d * d;
    }
    mse /= double(per_frame);
    double v =
        mse <= 0.0 ? cap : std::min(cap, 10.0 * std::log10(255.0 * 255.0 / mse));
    sum += v;
  }
  return sum / a.frames;
}

AnomalyFlags anomaly_check(const TrackSet& tracks, int condition_frames,
                           double max_speed) {
  int n = tracks.frame_count();
  if (condition_frames < 1 || condition_frames >= n)
    throw UsageError("condition frame count must be in [1, frames)");
  if (!(max_speed > 0.0))
    throw UsageError("anomaly check needs a positive speed scale");
  AnomalyFlags flags;
  double jump_limit = 4.0 * max_speed * tracks.geo.dt;
  for (const Track& tr : tracks.tracks) {
    double ref = 0.0;
    int ref_n = 0;
    for (int t = 0; t < condition_frames; ++t)
      if (tr.frames[size_t(t)].present && !tr.frames[size_t(t)].clipped) {
        ref += tr.frames[size_t(t)].mass;
        ++ref_n;
      }
    if (ref_n == 0) continue;  // never cleanly visible while conditioning
    ref /= ref_n;
    for (int t = 1; t < n; ++t) {
      const Detection& prev = tr.frames[size_t(t) - 1];
      const Detection& cur = tr.frames[size_t(t)];
      if (cur.present && prev.present && !cur.clipped && !prev.clipped &&
          (cur.center - prev.center).norm() > jump_limit)
        flags.teleport = true;
      if (t >= condition_frames && !cur.present && prev.present &&
          !prev.clipped)
        flags.persistence = true;  // vanished without reaching the border
    }
    for (int t = condition_frames; t < n; ++t) {
      const Detection& d = tr.frames[size_t(t)];
      if (!d.present || d.clipped) continue;
      if (d.mass < 0.6 * ref || d.mass > 1.4 * ref) flags.persistence = true;
    }
    for (int t = 0; t < n; ++t) {
      const Detection& d = tr.frames[size_t(t)];
      if (d.present && !d.clipped &&
          (d.disk_ratio < 0.6 || d.disk_ratio > 1.4))
        flags.shape = true;
    }
  }
  return flags;
}

const char* outcome_name(AttrOutcome o) {
  switch (o) {
    case AttrOutcome::kept_both:
      return "kept_both";
    case AttrOutcome::kept_a:
      return "kept_a";
    case AttrOutcome::kept_b:
      return "kept_b";
    default:
      return "kept_neither";
  }
}

AttributeJudgment classify_attribute_outcome(
    const raster::Video& video, int condition_frames, datagen::Attribute a,
    datagen::Attribute b, std::pair<int, int> condition_combo, bool alt_ring,
    Rgb8 background, const FrameGeometry& geo) {
  if (a == b) throw UsageError("attribute pair needs two distinct attributes");
  if (condition_frames < 1 || condition_frames >= video.frames)
    throw UsageError("condition frame count must be in [1, frames)");
  PixelScale px = scale_of(video, geo);
  std::vector<Rgb8> pal{palette::kRed, palette::kBlue};
  TrackSet ts = parse_tracks(video, pal, background, geo);

  double mass_red = 0.0, mass_blue = 0.0;
  for (int t = condition_frames; t < video.frames; ++t) {
    mass_red += ts.tracks[0].frames[size_t(t)].mass;
    mass_blue += ts.tracks[1].frames[size_t(t)].mass;
  }
  int color_val = -1;
  if (mass_red > 0.0 || mass_blue > 0.0)
    color_val = mass_red >= mass_blue ? 0 : 1;

  AttributeJudgment j;
  int shape_val = -1, size_val = -1, speed_val = -1;
  if (color_val >= 0) {
    const Track& obj = ts.tracks[size_t(color_val)];
    Rgb8 color = pal[size_t(color_val)];

    std::vector<double> isos, masses;
    for (int t = condition_frames; t < video.frames; ++t) {
      const Detection& d = obj.frames[size_t(t)];
      if (!d.present || d.clipped) continue;
      std::vector<double> plane = alpha_plane(video, t, color, background);
      double area = 0.0;
      for (double v : plane) area += v;
      if (area <= 0.0) continue;
      double per = plane_perimeter(plane, video.height, video.width);
      isos.push_back(per * per / area);
      masses.push_back(area);
    }
    if (!isos.empty()) {
      double iso = median_of(isos);
      double other = alt_ring ? ring_iso() : kSquareIso;
      shape_val = std::abs(iso - kBallIso) <= std::abs(iso - other) ? 0 : 1;

      // invert the measured shape's area law to a world-unit size
      double area = median_of(masses);
      double size_px;
      if (shape_val == 0)
        size_px = std::sqrt(area / kPi);
      else if (alt_ring)
        size_px = std::sqrt(area / (kPi * (1.0 - 0.55 * 0.55)));
      else
        size_px = 0.5 * std::sqrt(area);
      double size_world = size_px * px.sx;
      size_val =
          std::abs(size_world - 0.7) <= std::abs(size_world - 1.4) ? 0 : 1;
    }

    std::vector<double> speeds;
    for (int t = condition_frames; t + 1 < video.frames; ++t) {
      const Detection& d0 = obj.frames[size_t(t)];
      const Detection& d1 = obj.frames[size_t(t) + 1];
      if (!d0.present || !d1.present || d0.clipped || d1.clipped) continue;
      speeds.push_back((d1.center - d0.center).norm() / geo.dt);
    }
    if (!speeds.empty()) {
      double sp = median_of(speeds);
      speed_val = std::abs(sp - 1.0) <= std::abs(sp - 4.0) ? 0 : 1;
    }
  }

  auto measured = [&](datagen::Attribute attr) {
    switch (attr) {
      case datagen::Attribute::color:
        return color_val;
      case datagen::Attribute::shape:
        return shape_val;
      case datagen::Attribute::size:
        return size_val;
      default:
        return speed_val;
    }
  };
  j.measured_a = measured(a);
  j.measured_b = measured(b);
  bool kept_a = j.measured_a >= 0 && j.measured_a == condition_combo.first;
  bool kept_b = j.measured_b >= 0 && j.measured_b == condition_combo.second;
  j.outcome = kept_a
                  ? (kept_b ? AttrOutcome::kept_both : AttrOutcome::kept_a)
                  : (kept_b ? AttrOutcome::kept_b : AttrOutcome::kept_neither);
  return j;
}

}  // namespace physlaw::probe
