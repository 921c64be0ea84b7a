#pragma once

#include <utility>
#include <vector>

#include "physlaw/common.hpp"
#include "physlaw/datagen.hpp"
#include "physlaw/physim/world.hpp"
#include "physlaw/raster.hpp"

namespace physlaw::probe {

// How pixels map to world coordinates: the world rectangle fills the frame,
// world y-up renders to image y-down, pixel (j, i) is sampled at its center.
struct FrameGeometry {
  Vec2 world_min{0.0, 0.0};
  Vec2 world_max{10.0, 10.0};
  double dt = 0.1;
};

// One palette color's parse result for a single frame. Pixels match a color
// when their max-channel distance is at most 40; the center and mass weight
// each pixel in the wider background-blend band by its estimated coverage,
// which recovers sub-pixel position from the anti-aliased edge. `extent` is
// the half size of the matched bounding box; `clipped` means that box touches
// the frame border, so part of the object may be out of view.
struct Detection {
  bool present = false;
  Vec2 center{};        // world units
  double mass = 0.0;    // coverage-weighted pixel count
  double extent = 0.0;  // world units
  bool clipped = false;
  // mass over the area of a disk fitted to the hole-filled outline: 1 for a
  // disk, pi/4 for a square, 1 - 0.55^2 for a ring; low for smears and
  // fragments. 1.0 when the object is too small, clipped, or absent.
  double disk_ratio = 1.0;
};

std::vector<Detection> detect_centers(const raster::Video& video, int t,
                                      const std::vector<Rgb8>& palette,
                                      Rgb8 background = {0, 0, 0},
                                      const FrameGeometry& geo = {});

struct Track {
  Rgb8 color{};
  std::vector<Detection> frames;
};

// Per-color tracks over a whole video, in palette order.
struct TrackSet {
  std::vector<Track> tracks;
  FrameGeometry geo{};
  // World units per pixel of the parsed video, default 32 px over 10 units.
  double px_x = 0.3125;
  double px_y = 0.3125;

  int frame_count() const {
    return tracks.empty() ? 0 : int(tracks[0].frames.size());
  }
};

TrackSet parse_tracks(const raster::Video& video,
                      const std::vector<Rgb8>& palette,
                      Rgb8 background = {0, 0, 0},
                      const FrameGeometry& geo = {});

// Object colors of the fundamental scenarios, in body order.
std::vector<Rgb8> fundamental_palette(physim::ScenarioKind kind);

// mask[t] is true when every track is present with its fitted box fully
// inside the frame. For collision scenarios, frames up to and including
// first contact are additionally cleared; contact comes from the ground
// truth sidecar when given, otherwise one frame past the parsed centers'
// closest approach (the extra frame keeps a step that straddles the bounce
// out of the metric, at the cost of at most one clean frame).
std::vector<bool> valid_frames(
    const TrackSet& tracks, physim::ScenarioKind kind,
    const std::vector<datagen::FrameStates>* gt = nullptr);

// Velocity metric for one video. Absent (has_value false) when no frame
// pair survives the validity mask.
struct ErrorReport {
  double e = 0.0;
  bool has_value = false;
  int objects = 0;
  int metric_frames = 0;  // velocity samples per object
};

// Mean absolute deviation between parsed and ground-truth velocities over
// frames t with mask[t] and mask[t+1], averaged over objects and frames.
// Both velocities are forward differences of positions over dt. Uniform and
// collision scenarios compare the x component only (the motion axis);
// everything else compares the full vector by its L1 norm.
ErrorReport velocity_error(const TrackSet& tracks,
                           const std::vector<datagen::FrameStates>& gt,
                           physim::ScenarioKind kind,
                           const std::vector<bool>& mask);

// Split aggregate. Reports lacking a value are counted as skipped.
struct SplitSummary {
  bool has_value = false;
  double mean = 0.0;
  double median = 0.0;
  int counted = 0;
  int skipped = 0;
};

SplitSummary summarize(const std::vector<ErrorReport>& reports);

// Mean SSIM over frames: 11x11 Gaussian windows (sigma 1.5) at valid
// positions, K1 = 0.01, K2 = 0.03, dynamic range 255, channels averaged.
// Frames must be at least 11x11.
double ssim(const raster::Video& a, const raster::Video& b);

// Mean over frames of 10*log10(255^2 / frame MSE), capped at 99 dB.
double psnr(const raster::Video& a, const raster::Video& b);

// Rule-based plausibility flags for a generated video, judged against its
// conditioning frames. Judges one object per palette color; scenes that
// paint several objects with one color can trip teleport and shape on
// legitimate motion, so callers keep only the persistence flag there.
//   persistence: a color's mass leaves [0.6, 1.4] of its conditioning mass
//     while fully in view, or the object vanishes without reaching the border
//   teleport: a center jumps farther than 4 * max_speed * dt between
//     consecutive fully visible frames
//   shape: mass over fitted-disk area leaves [0.6, 1.4] for an object at
//     least 2.5 px across (smaller ones carry no shape signal)
struct AnomalyFlags {
  bool persistence = false;
  bool teleport = false;
  bool shape = false;

  bool any() const { return persistence || teleport || shape; }
};

AnomalyFlags anomaly_check(const TrackSet& tracks, int condition_frames,
                           double max_speed);

// Which of the two paired attribute values a generated video kept, measured
// on the frames after the conditioning prefix.
enum class AttrOutcome { kept_both, kept_a, kept_b, kept_neither };

const char* outcome_name(AttrOutcome o);

struct AttributeJudgment {
  AttrOutcome outcome = AttrOutcome::kept_neither;
  // Measured binary value per attribute (0 or 1), -1 when unmeasurable.
  int measured_a = -1;
  int measured_b = -1;
};

// Measures the dominant object's color (red vs blue), shape (isoperimetric
// ratio of squared perimeter to area), size (mass inverted through the
// measured shape's area law), and speed (parsed displacement per frame), then
// compares each paired attribute with the conditioned combination.
AttributeJudgment classify_attribute_outcome(
    const raster::Video& video, int condition_frames, datagen::Attribute a,
    datagen::Attribute b, std::pair<int, int> condition_combo,
    bool alt_ring = false, Rgb8 background = {0, 0, 0},
    const FrameGeometry& geo = {});

}  // namespace physlaw::probe
