#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "physlaw/physim/world.hpp"
#include "physlaw/raster.hpp"

namespace physlaw::datagen {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
};

// In-distribution degree-of-freedom ranges shared by the fundamental
// scenarios: ball radius and speed magnitude.
Range id_radius();  // [0.7, 1.5]
Range id_speed();   // [1.0, 4.0]

// Out-of-distribution unions flanking the in-distribution band.
std::pair<Range, Range> ood_radius();  // [0.3, 0.6] and [1.5, 2.0]
std::pair<Range, Range> ood_speed();   // [0.0, 0.8] and [4.5, 6.0]

// Degrees of freedom per fundamental scenario, in canonical order:
// uniform/parabola (r, v); collision (r1, v1, r2, v2).
int scenario_dofs(physim::ScenarioKind kind);

// Uniform lattice over the product of `dims`. Each dimension takes m values,
// the smallest m with m^k >= n (an m=1 dimension collapses to its midpoint,
// otherwise an inclusive-endpoint linspace); n points are kept from the
// lexicographic enumeration by even striding. Deterministic.
std::vector<std::vector<double>> lattice_points(const std::vector<Range>& dims,
                                                int n);

// Training specs for a fundamental scenario: lattice_points over the ID
// ranges, one spec per point, position jitter keyed off (seed, index).
// Collision points whose closing speed is below 0.1 are dropped before
// striding so every spec builds.
std::vector<physim::ScenarioSpec> grid_sample(physim::ScenarioKind kind, int n,
                                              std::uint64_t seed, int frames);

// In-distribution eval specs: each dimension is refined to double density
// (2m-1 points, or 3 when m was 1), every training lattice point is removed
// by index parity, and n_eval survivors are kept by even striding. Disjoint
// from grid_sample(kind, n_train, ...) in DoF space by construction.
std::vector<physim::ScenarioSpec> id_eval_sample(physim::ScenarioKind kind,
                                                 int n_train, int n_eval,
                                                 std::uint64_t seed,
                                                 int frames);

// One out-of-distribution level: which canonical DoFs leave the ID band.
struct OodLevel {
  std::string name;
  std::vector<bool> ood_dim;  // aligned with the canonical DoF order
};

// Collision: r1; v1; r1&r2; v1&v2; r1&v1; all four. Uniform/parabola:
// r; v; r&v.
std::vector<OodLevel> ood_levels(physim::ScenarioKind kind);

// Eval specs for one OOD level: flagged dimensions draw their lattice values
// from the two-interval OOD union (low interval gets ceil(m/2) of the m
// values), the rest stay on the ID range.
std::vector<physim::ScenarioSpec> ood_sample(physim::ScenarioKind kind,
                                             const OodLevel& level, int n,
                                             std::uint64_t seed, int frames);

// Specs whose speed DoFs draw only from `kept` (a union of sub-ranges of the
// ID speed range) while radius DoFs cover the full ID range. kept = {[1,4]}
// reproduces grid_sample exactly. The eval companion draws speeds from the
// complementary open gaps instead.
std::vector<physim::ScenarioSpec> gap_sample(physim::ScenarioKind kind,
                                             const std::vector<Range>& kept,
                                             int n, std::uint64_t seed,
                                             int frames);
std::vector<physim::ScenarioSpec> gap_eval_sample(
    physim::ScenarioKind kind, const std::vector<Range>& kept, int n,
    std::uint64_t seed, int frames);

// Attribute-pair splits: two binary attributes, two value combinations seen
// in training and the two swapped combinations held out. Values: color
// {red, blue}; shape {ball, square} (or {ball, ring} when alt_ring); size
// {0.7, 1.4}; velocity {1.0, 4.0}. Unpaired attributes sit at red / ball /
// 1.0 / 2.0.
enum class Attribute { color, shape, size, velocity };

struct AttributePairSplit {
  std::vector<physim::ScenarioSpec> train;  // combos (0,0) and (1,1)
  std::vector<physim::ScenarioSpec> test;   // combos (0,1) and (1,0)
  // attribute values per spec, same order as train then test
  std::vector<std::pair<int, int>> train_combo, test_combo;
};

AttributePairSplit attribute_pair_dataset(Attribute a, Attribute b,
                                          int n_per_combo, std::uint64_t seed,
                                          int frames, bool alt_ring = false);

// Shuffles the 70 four-of-eight templates with the seed and deals the first
// n_train to training, the next n_test to test. Disjoint, deterministic.
struct TemplateSplit {
  std::vector<int> train;
  std::vector<int> test;
};
TemplateSplit template_split(int n_train, int n_test, std::uint64_t seed);

// Six template ids that jointly exercise all 28 unordered object-type pairs
// (the covering number of 4-subsets of an 8-set).
std::vector<int> minimal_cover_templates();

// Combinatorial specs: episodes_per cycles through the given template ids.
std::vector<physim::ScenarioSpec> combinatorial_sample(
    const std::vector<int>& template_ids, int episodes_per, std::uint64_t seed,
    int frames);

// Composition specs. Training halves alternate single-event episodes (even
// index: event A, odd: event B); the test split activates both events.
// Spatial: A = ball bouncing on the floor, B = square translating.
// Temporal: A = two-ball collision, B = wall bounce; both-event points are
// pre-filtered so the outgoing ball can reach the wall inside the clip.
std::vector<physim::ScenarioSpec> composition_sample(physim::ScenarioKind kind,
                                                     bool test_split, int n,
                                                     std::uint64_t seed,
                                                     int frames);

// Manifest names for scenario kinds ("uniform", ..., "composition-temporal").
std::string scenario_name(physim::ScenarioKind kind);
physim::ScenarioKind scenario_from_name(const std::string& name);

// --- on-disk container ---

// Raw video container: "PHYV" magic, then little-endian u16 version, u16
// frames/height/width/channels, u32 CRC-32 of the payload, then the payload
// bytes frame-major (t, y, x, channel). Errors are DataError with distinct
// "phyv magic/version/truncated/checksum" prefixes.
void write_phyv(const std::string& path, const raster::Video& video);
raster::Video read_phyv(const std::string& path);

// CRC-32 (IEEE 802.3) of a byte span; the container checksum.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

// One manifest row. `params` are the lattice coordinates in canonical DoF
// order (empty for template scenes); `tags` carry split bookkeeping such as
// the event half or attribute combo.
struct EpisodeRecord {
  int id = 0;
  std::uint64_t seed = 0;
  std::vector<double> params;
  int template_id = -1;
  std::string video_file;
  std::string states_file;
  std::vector<std::string> tags;
};

struct DatasetManifest {
  int version = 1;
  std::string scenario;
  std::string split;
  int resolution = 32;
  int frames = 32;
  double dt = 0.1;
  bool flip_augment = false;
  std::uint64_t seed = 0;
  Rgb8 background{0, 0, 0};
  std::vector<EpisodeRecord> episodes;
};

// What the states sidecar stores per object per frame. r is the circle or
// ring outer radius, or the larger half extent of a box.
struct ObjectState {
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0, r = 0.0;
};
using FrameStates = std::vector<ObjectState>;

// Simulates, renders, and writes every spec under `dir`: videos/ep_NNNNN.phyv,
// states/ep_NNNNN.jsonl (one JSON line per frame, per-object x, y, vx, vy, r
// doubles), and manifest.json. Episodes simulate in parallel; each file has a
// single writer. Returns the manifest it wrote.
DatasetManifest write_dataset(const std::vector<physim::ScenarioSpec>& specs,
                              const std::string& dir, const std::string& split,
                              int resolution, std::uint64_t seed,
                              bool flip_augment);

// Opens a dataset directory: parses the manifest, checks ids are unique and
// every referenced file exists, and validates each video header. Payloads
// load lazily.
class Dataset {
 public:
  explicit Dataset(const std::string& dir);

  const DatasetManifest& manifest() const { return manifest_; }
  int size() const { return static_cast<int>(manifest_.episodes.size()); }
  // Flip-augmented datasets expose 2x size; example i >= size() is the
  // horizontal mirror of episode i - size().
  int num_examples() const;

  // Video bytes, mirrored when `flipped`. Mirroring is exact: flipped pixels
  // are the row-reversed originals.
  raster::Video load_video(int index, bool flipped = false) const;
  // Frame states, mirrored across the arena mid-plane when `flipped`.
  std::vector<FrameStates> load_states(int index, bool flipped = false) const;

 private:
  std::string dir_;
  DatasetManifest manifest_;
};

}  // namespace physlaw::datagen
