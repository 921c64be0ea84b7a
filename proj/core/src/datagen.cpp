#include "physlaw/datagen.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "physlaw/numkit/rng.hpp"
#include "physlaw/numkit/threading.hpp"
#include "physlaw/palette.hpp"
#include "physlaw/physim/sim.hpp"

namespace fs = std::filesystem;

namespace physlaw::datagen {
namespace {

using json = nlohmann::ordered_json;
using numkit::Rng;
using physim::ObjectSpec;
using physim::ScenarioKind;
using physim::ScenarioSpec;
using physim::VisualShape;

// The arena is fixed at [0,10]^2 everywhere in this project; mirrored states
// reflect across x = 5.
constexpr double kArenaSpan = 10.0;

// Seed salts so specs from different split builders never collide.
constexpr std::uint64_t kSaltGrid = 0x6772696446u;
constexpr std::uint64_t kSaltIdEval = 0x6964657661u;
constexpr std::uint64_t kSaltOod = 0x6f6f646c76u;
constexpr std::uint64_t kSaltGapEval = 0x6761706576u;
constexpr std::uint64_t kSaltAttr = 0x6174747270u;
constexpr std::uint64_t kSaltComb = 0x636f6d6269u;
constexpr std::uint64_t kSaltComp = 0x636f6d7073u;
constexpr std::uint64_t kSaltSplit = 0x74706c7370u;

std::vector<double> linspace_values(Range r, int m) {
  std::vector<double> v;
  if (m <= 0) return v;
  if (m == 1) {
    v.push_back(0.5 * (r.lo + r.hi));
    return v;
  }
  v.reserve(m);
  for (int i = 0; i < m; ++i)
    v.push_back(r.lo + (r.hi - r.lo) * i / (m - 1));
  return v;
}

// m values across disjoint sub-ranges, earlier ranges absorbing the
// remainder. Single range degenerates to linspace_values.
std::vector<double> union_values(const std::vector<Range>& rs, int m) {
  std::vector<double> v;
  int q = static_cast<int>(rs.size());
  int base = m / q, rem = m % q;
  for (int i = 0; i < q; ++i) {
    std::vector<double> part = linspace_values(rs[i], base + (i < rem ? 1 : 0));
    v.insert(v.end(), part.begin(), part.end());
  }
  return v;
}

// Values strictly inside (r.lo, r.hi); used by gap eval so boundary values
// shared with the kept ranges never appear.
std::vector<double> open_linspace_values(Range r, int m) {
  std::vector<double> v;
  v.reserve(std::max(m, 0));
  for (int i = 0; i < m; ++i)
    v.push_back(r.lo + (r.hi - r.lo) * (i + 1) / (m + 1));
  return v;
}

std::vector<double> open_union_values(const std::vector<Range>& rs, int m) {
  std::vector<double> v;
  int q = static_cast<int>(rs.size());
  int base = m / q, rem = m % q;
  for (int i = 0; i < q; ++i) {
    std::vector<double> part =
        open_linspace_values(rs[i], base + (i < rem ? 1 : 0));
    v.insert(v.end(), part.begin(), part.end());
  }
  return v;
}

using Pred = std::function<bool(const std::vector<double>&)>;

std::int64_t capacity_of(const std::vector<std::vector<double>>& values) {
  std::int64_t cap = 1;
  for (const auto& v : values) {
    if (v.empty()) return 0;
    cap *= static_cast<std::int64_t>(v.size());
  }
  return cap;
}

void decode_point(const std::vector<std::vector<double>>& values,
                  std::int64_t idx, std::vector<std::size_t>& digits,
                  std::vector<double>& point) {
  int k = static_cast<int>(values.size());
  for (int d = k - 1; d >= 0; --d) {
    auto sz = static_cast<std::int64_t>(values[d].size());
    digits[d] = static_cast<std::size_t>(idx % sz);
    point[d] = values[d][digits[d]];
    idx /= sz;
  }
}

// Keeps n of the lattice points that pass pred (and are not skipped), in
// lexicographic order with even striding. Empty result means not enough
// survivors.
std::vector<std::vector<double>> stride_lattice(
    const std::vector<std::vector<double>>& values, int n, const Pred& pred,
    const std::function<bool(const std::vector<std::size_t>&)>& skip) {
  std::int64_t cap = capacity_of(values);
  int k = static_cast<int>(values.size());
  std::vector<std::size_t> digits(k);
  std::vector<double> point(k);
  std::vector<std::int64_t> viable;
  for (std::int64_t idx = 0; idx < cap; ++idx) {
    decode_point(values, idx, digits, point);
    if (skip && skip(digits)) continue;
    if (pred && !pred(point)) continue;
    viable.push_back(idx);
  }
  std::vector<std::vector<double>> out;
  auto vn = static_cast<std::int64_t>(viable.size());
  if (vn < n) return out;
  out.reserve(n);
  for (std::int64_t j = 0; j < n; ++j) {
    decode_point(values, viable[j * vn / n], digits, point);
    out.push_back(point);
  }
  return out;
}

// Grows the per-dimension resolution until at least n lattice points satisfy
// pred, then strides down to exactly n. Returns the resolution it settled on.
std::vector<std::vector<double>> grown_lattice(
    const std::function<std::vector<std::vector<double>>(int)>& make_values,
    int k, int n, const Pred& pred, int* m_out = nullptr) {
  if (n < 1) throw DataError("lattice sample needs n >= 1");
  int m = 1;
  while (std::pow(double(m), k) < double(n)) ++m;
  for (;; ++m) {
    std::vector<std::vector<double>> values = make_values(m);
    if (capacity_of(values) > (std::int64_t(1) << 24))
      throw DataError(
          "lattice refinement exceeded 16M candidate points; the filter "
          "rejects too much of the requested range");
    std::vector<std::vector<double>> pts = stride_lattice(values, n, pred, {});
    if (!pts.empty()) {
      if (m_out) *m_out = m;
      return pts;
    }
  }
}

std::vector<Range> id_dims(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::uniform:
    case ScenarioKind::parabola:
      return {id_radius(), id_speed()};
    case ScenarioKind::collision:
      return {id_radius(), id_speed(), id_radius(), id_speed()};
    default:
      throw DataError("grid sampling covers only the fundamental scenarios");
  }
}

// Head-on pairs with nearly zero closing speed never reach contact inside a
// clip; drop those lattice points before striding.
Pred closing_pred(ScenarioKind kind) {
  if (kind != ScenarioKind::collision) return {};
  return [](const std::vector<double>& p) { return p[1] + p[3] >= 0.1; };
}

ObjectSpec make_object(VisualShape shape, Rgb8 color, double size,
                       double speed) {
  ObjectSpec o;
  o.shape = shape;
  o.color = color;
  o.size = size;
  o.speed = speed;
  return o;
}

ScenarioSpec make_fundamental_spec(ScenarioKind kind,
                                   const std::vector<double>& p,
                                   std::uint64_t seed, int frames) {
  ScenarioSpec s;
  s.kind = kind;
  s.frames = frames;
  s.seed = seed;
  if (kind == ScenarioKind::collision) {
    s.objects = {make_object(VisualShape::ball, palette::kRed, p[0], p[1]),
                 make_object(VisualShape::ball, palette::kBlue, p[2], p[3])};
  } else {
    s.objects = {make_object(VisualShape::ball, palette::kRed, p[0], p[1])};
  }
  return s;
}

std::vector<ScenarioSpec> specs_from_points(
    ScenarioKind kind, const std::vector<std::vector<double>>& pts,
    std::uint64_t seed, std::uint64_t salt, int frames) {
  std::vector<ScenarioSpec> specs;
  specs.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    specs.push_back(make_fundamental_spec(
        kind, pts[i], Rng::mix({seed, salt, std::uint64_t(i)}), frames));
  return specs;
}

void validate_kept_ranges(const std::vector<Range>& kept) {
  if (kept.empty()) throw DataError("gap split needs at least one kept range");
  Range dom = id_speed();
  double prev = dom.lo - 1.0;
  for (const Range& r : kept) {
    if (r.lo > r.hi || r.lo < dom.lo || r.hi > dom.hi)
      throw DataError("gap kept range outside the speed domain [1,4]");
    if (r.lo <= prev)
      throw DataError("gap kept ranges must be sorted and disjoint");
    prev = r.hi;
  }
}

std::vector<Range> gap_complement(const std::vector<Range>& kept) {
  Range dom = id_speed();
  std::vector<Range> gaps;
  double cursor = dom.lo;
  for (const Range& r : kept) {
    if (r.lo - cursor > 1e-12) gaps.push_back({cursor, r.lo});
    cursor = r.hi;
  }
  if (dom.hi - cursor > 1e-12) gaps.push_back({cursor, dom.hi});
  return gaps;
}

std::string shape_name(VisualShape s) {
  switch (s) {
    case VisualShape::ball:
      return "ball";
    case VisualShape::square:
      return "square";
    default:
      return "ring";
  }
}

std::string color_name(Rgb8 c) {
  if (c == palette::kRed) return "red";
  if (c == palette::kBlue) return "blue";
  if (c == palette::kGray) return "gray";
  if (c == palette::kGreen) return "green";
  if (c == palette::kYellow) return "yellow";
  char buf[24];
  std::snprintf(buf, sizeof buf, "rgb(%d,%d,%d)", c.r, c.g, c.b);
  return buf;
}

std::vector<double> spec_params(const ScenarioSpec& spec) {
  std::vector<double> p;
  for (const ObjectSpec& o : spec.objects) {
    p.push_back(o.size);
    p.push_back(o.speed);
  }
  return p;
}

std::vector<std::string> spec_tags(const ScenarioSpec& spec) {
  std::vector<std::string> tags;
  if (spec.kind == ScenarioKind::composition_spatial ||
      spec.kind == ScenarioKind::composition_temporal) {
    if (spec.event_a) tags.push_back("event-a");
    if (spec.event_b) tags.push_back("event-b");
  }
  if (spec.kind != ScenarioKind::combinatorial) {
    for (std::size_t i = 0; i < spec.objects.size(); ++i)
      tags.push_back("obj" + std::to_string(i) + ":" +
                     shape_name(spec.objects[i].shape) + ":" +
                     color_name(spec.objects[i].color));
  }
  return tags;
}

double body_size(const physim::Body& b) {
  if (b.shape == physim::ShapeKind::box)
    return std::max(b.half_extent.x, b.half_extent.y);
  return b.radius;
}

std::string episode_basename(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "ep_%05d", id);
  return buf;
}

std::string states_jsonl(const physim::Episode& ep) {
  std::string out;
  for (std::size_t t = 0; t < ep.frames.size(); ++t) {
    json line;
    line["t"] = t;
    json objs = json::array();
    for (const physim::Body& b : ep.frames[t].bodies) {
      json o;
      o["x"] = b.position.x;
      o["y"] = b.position.y;
      o["vx"] = b.velocity.x;
      o["vy"] = b.velocity.y;
      o["r"] = body_size(b);
      objs.push_back(std::move(o));
    }
    line["objects"] = std::move(objs);
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f.write(content.data(), std::streamsize(content.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return std::move(ss).str();
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u16(const std::string& b, std::size_t off) {
  return std::uint32_t(std::uint8_t(b[off])) |
         (std::uint32_t(std::uint8_t(b[off + 1])) << 8);
}

std::uint32_t get_u32(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(b[off + i]);
  return v;
}

constexpr std::size_t kPhyvHeaderSize = 18;
constexpr std::uint16_t kPhyvVersion = 1;

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "physlaw-dataset";
  j["version"] = m.version;
  j["scenario"] = m.scenario;
  j["split"] = m.split;
  j["resolution"] = m.resolution;
  j["frames"] = m.frames;
  j["dt"] = m.dt;
  j["flip_augment"] = m.flip_augment;
  j["seed"] = m.seed;
  j["background"] = {m.background.r, m.background.g, m.background.b};
  json eps = json::array();
  for (const EpisodeRecord& r : m.episodes) {
    json e;
    e["id"] = r.id;
    e["seed"] = r.seed;
    e["params"] = r.params;
    e["template_id"] = r.template_id;
    e["video"] = r.video_file;
    e["states"] = r.states_file;
    e["tags"] = r.tags;
    eps.push_back(std::move(e));
  }
  j["episodes"] = std::move(eps);
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "physlaw-dataset")
    throw DataError("not a physlaw dataset manifest");
  if (j.value("version", 0) != 1)
    throw DataError("unsupported dataset manifest version");
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.scenario = j.at("scenario").get<std::string>();
  m.split = j.at("split").get<std::string>();
  m.resolution = j.at("resolution").get<int>();
  m.frames = j.at("frames").get<int>();
  m.dt = j.at("dt").get<double>();
  m.flip_augment = j.at("flip_augment").get<bool>();
  m.seed = j.at("seed").get<std::uint64_t>();
  auto bg = j.at("background");
  m.background = {bg.at(0).get<std::uint8_t>(), bg.at(1).get<std::uint8_t>(),
                  bg.at(2).get<std::uint8_t>()};
  for (const json& e : j.at("episodes")) {
    EpisodeRecord r;
    r.id = e.at("id").get<int>();
    r.seed = e.at("seed").get<std::uint64_t>();
    r.params = e.at("params").get<std::vector<double>>();
    r.template_id = e.at("template_id").get<int>();
    r.video_file = e.at("video").get<std::string>();
    r.states_file = e.at("states").get<std::string>();
    r.tags = e.at("tags").get<std::vector<std::string>>();
    m.episodes.push_back(std::move(r));
  }
  return m;
}

}  // namespace

Range id_radius() { return {0.7, 1.5}; }
Range id_speed() { return {1.0, 4.0}; }
std::pair<Range, Range> ood_radius() { return {{0.3, 0.6}, {1.5, 2.0}}; }
std::pair<Range, Range> ood_speed() { return {{0.0, 0.8}, {4.5, 6.0}}; }

int scenario_dofs(ScenarioKind kind) {
  return kind == ScenarioKind::collision ? 4 : 2;
}

std::vector<std::vector<double>> lattice_points(const std::vector<Range>& dims,
                                                int n) {
  for (const Range& r : dims)
    if (!(r.lo < r.hi)) throw DataError("lattice dimension range degenerate");
  int k = static_cast<int>(dims.size());
  return grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (const Range& r : dims) values.push_back(linspace_values(r, m));
        return values;
      },
      k, n, {});
}

std::vector<ScenarioSpec> grid_sample(ScenarioKind kind, int n,
                                      std::uint64_t seed, int frames) {
  std::vector<Range> dims = id_dims(kind);
  int k = static_cast<int>(dims.size());
  std::vector<std::vector<double>> pts = grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (const Range& r : dims) values.push_back(linspace_values(r, m));
        return values;
      },
      k, n, closing_pred(kind));
  return specs_from_points(kind, pts, seed, kSaltGrid, frames);
}

std::vector<ScenarioSpec> id_eval_sample(ScenarioKind kind, int n_train,
                                         int n_eval, std::uint64_t seed,
                                         int frames) {
  std::vector<Range> dims = id_dims(kind);
  int k = static_cast<int>(dims.size());
  int m_train = 0;
  grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (const Range& r : dims) values.push_back(linspace_values(r, m));
        return values;
      },
      k, n_train, closing_pred(kind), &m_train);
  // Double the per-dimension density. The training values sit at even
  // refined indices (or index 1 of 3 when a dimension had collapsed to its
  // midpoint), so membership is an index-parity check, never a float
  // comparison.
  int refined = m_train == 1 ? 3 : 2 * m_train - 1;
  std::vector<std::vector<double>> values;
  for (const Range& r : dims) values.push_back(linspace_values(r, refined));
  auto is_train_digit = [m_train](std::size_t digit) {
    return m_train == 1 ? digit == 1 : digit % 2 == 0;
  };
  auto skip = [&](const std::vector<std::size_t>& digits) {
    for (std::size_t d : digits)
      if (!is_train_digit(d)) return false;
    return true;
  };
  std::vector<std::vector<double>> pts =
      stride_lattice(values, n_eval, closing_pred(kind), skip);
  if (pts.empty())
    throw DataError(
        "id eval grid too small for the requested count; lower n_eval or "
        "raise n_train");
  return specs_from_points(kind, pts, seed, kSaltIdEval, frames);
}

std::vector<OodLevel> ood_levels(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::uniform:
    case ScenarioKind::parabola:
      return {{"r", {true, false}},
              {"v", {false, true}},
              {"r-v", {true, true}}};
    case ScenarioKind::collision:
      return {{"r1", {true, false, false, false}},
              {"v1", {false, true, false, false}},
              {"r1-r2", {true, false, true, false}},
              {"v1-v2", {false, true, false, true}},
              {"r1-v1", {true, true, false, false}},
              {"all", {true, true, true, true}}};
    default:
      throw DataError("OOD levels cover only the fundamental scenarios");
  }
}

std::vector<ScenarioSpec> ood_sample(ScenarioKind kind, const OodLevel& level,
                                     int n, std::uint64_t seed, int frames) {
  std::vector<Range> dims = id_dims(kind);
  int k = static_cast<int>(dims.size());
  if (static_cast<int>(level.ood_dim.size()) != k)
    throw DataError("OOD level flag count does not match the scenario DoFs");
  bool any = false;
  for (bool f : level.ood_dim) any = any || f;
  if (!any) throw DataError("OOD level flags no dimension");
  auto [rlo, rhi] = ood_radius();
  auto [vlo, vhi] = ood_speed();
  // Even dims are radii, odd dims speeds, in every fundamental scenario.
  std::vector<std::vector<Range>> pools(k);
  for (int d = 0; d < k; ++d) {
    if (!level.ood_dim[d])
      pools[d] = {dims[d]};
    else
      pools[d] = d % 2 == 0 ? std::vector<Range>{rlo, rhi}
                            : std::vector<Range>{vlo, vhi};
  }
  std::vector<std::vector<double>> pts = grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (int d = 0; d < k; ++d)
          values.push_back(union_values(pools[d], m));
        return values;
      },
      k, n, closing_pred(kind));
  std::uint64_t level_salt = Rng::mix({kSaltOod, std::uint64_t(k)});
  for (std::size_t i = 0; i < level.ood_dim.size(); ++i)
    if (level.ood_dim[i]) level_salt = Rng::mix({level_salt, i});
  return specs_from_points(kind, pts, seed, level_salt, frames);
}

std::vector<ScenarioSpec> gap_sample(ScenarioKind kind,
                                     const std::vector<Range>& kept, int n,
                                     std::uint64_t seed, int frames) {
  validate_kept_ranges(kept);
  std::vector<Range> dims = id_dims(kind);
  int k = static_cast<int>(dims.size());
  std::vector<std::vector<double>> pts = grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (int d = 0; d < k; ++d)
          values.push_back(d % 2 == 1 ? union_values(kept, m)
                                      : linspace_values(dims[d], m));
        return values;
      },
      k, n, closing_pred(kind));
  // kept = {[1,4]} reproduces grid_sample exactly, salt included.
  return specs_from_points(kind, pts, seed, kSaltGrid, frames);
}

std::vector<ScenarioSpec> gap_eval_sample(ScenarioKind kind,
                                          const std::vector<Range>& kept,
                                          int n, std::uint64_t seed,
                                          int frames) {
  validate_kept_ranges(kept);
  std::vector<Range> gaps = gap_complement(kept);
  if (gaps.empty())
    throw DataError("gap eval needs a nonempty excluded speed band");
  std::vector<Range> dims = id_dims(kind);
  int k = static_cast<int>(dims.size());
  std::vector<std::vector<double>> pts = grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (int d = 0; d < k; ++d)
          values.push_back(d % 2 == 1 ? open_union_values(gaps, m)
                                      : linspace_values(dims[d], m));
        return values;
      },
      k, n, closing_pred(kind));
  return specs_from_points(kind, pts, seed, kSaltGapEval, frames);
}

AttributePairSplit attribute_pair_dataset(Attribute a, Attribute b,
                                          int n_per_combo, std::uint64_t seed,
                                          int frames, bool alt_ring) {
  if (a == b) throw DataError("attribute pair needs two distinct attributes");
  if (n_per_combo < 1) throw DataError("attribute pair needs n >= 1");
  auto apply = [alt_ring](Attribute attr, int value, ObjectSpec& o) {
    switch (attr) {
      case Attribute::color:
        o.color = value == 0 ? palette::kRed : palette::kBlue;
        return;
      case Attribute::shape:
        o.shape = value == 0 ? VisualShape::ball
                             : (alt_ring ? VisualShape::ring
                                         : VisualShape::square);
        return;
      case Attribute::size:
        o.size = value == 0 ? 0.7 : 1.4;
        return;
      case Attribute::velocity:
        o.speed = value == 0 ? 1.0 : 4.0;
        return;
    }
  };
  AttributePairSplit split;
  auto emit = [&](int va, int vb, bool train) {
    for (int i = 0; i < n_per_combo; ++i) {
      ObjectSpec o = make_object(VisualShape::ball, palette::kRed, 1.0, 2.0);
      apply(a, va, o);
      apply(b, vb, o);
      ScenarioSpec s;
      s.kind = ScenarioKind::uniform;
      s.frames = frames;
      s.objects = {o};
      s.seed = Rng::mix({seed, kSaltAttr, std::uint64_t(va * 2 + vb),
                         std::uint64_t(i)});
      (train ? split.train : split.test).push_back(std::move(s));
      (train ? split.train_combo : split.test_combo).emplace_back(va, vb);
    }
  };
  emit(0, 0, true);
  emit(1, 1, true);
  emit(0, 1, false);
  emit(1, 0, false);
  return split;
}

TemplateSplit template_split(int n_train, int n_test, std::uint64_t seed) {
  if (n_train < 0 || n_test < 0 || n_train + n_test > 70)
    throw DataError("template split must fit in the 70 templates");
  std::vector<int> ids(70);
  for (int i = 0; i < 70; ++i) ids[i] = i;
  Rng rng(Rng::mix({seed, kSaltSplit}));
  for (int i = 69; i > 0; --i)
    std::swap(ids[i], ids[rng.below(std::uint64_t(i) + 1)]);
  TemplateSplit split;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.test.assign(ids.begin() + n_train, ids.begin() + n_train + n_test);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<int> minimal_cover_templates() {
  // Six 4-subsets jointly hitting all 28 type pairs; 6 is the covering
  // number here (Schoenheim bound), so no smaller set works.
  const std::array<std::array<int, 4>, 6> sets = {{{0, 1, 2, 3},
                                                   {4, 5, 6, 7},
                                                   {0, 1, 4, 5},
                                                   {0, 1, 6, 7},
                                                   {2, 3, 4, 5},
                                                   {2, 3, 6, 7}}};
  std::vector<int> ids;
  for (const auto& want : sets) {
    for (int id = 0; id < 70; ++id) {
      if (physim::template_combo(id) == want) {
        ids.push_back(id);
        break;
      }
    }
  }
  return ids;
}

std::vector<ScenarioSpec> combinatorial_sample(
    const std::vector<int>& template_ids, int episodes_per, std::uint64_t seed,
    int frames) {
  if (template_ids.empty())
    throw DataError("combinatorial sample needs template ids");
  if (episodes_per < 1)
    throw DataError("combinatorial sample needs episodes_per >= 1");
  std::vector<ScenarioSpec> specs;
  specs.reserve(template_ids.size() * std::size_t(episodes_per));
  for (int e = 0; e < episodes_per; ++e) {
    for (int tid : template_ids) {
      ScenarioSpec s;
      s.kind = ScenarioKind::combinatorial;
      s.template_id = tid;
      s.frames = frames;
      s.seed = Rng::mix({seed, kSaltComb, std::uint64_t(tid),
                         std::uint64_t(e)});
      specs.push_back(std::move(s));
    }
  }
  return specs;
}

std::vector<ScenarioSpec> composition_sample(ScenarioKind kind,
                                             bool test_split, int n,
                                             std::uint64_t seed, int frames) {
  bool spatial = kind == ScenarioKind::composition_spatial;
  if (!spatial && kind != ScenarioKind::composition_temporal)
    throw DataError("composition sample needs a composition scenario");
  std::vector<Range> dims =
      spatial ? std::vector<Range>{{0.5, 0.9}, {1.5, 3.0}, {0.5, 0.9},
                                   {1.5, 3.0}}
              : std::vector<Range>{{0.5, 1.0}, {1.0, 2.0}, {0.5, 1.0},
                                   {1.0, 2.0}};
  auto spec_at = [&](const std::vector<double>& p, bool ea, bool eb,
                     std::uint64_t s) {
    ScenarioSpec spec;
    spec.kind = kind;
    spec.frames = frames;
    spec.event_a = ea;
    spec.event_b = eb;
    spec.seed = s;
    spec.objects = {
        make_object(VisualShape::ball, palette::kRed, p[0], p[1]),
        make_object(spatial ? VisualShape::square : VisualShape::ball,
                    palette::kBlue, p[2], p[3])};
    return spec;
  };
  // Temporal feasibility depends only on the DoFs (the builder caps its
  // contact-time draw up front), so one probe build settles a lattice point
  // for every seed.
  Pred pred;
  if (!spatial) {
    pred = [&](const std::vector<double>& p) {
      try {
        physim::world_from_spec(
            spec_at(p, true, test_split, Rng::mix({0})));
        return true;
      } catch (const DataError&) {
        return false;
      }
    };
  }
  std::vector<std::vector<double>> pts = grown_lattice(
      [&](int m) {
        std::vector<std::vector<double>> values;
        for (const Range& r : dims) values.push_back(linspace_values(r, m));
        return values;
      },
      4, n, pred);
  std::uint64_t salt =
      Rng::mix({kSaltComp, std::uint64_t(spatial), std::uint64_t(test_split)});
  std::vector<ScenarioSpec> specs;
  specs.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool ea = test_split || i % 2 == 0;
    bool eb = test_split || i % 2 == 1;
    specs.push_back(spec_at(pts[i], ea, eb,
                            Rng::mix({seed, salt, std::uint64_t(i)})));
  }
  return specs;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
  return static_cast<std::uint32_t>(::crc32_z(0UL, data, len));
}

void write_phyv(const std::string& path, const raster::Video& video) {
  auto fits = [](int v) { return v >= 1 && v <= 65535; };
  if (!fits(video.frames) || !fits(video.height) || !fits(video.width))
    throw DataError("phyv dimensions out of range: " + path);
  std::size_t expected = std::size_t(video.frames) * video.height *
                         video.width * 3;
  if (video.rgb.size() != expected)
    throw DataError("phyv payload size mismatch: " + path);
  std::string out;
  out.reserve(kPhyvHeaderSize + video.rgb.size());
  out += "PHYV";
  put_u16(out, kPhyvVersion);
  put_u16(out, std::uint16_t(video.frames));
  put_u16(out, std::uint16_t(video.height));
  put_u16(out, std::uint16_t(video.width));
  put_u16(out, 3);
  put_u32(out, crc32(video.rgb.data(), video.rgb.size()));
  out.append(reinterpret_cast<const char*>(video.rgb.data()),
             video.rgb.size());
  write_text_file(path, out);
}

raster::Video read_phyv(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (bytes.size() < kPhyvHeaderSize)
    throw DataError("phyv truncated: " + path);
  if (bytes.compare(0, 4, "PHYV") != 0)
    throw DataError("phyv magic mismatch: " + path);
  if (get_u16(bytes, 4) != kPhyvVersion)
    throw DataError("phyv version mismatch: " + path);
  std::uint32_t frames = get_u16(bytes, 6);
  std::uint32_t height = get_u16(bytes, 8);
  std::uint32_t width = get_u16(bytes, 10);
  if (get_u16(bytes, 12) != 3)
    throw DataError("phyv channel count unsupported: " + path);
  std::size_t payload = std::size_t(frames) * height * width * 3;
  if (bytes.size() != kPhyvHeaderSize + payload)
    throw DataError("phyv truncated: " + path);
  const auto* data =
      reinterpret_cast<const std::uint8_t*>(bytes.data()) + kPhyvHeaderSize;
  if (crc32(data, payload) != get_u32(bytes, 14))
    throw DataError("phyv checksum mismatch: " + path);
  raster::Video v;
  v.frames = int(frames);
  v.height = int(height);
  v.width = int(width);
  v.rgb.assign(data, data + payload);
  return v;
}

DatasetManifest write_dataset(const std::vector<ScenarioSpec>& specs,
                              const std::string& dir, const std::string& split,
                              int resolution, std::uint64_t seed,
                              bool flip_augment) {
  if (specs.empty()) throw DataError("write_dataset needs at least one spec");
  if (resolution < 1) throw DataError("write_dataset needs resolution >= 1");
  ScenarioKind kind = specs[0].kind;
  int frames = specs[0].frames;
  for (const ScenarioSpec& s : specs) {
    if (s.kind != kind)
      throw DataError("write_dataset specs mix scenario kinds");
    if (s.frames != frames)
      throw DataError("write_dataset specs mix frame counts");
    for (std::size_t i = 0; i < s.objects.size(); ++i)
      for (std::size_t j = i + 1; j < s.objects.size(); ++j)
        if (s.objects[i].color == s.objects[j].color)
          throw DataError(
              "two objects share a color; the track parser could not tell "
              "them apart");
  }
  raster::RenderConfig cfg;
  cfg.resolution = resolution;
  cfg.background = kind == ScenarioKind::combinatorial
                       ? palette::kCombBackground
                       : palette::kBackground;
  fs::path root(dir);
  fs::create_directories(root / "videos");
  fs::create_directories(root / "states");

  auto n = static_cast<std::int64_t>(specs.size());
  std::vector<std::string> errors(specs.size());
  numkit::parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      try {
        physim::Episode ep = physim::simulate_episode(specs[i]);
        raster::Video video = raster::render_episode(ep, cfg);
        std::string base = episode_basename(int(i));
        write_phyv((root / "videos" / (base + ".phyv")).string(), video);
        write_text_file(root / "states" / (base + ".jsonl"),
                        states_jsonl(ep));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw DataError("episode " + std::to_string(i) + ": " + errors[i]);

  DatasetManifest m;
  m.scenario = scenario_name(kind);
  m.split = split;
  m.resolution = resolution;
  m.frames = frames;
  m.dt = physim::WorldState{}.dt;
  m.flip_augment = flip_augment;
  m.seed = seed;
  m.background = cfg.background;
  m.episodes.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EpisodeRecord r;
    r.id = int(i);
    r.seed = specs[i].seed;
    r.params = spec_params(specs[i]);
    r.template_id = specs[i].template_id;
    std::string base = episode_basename(int(i));
    r.video_file = "videos/" + base + ".phyv";
    r.states_file = "states/" + base + ".jsonl";
    r.tags = spec_tags(specs[i]);
    m.episodes.push_back(std::move(r));
  }
  write_text_file(root / "manifest.json", manifest_to_json(m).dump(2) + "\n");
  return m;
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::uniform:
      return "uniform";
    case ScenarioKind::collision:
      return "collision";
    case ScenarioKind::parabola:
      return "parabola";
    case ScenarioKind::combinatorial:
      return "combinatorial";
    case ScenarioKind::composition_spatial:
      return "composition-spatial";
    default:
      return "composition-temporal";
  }
}

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "uniform") return ScenarioKind::uniform;
  if (name == "collision") return ScenarioKind::collision;
  if (name == "parabola") return ScenarioKind::parabola;
  if (name == "combinatorial") return ScenarioKind::combinatorial;
  if (name == "composition-spatial") return ScenarioKind::composition_spatial;
  if (name == "composition-temporal")
    return ScenarioKind::composition_temporal;
  throw DataError("unknown scenario: " + name);
}

Dataset::Dataset(const std::string& dir) : dir_(dir) {
  fs::path root(dir);
  fs::path mf = root / "manifest.json";
  if (!fs::exists(mf))
    throw DataError("dataset manifest missing: " + mf.string());
  json j;
  try {
    j = json::parse(read_file_bytes(mf));
  } catch (const json::exception& e) {
    throw DataError("dataset manifest unparseable: " + std::string(e.what()));
  }
  manifest_ = manifest_from_json(j);
  std::set<int> ids;
  for (const EpisodeRecord& r : manifest_.episodes) {
    if (!ids.insert(r.id).second)
      throw DataError("dataset episode ids not unique");
    fs::path vp = root / r.video_file;
    fs::path sp = root / r.states_file;
    if (!fs::exists(sp))
      throw DataError("dataset states sidecar missing: " + sp.string());
    std::ifstream f(vp, std::ios::binary);
    if (!f) throw DataError("dataset video missing: " + vp.string());
    char head[kPhyvHeaderSize];
    if (!f.read(head, kPhyvHeaderSize))
      throw DataError("phyv truncated: " + vp.string());
    std::string h(head, kPhyvHeaderSize);
    if (h.compare(0, 4, "PHYV") != 0)
      throw DataError("phyv magic mismatch: " + vp.string());
    if (get_u16(h, 4) != kPhyvVersion)
      throw DataError("phyv version mismatch: " + vp.string());
    if (int(get_u16(h, 6)) != manifest_.frames ||
        int(get_u16(h, 8)) != manifest_.resolution ||
        int(get_u16(h, 10)) != manifest_.resolution || get_u16(h, 12) != 3)
      throw DataError("dataset video header disagrees with manifest: " +
                      vp.string());
  }
}

int Dataset::num_examples() const {
  return size() * (manifest_.flip_augment ? 2 : 1);
}

raster::Video Dataset::load_video(int index, bool flipped) const {
  if (index < 0 || index >= size())
    throw DataError("dataset episode index out of range");
  raster::Video v = read_phyv(
      (fs::path(dir_) / manifest_.episodes[index].video_file).string());
  return flipped ? raster::hflip(v) : v;
}

std::vector<FrameStates> Dataset::load_states(int index, bool flipped) const {
  if (index < 0 || index >= size())
    throw DataError("dataset episode index out of range");
  std::string text = read_file_bytes(
      fs::path(dir_) / manifest_.episodes[index].states_file);
  std::vector<FrameStates> frames;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("states sidecar unparseable: " + std::string(e.what()));
    }
    FrameStates fsd;
    for (const json& o : j.at("objects")) {
      ObjectState s;
      s.x = o.at("x").get<double>();
      s.y = o.at("y").get<double>();
      s.vx = o.at("vx").get<double>();
      s.vy = o.at("vy").get<double>();
      s.r = o.at("r").get<double>();
      if (flipped) {
        s.x = kArenaSpan - s.x;
        s.vx = -s.vx;
      }
      fsd.push_back(s);
    }
    frames.push_back(std::move(fsd));
  }
  if (int(frames.size()) != manifest_.frames)
    throw DataError("states sidecar frame count disagrees with manifest");
  return frames;
}

}  // namespace physlaw::datagen
