#include "physlaw/stdit.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "json.hpp"
#include "physlaw/common.hpp"
#include "physlaw/numkit/rng.hpp"

namespace physlaw::stdit {

using json = nlohmann::ordered_json;
using numkit::Rng;
using numkit::Shape;
using numkit::Tensor;

namespace {

constexpr std::uint64_t kSaltInit = 0x7374646974ULL;

std::shared_ptr<std::vector<std::int64_t>> make_index(std::size_t n) {
  return std::make_shared<std::vector<std::int64_t>>(n);
}

Tensor randn_param(Shape shape, float stddev, Rng& rng) {
  std::vector<float> v(size_t(numkit::shape_numel(shape)));
  for (float& x : v) x = stddev * rng.gaussian_f();
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

int even_floor(int x) { return (x / 2) * 2; }

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1)
    throw DataError("model config needs positive layers, hidden size, heads");
  if (hidden % heads != 0)
    throw DataError("hidden size " + std::to_string(hidden) +
                    " is not divisible by " + std::to_string(heads) + " heads");
  int hd = hidden / heads;
  if (hd % 2 != 0 || hd < 8)
    throw DataError("head dim " + std::to_string(hd) +
                    " must be even and at least 8 for the three rotary bands");
  if (p_t < 1 || p_h < 1 || p_w < 1)
    throw DataError("patch sizes must be positive");
  if (in_channels < 1 || out_channels < 1)
    throw DataError("channel counts must be positive");
  if (temb_dim < 2 || temb_dim % 2 != 0)
    throw DataError("timestep embedding dim must be even and at least 2");
}

ModelConfig preset_config(const std::string& name) {
  ModelConfig cfg;
  if (name == "nano") {
    cfg.layers = 4, cfg.hidden = 128, cfg.heads = 4;
  } else if (name == "micro") {
    cfg.layers = 8, cfg.hidden = 256, cfg.heads = 8;
  } else if (name == "dit-s") {
    cfg.layers = 12, cfg.hidden = 384, cfg.heads = 6;
  } else if (name == "dit-b") {
    cfg.layers = 12, cfg.hidden = 768, cfg.heads = 12;
  } else if (name == "dit-l") {
    cfg.layers = 24, cfg.hidden = 1024, cfg.heads = 16;
  } else if (name == "dit-xl") {
    cfg.layers = 28, cfg.hidden = 1152, cfg.heads = 16;
  } else {
    throw UsageError("unknown model preset '" + name +
                     "' (nano, micro, dit-s, dit-b, dit-l, dit-xl)");
  }
  cfg.temb_dim = cfg.hidden;
  cfg.validate();
  return cfg;
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["layers"] = cfg.layers;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["patch"] = {cfg.p_t, cfg.p_h, cfg.p_w};
  j["in_channels"] = cfg.in_channels;
  j["out_channels"] = cfg.out_channels;
  j["temb_dim"] = cfg.temb_dim;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig cfg;
  try {
    cfg.layers = j.at("layers").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.p_t = j.at("patch").at(0).get<int>();
    cfg.p_h = j.at("patch").at(1).get<int>();
    cfg.p_w = j.at("patch").at(2).get<int>();
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.out_channels = j.at("out_channels").get<int>();
    cfg.temb_dim = j.at("temb_dim").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model config JSON is missing fields: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

void check_patchable(const Tensor& video, const ModelConfig& cfg) {
  if (!video.defined() || video.rank() != 4)
    throw DataError("patchify expects an (L, H, W, C) tensor");
  if (video.dim(0) % cfg.p_t != 0 || video.dim(1) % cfg.p_h != 0 ||
      video.dim(2) % cfg.p_w != 0)
    throw DataError("video shape " + numkit::shape_str(video.shape()) +
                    " is not divisible by patch (" + std::to_string(cfg.p_t) +
                    ", " + std::to_string(cfg.p_h) + ", " +
                    std::to_string(cfg.p_w) + ")");
}

// patch_idx[token_flat] = video_flat for gather video -> tokens;
// unpatch_idx is the inverse permutation for gather tokens -> video.
void build_patch_maps(const Shape& video_shape, const ModelConfig& cfg,
                      std::vector<std::int64_t>* patch_idx,
                      std::vector<std::int64_t>* unpatch_idx,
                      std::vector<GridCoord>* coords) {
  std::int64_t L = video_shape[0], H = video_shape[1], W = video_shape[2],
               C = video_shape[3];
  std::int64_t gt = L / cfg.p_t, gy = H / cfg.p_h, gx = W / cfg.p_w;
  std::int64_t P = std::int64_t(cfg.p_t) * cfg.p_h * cfg.p_w * C;
  std::int64_t total = gt * gy * gx * P;
  if (patch_idx) patch_idx->resize(size_t(total));
  if (unpatch_idx) unpatch_idx->resize(size_t(total));
  if (coords) coords->resize(size_t(gt * gy * gx));

  std::int64_t n = 0;
  for (std::int64_t ti = 0; ti < gt; ++ti)
    for (std::int64_t yi = 0; yi < gy; ++yi)
      for (std::int64_t xi = 0; xi < gx; ++xi, ++n) {
        if (coords) (*coords)[size_t(n)] = {int(ti), int(yi), int(xi)};
        std::int64_t p = 0;
        for (std::int64_t dt = 0; dt < cfg.p_t; ++dt)
          for (std::int64_t dy = 0; dy < cfg.p_h; ++dy)
            for (std::int64_t dx = 0; dx < cfg.p_w; ++dx)
              for (std::int64_t c = 0; c < C; ++c, ++p) {
                std::int64_t v = (((ti * cfg.p_t + dt) * H + yi * cfg.p_h + dy) * W +
                                  xi * cfg.p_w + dx) * C + c;
                if (patch_idx) (*patch_idx)[size_t(n * P + p)] = v;
                if (unpatch_idx) (*unpatch_idx)[size_t(v)] = n * P + p;
              }
      }
}

}  // namespace

TokenSequence patchify(const Tensor& video, const ModelConfig& cfg) {
  check_patchable(video, cfg);
  auto idx = make_index(0);
  TokenSequence seq;
  build_patch_maps(video.shape(), cfg, idx.get(), nullptr, &seq.coords);
  std::int64_t N = std::int64_t(seq.coords.size());
  std::int64_t P = video.numel() / N;
  seq.tokens = numkit::gather(video, idx, {N, P});
  return seq;
}

Tensor unpatchify(const Tensor& tokens, const ModelConfig& cfg,
                  const Shape& video_shape) {
  if (video_shape.size() != 4)
    throw DataError("unpatchify needs an (L, H, W, C) target shape");
  if (numkit::shape_numel(video_shape) != tokens.numel())
    throw DataError("token count does not match the target video shape");
  auto idx = make_index(0);
  build_patch_maps(video_shape, cfg, nullptr, idx.get(), nullptr);
  return numkit::gather(tokens, idx, video_shape);
}

std::array<int, 3> rope_bands(int head_dim) {
  int bt = even_floor(head_dim / 4);
  int rest = head_dim - bt;
  int by = even_floor(rest / 2);
  return {bt, by, rest - by};
}

RopeTables rope3d_tables(const std::vector<GridCoord>& coords, int head_dim,
                         double base) {
  if (head_dim % 2 != 0 || head_dim < 8)
    throw DataError("rotary head dim must be even and at least 8");
  auto bands = rope_bands(head_dim);
  std::int64_t pairs = head_dim / 2;
  auto cos_tab = std::make_shared<std::vector<float>>(coords.size() * size_t(pairs));
  auto sin_tab = std::make_shared<std::vector<float>>(coords.size() * size_t(pairs));
  for (size_t n = 0; n < coords.size(); ++n) {
    double pos[3] = {double(coords[n].t), double(coords[n].y), double(coords[n].x)};
    std::int64_t p = 0;
    for (int band = 0; band < 3; ++band) {
      int b = bands[size_t(band)];
      for (int j = 0; j < b / 2; ++j, ++p) {
        double theta = std::pow(base, -2.0 * j / double(b));
        double angle = pos[band] * theta;
        (*cos_tab)[n * size_t(pairs) + size_t(p)] = float(std::cos(angle));
        (*sin_tab)[n * size_t(pairs) + size_t(p)] = float(std::sin(angle));
      }
    }
  }
  return {cos_tab, sin_tab};
}

// --- model ------------------------------------------------------------------

StDiT::StDiT(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  int D = cfg_.hidden, E = cfg_.temb_dim;
  std::int64_t Pin = std::int64_t(cfg_.p_t) * cfg_.p_h * cfg_.p_w * cfg_.in_channels;
  std::int64_t Pout = std::int64_t(cfg_.p_t) * cfg_.p_h * cfg_.p_w * cfg_.out_channels;
  Rng rng(Rng::mix({seed, kSaltInit}));
  const float sd = 0.02f;

  embed_w_ = randn_param({Pin, D}, sd, rng);
  embed_b_ = Tensor::zeros({D}, true);
  temb1_w_ = randn_param({E, E}, sd, rng);
  temb1_b_ = Tensor::zeros({E}, true);
  temb2_w_ = randn_param({E, E}, sd, rng);
  temb2_b_ = Tensor::zeros({E}, true);

  blocks_.resize(size_t(cfg_.layers));
  for (Block& b : blocks_) {
    b.adaln_w = Tensor::zeros({E, 6 * D}, true);
    b.adaln_b = Tensor::zeros({6 * D}, true);
    b.qkv_w = randn_param({D, 3 * D}, sd, rng);
    b.qkv_b = Tensor::zeros({3 * D}, true);
    b.proj_w = randn_param({D, D}, sd, rng);
    b.proj_b = Tensor::zeros({D}, true);
    b.fc1_w = randn_param({D, 4 * D}, sd, rng);
    b.fc1_b = Tensor::zeros({4 * D}, true);
    b.fc2_w = randn_param({4 * D, D}, sd, rng);
    b.fc2_b = Tensor::zeros({D}, true);
  }
  final_adaln_w_ = Tensor::zeros({E, 2 * D}, true);
  final_adaln_b_ = Tensor::zeros({2 * D}, true);
  final_w_ = Tensor::zeros({D, Pout}, true);
  final_b_ = Tensor::zeros({Pout}, true);

  for (int k = 0; k < 6; ++k) {
    auto s = make_index(size_t(D));
    for (int i = 0; i < D; ++i) (*s)[size_t(i)] = std::int64_t(k) * D + i;
    mod_slice_.push_back(std::move(s));
  }
  for (int k = 0; k < 2; ++k) {
    auto s = make_index(size_t(D));
    for (int i = 0; i < D; ++i) (*s)[size_t(i)] = std::int64_t(k) * D + i;
    fin_slice_.push_back(std::move(s));
  }
}

const StDiT::Plan& StDiT::plan_for(const Shape& shape) const {
  if (plan_ && plan_->video_shape == shape) return *plan_;
  auto plan = std::make_unique<Plan>();
  plan->video_shape = shape;

  std::vector<GridCoord> coords;
  plan->patch_idx = make_index(0);
  build_patch_maps(shape, cfg_, plan->patch_idx.get(), nullptr, &coords);
  plan->n_tokens = std::int64_t(coords.size());

  Shape out_shape{shape[0], shape[1], shape[2], cfg_.out_channels};
  plan->unpatch_idx = make_index(0);
  build_patch_maps(out_shape, cfg_, nullptr, plan->unpatch_idx.get(), nullptr);

  int D = cfg_.hidden, hd = cfg_.head_dim(), heads = cfg_.heads;
  std::int64_t N = plan->n_tokens;
  plan->q_idx = make_index(size_t(heads * N * hd));
  plan->k_idx = make_index(size_t(heads * N * hd));
  plan->v_idx = make_index(size_t(heads * N * hd));
  plan->merge_idx = make_index(size_t(N * D));
  for (int h = 0; h < heads; ++h)
    for (std::int64_t n = 0; n < N; ++n)
      for (int d = 0; d < hd; ++d) {
        std::int64_t split = (std::int64_t(h) * N + n) * hd + d;
        std::int64_t row = n * 3 * D + std::int64_t(h) * hd + d;
        (*plan->q_idx)[size_t(split)] = row;
        (*plan->k_idx)[size_t(split)] = row + D;
        (*plan->v_idx)[size_t(split)] = row + 2 * D;
        (*plan->merge_idx)[size_t(n * D + std::int64_t(h) * hd + d)] = split;
      }

  RopeTables per_token = rope3d_tables(coords, hd);
  auto cos_all = std::make_shared<std::vector<float>>();
  auto sin_all = std::make_shared<std::vector<float>>();
  cos_all->reserve(size_t(heads) * per_token.cos_tab->size());
  sin_all->reserve(size_t(heads) * per_token.sin_tab->size());
  for (int h = 0; h < heads; ++h) {
    cos_all->insert(cos_all->end(), per_token.cos_tab->begin(), per_token.cos_tab->end());
    sin_all->insert(sin_all->end(), per_token.sin_tab->begin(), per_token.sin_tab->end());
  }
  plan->cos_tab = std::move(cos_all);
  plan->sin_tab = std::move(sin_all);

  plan_ = std::move(plan);
  return *plan_;
}

numkit::Tensor StDiT::forward(const Tensor& stack, int t, ForwardStats* stats) {
  if (!stack.defined() || stack.rank() != 4 || stack.dim(3) != cfg_.in_channels)
    throw DataError("denoiser input must be (L, H, W, " +
                    std::to_string(cfg_.in_channels) + "), got " +
                    (stack.defined() ? numkit::shape_str(stack.shape()) : "<empty>"));
  check_patchable(stack, cfg_);
  const Plan& plan = plan_for(stack.shape());
  int D = cfg_.hidden, E = cfg_.temb_dim, heads = cfg_.heads, hd = cfg_.head_dim();
  std::int64_t N = plan.n_tokens;
  std::int64_t Pin = stack.numel() / N;

  Tensor x = numkit::add_rowvec(
      numkit::matmul(numkit::gather(stack, plan.patch_idx, {N, Pin}), embed_w_),
      embed_b_);

  // sinusoidal timestep features through a 2-layer MLP
  std::vector<float> sincos(static_cast<size_t>(E));
  for (int i = 0; i < E / 2; ++i) {
    double freq = std::exp(-std::log(10000.0) * double(i) / double(E / 2));
    sincos[size_t(i)] = float(std::cos(double(t) * freq));
    sincos[size_t(E / 2 + i)] = float(std::sin(double(t) * freq));
  }
  Tensor e = Tensor::from_data({1, E}, std::move(sincos));
  e = numkit::add_rowvec(numkit::matmul(e, temb1_w_), temb1_b_);
  e = numkit::silu(e);
  e = numkit::add_rowvec(numkit::matmul(e, temb2_w_), temb2_b_);
  Tensor e_act = numkit::silu(e);

  if (stats) {
    stats->attn_row_sum_min = std::numeric_limits<float>::infinity();
    stats->attn_row_sum_max = -std::numeric_limits<float>::infinity();
  }

  auto modulate = [&](const Tensor& h, const Tensor& shift, const Tensor& sc) {
    return numkit::add_rowvec(
        numkit::mul_rowvec(h, numkit::add_scalar(sc, 1.0f)), shift);
  };

  for (Block& b : blocks_) {
    Tensor mod = numkit::add_rowvec(numkit::matmul(e_act, b.adaln_w), b.adaln_b);
    Tensor sh1 = numkit::gather(mod, mod_slice_[0], {D});
    Tensor sc1 = numkit::gather(mod, mod_slice_[1], {D});
    Tensor g1 = numkit::gather(mod, mod_slice_[2], {D});
    Tensor sh2 = numkit::gather(mod, mod_slice_[3], {D});
    Tensor sc2 = numkit::gather(mod, mod_slice_[4], {D});
    Tensor g2 = numkit::gather(mod, mod_slice_[5], {D});

    Tensor h = modulate(numkit::layer_norm_lastdim(x), sh1, sc1);
    Tensor qkv = numkit::add_rowvec(numkit::matmul(h, b.qkv_w), b.qkv_b);
    Tensor q = numkit::rope_rotate(numkit::gather(qkv, plan.q_idx, {heads, N, hd}),
                                   plan.cos_tab, plan.sin_tab);
    Tensor kk = numkit::rope_rotate(numkit::gather(qkv, plan.k_idx, {heads, N, hd}),
                                    plan.cos_tab, plan.sin_tab);
    Tensor v = numkit::gather(qkv, plan.v_idx, {heads, N, hd});
    Tensor att = numkit::softmax_lastdim(
        numkit::scale(numkit::bmm(q, kk, true), 1.0f / std::sqrt(float(hd))));
    if (stats) {
      auto a = att.value();
      for (std::int64_t row = 0; row < heads * N; ++row) {
        float s = 0.0f;
        for (std::int64_t col = 0; col < N; ++col) s += a[size_t(row * N + col)];
        stats->attn_row_sum_min = std::min(stats->attn_row_sum_min, s);
        stats->attn_row_sum_max = std::max(stats->attn_row_sum_max, s);
      }
    }
    Tensor o = numkit::gather(numkit::bmm(att, v), plan.merge_idx, {N, D});
    o = numkit::add_rowvec(numkit::matmul(o, b.proj_w), b.proj_b);
    x = numkit::add(x, numkit::mul_rowvec(o, g1));

    Tensor m = modulate(numkit::layer_norm_lastdim(x), sh2, sc2);
    m = numkit::gelu_tanh(numkit::add_rowvec(numkit::matmul(m, b.fc1_w), b.fc1_b));
    m = numkit::add_rowvec(numkit::matmul(m, b.fc2_w), b.fc2_b);
    x = numkit::add(x, numkit::mul_rowvec(m, g2));
  }

  Tensor fmod = numkit::add_rowvec(numkit::matmul(e_act, final_adaln_w_),
                                   final_adaln_b_);
  Tensor fsh = numkit::gather(fmod, fin_slice_[0], {D});
  Tensor fsc = numkit::gather(fmod, fin_slice_[1], {D});
  Tensor h = modulate(numkit::layer_norm_lastdim(x), fsh, fsc);
  Tensor out = numkit::add_rowvec(numkit::matmul(h, final_w_), final_b_);
  return numkit::gather(out, plan.unpatch_idx,
                        {stack.dim(0), stack.dim(1), stack.dim(2), cfg_.out_channels});
}

std::vector<numkit::NamedParam> StDiT::named_params() const {
  std::vector<numkit::NamedParam> out;
  out.push_back({"embed.w", embed_w_});
  out.push_back({"embed.b", embed_b_});
  out.push_back({"temb.fc1.w", temb1_w_});
  out.push_back({"temb.fc1.b", temb1_b_});
  out.push_back({"temb.fc2.w", temb2_w_});
  out.push_back({"temb.fc2.b", temb2_b_});
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    std::string p = "block" + std::to_string(i) + ".";
    out.push_back({p + "adaln.w", b.adaln_w});
    out.push_back({p + "adaln.b", b.adaln_b});
    out.push_back({p + "qkv.w", b.qkv_w});
    out.push_back({p + "qkv.b", b.qkv_b});
    out.push_back({p + "proj.w", b.proj_w});
    out.push_back({p + "proj.b", b.proj_b});
    out.push_back({p + "mlp.fc1.w", b.fc1_w});
    out.push_back({p + "mlp.fc1.b", b.fc1_b});
    out.push_back({p + "mlp.fc2.w", b.fc2_w});
    out.push_back({p + "mlp.fc2.b", b.fc2_b});
  }
  out.push_back({"final.adaln.w", final_adaln_w_});
  out.push_back({"final.adaln.b", final_adaln_b_});
  out.push_back({"final.proj.w", final_w_});
  out.push_back({"final.proj.b", final_b_});
  return out;
}

std::int64_t StDiT::param_count(const ModelConfig& cfg) {
  cfg.validate();
  std::int64_t D = cfg.hidden, E = cfg.temb_dim, layers = cfg.layers;
  std::int64_t Pin = std::int64_t(cfg.p_t) * cfg.p_h * cfg.p_w * cfg.in_channels;
  std::int64_t Pout = std::int64_t(cfg.p_t) * cfg.p_h * cfg.p_w * cfg.out_channels;
  std::int64_t embed = Pin * D + D;
  std::int64_t temb = 2 * E * E + 2 * E;
  std::int64_t block = (E * 6 * D + 6 * D)        // adaLN modulation
                       + (D * 3 * D + 3 * D)      // qkv
                       + (D * D + D)              // attention projection
                       + (D * 4 * D + 4 * D)      // mlp in
                       + (4 * D * D + D);         // mlp out
  std::int64_t fin = (E * 2 * D + 2 * D) + (D * Pout + Pout);
  return embed + temb + layers * block + fin;
}

}  // namespace physlaw::stdit
