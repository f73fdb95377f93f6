#include "lseg/cosegnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lseg/errors.hpp"
#include "lseg/rng.hpp"

namespace lseg {

using nn::Graph;
using nn::NodePtr;
using nn::Tensor;

int eca_kernel_size(int channels, double gamma, double b) {
  if (channels < 1) throw ConfigError("eca_kernel_size: channels must be >= 1");
  if (gamma <= 0) throw ConfigError("eca_kernel_size: gamma must be positive");
  const double v = std::log2(static_cast<double>(channels)) / gamma + b / gamma;
  int k0 = static_cast<int>(std::floor(v));
  int lo = (k0 % 2 != 0) ? k0 : k0 - 1;
  int hi = lo + 2;
  int k = (v - lo <= hi - v) ? lo : hi;
  if (std::abs(v - lo) == std::abs(hi - v)) k = hi;  // tie goes upward
  return std::max(1, k);
}

Tensor image_to_tensor(const ImageF& img) {
  Tensor t({1, img.h, img.w});
  t.data = img.v;
  return t;
}

ProbMap tensor_to_prob(const Tensor& t) {
  if (t.ndim() != 3 || t.dim(0) != 1) throw ConfigError("tensor_to_prob: expects (1,H,W)");
  ProbMap p(t.dim(1), t.dim(2));
  p.v = t.data;
  return p;
}

MaskU8 threshold_prob(const ProbMap& p, double thr) {
  MaskU8 m(p.h, p.w, 0);
  for (size_t i = 0; i < p.size(); ++i) m.v[i] = p.v[i] >= thr ? 255 : 0;
  return m;
}

namespace {

struct StagePlan {
  int in_ch, out_ch, stride, dilation, units;
};

std::vector<StagePlan> make_stage_plans(const EncoderConfig& e) {
  if (e.stage_channels.size() != 4)
    throw ConfigError("encoder: exactly four stage channel counts expected");
  for (int c : e.stage_channels)
    if (c < 1) throw ConfigError("encoder: stage channels must be positive");
  if (e.units_per_stage < 1) throw ConfigError("encoder: units_per_stage must be >= 1");
  if (e.multi_grid && e.multi_grid_rates.empty())
    throw ConfigError("encoder: multi_grid enabled but no rates given");

  const int dil[4] = {1, 1, 2, 4};
  std::vector<StagePlan> plans(4);
  for (int s = 0; s < 4; ++s) {
    plans[s].in_ch = s == 0 ? 1 : e.stage_channels[s - 1];
    plans[s].out_ch = e.stage_channels[s];
    plans[s].stride = s < 3 ? 2 : 1;
    plans[s].dilation = dil[s];
    plans[s].units = (s == 3 && e.multi_grid) ? static_cast<int>(e.multi_grid_rates.size())
                                              : e.units_per_stage;
  }
  return plans;
}

}  // namespace

CosegNet::CosegNet(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg_.input_size <= 0 || cfg_.input_size % 8 != 0)
    throw ConfigError("cosegnet: input size must be a positive multiple of 8");
  const auto plans = make_stage_plans(cfg_.encoder);
  const int c_bottleneck = plans[3].out_ch;
  const int bottleneck_hw = cfg_.input_size / 8;

  const auto& at = cfg_.attention;
  if (at.danet &&
      (at.channel != ChannelAttentionKind::None || at.spatial != SpatialAttentionKind::None))
    throw ConfigError("attention: danet excludes separate channel/spatial selections");
  if (at.channel == ChannelAttentionKind::SE) {
    if (at.se_reduction < 1 || c_bottleneck % at.se_reduction != 0)
      throw ConfigError("attention: se_reduction must divide the bottleneck channels");
  }
  if (at.spatial == SpatialAttentionKind::ASPP) {
    if (at.aspp_rates.empty()) throw ConfigError("attention: aspp_rates empty");
    for (int r : at.aspp_rates) {
      if (r < 1) throw ConfigError("attention: aspp rates must be >= 1");
      if (r >= bottleneck_hw)
        throw ConfigError("attention: aspp rate " + std::to_string(r) +
                          " needs padding >= feature size " + std::to_string(bottleneck_hw));
    }
  }

  Rng rng(cfg_.init_seed);
  auto he_conv = [&](const std::string& name, int out_ch, int in_ch, int kh, int kw,
                     double gain = 1.0) {
    Tensor w({out_ch, in_ch, kh, kw});
    const double stddev = gain * std::sqrt(2.0 / (in_ch * kh * kw));
    for (auto& v : w.data) v = rng.normal(0.0, stddev);
    param(name + ".w", std::move(w));
    param(name + ".b", Tensor::zeros({out_ch}));
  };

  // encoder
  for (int s = 0; s < 4; ++s) {
    const auto& p = plans[s];
    for (int u = 0; u < p.units; ++u) {
      const int in_ch = u == 0 ? p.in_ch : p.out_ch;
      const int stride = u == 0 ? p.stride : 1;
      const std::string base = "encoder.s" + std::to_string(s) + ".u" + std::to_string(u);
      he_conv(base + ".conv1", p.out_ch, in_ch, 3, 3);
      he_conv(base + ".conv2", p.out_ch, p.out_ch, 3, 3);
      if (in_ch != p.out_ch || stride != 1) he_conv(base + ".proj", p.out_ch, in_ch, 1, 1);
    }
  }

  // attention
  if (at.danet) {
    param("attn.danet.gamma_p", Tensor::zeros({1}));
    param("attn.danet.gamma_c", Tensor::zeros({1}));
  } else {
    if (at.channel == ChannelAttentionKind::SE) {
      const int mid = c_bottleneck / at.se_reduction;
      Tensor w1({mid, c_bottleneck});
      for (auto& v : w1.data) v = rng.normal(0.0, std::sqrt(2.0 / c_bottleneck));
      param("attn.se.fc1.w", std::move(w1));
      param("attn.se.fc1.b", Tensor::zeros({mid}));
      Tensor w2({c_bottleneck, mid});
      for (auto& v : w2.data) v = rng.normal(0.0, std::sqrt(2.0 / mid));
      param("attn.se.fc2.w", std::move(w2));
      param("attn.se.fc2.b", Tensor::zeros({c_bottleneck}));
    } else if (at.channel == ChannelAttentionKind::ECA) {
      const int k = eca_kernel_size(c_bottleneck, at.eca_gamma, at.eca_b);
      Tensor w({k});
      for (auto& v : w.data) v = rng.normal(0.0, std::sqrt(1.0 / k));
      param("attn.eca.kernel", std::move(w));
      param("attn.eca.bias", Tensor::zeros({1}));
    }
    if (at.spatial == SpatialAttentionKind::ASPP) {
      const int bc = std::max(c_bottleneck / 4, 1);
      for (size_t i = 0; i < at.aspp_rates.size(); ++i)
        he_conv("attn.aspp.branch" + std::to_string(i), bc, c_bottleneck, 3, 3);
      he_conv("attn.aspp.fuse", 1, bc * static_cast<int>(at.aspp_rates.size()), 1, 1);
    }
    // MSA is parameter-free
  }

  // decoder (shared between the two streams)
  if (cfg_.decoder.variant == DecoderConfig::Variant::D1) {
    const int n1 = std::max(c_bottleneck / 2, 2);
    const int n2 = std::max(c_bottleneck / 4, 2);
    const int n3 = std::max(c_bottleneck / 8, 2);
    he_conv("decoder.d1.block0", n1, c_bottleneck, 3, 3);
    he_conv("decoder.d1.block1", n2, n1, 3, 3);
    he_conv("decoder.d1.block2", n3, n2, 3, 3);
    he_conv("decoder.d1.out", 1, n3, 1, 1, 0.1);
  } else {
    const int c_low = plans[1].out_ch;
    const int proj = cfg_.decoder.d2_lowlevel_channels;
    if (proj < 1) throw ConfigError("decoder: d2_lowlevel_channels must be >= 1");
    const int m = std::max(c_bottleneck / 2, 4);
    he_conv("decoder.d2.proj", proj, c_low, 1, 1);
    he_conv("decoder.d2.conv1", m, c_bottleneck + proj, 3, 3);
    he_conv("decoder.d2.conv2", m, m, 3, 3);
    he_conv("decoder.d2.out", 1, m, 1, 1, 0.1);
  }
}

NodePtr CosegNet::param(const std::string& name, Tensor init) {
  auto node = nn::make_node(std::move(init));
  node->name = name;
  params_.emplace_back(name, node);
  by_name_[name] = node;
  return node;
}

void CosegNet::zero_grad() {
  for (auto& [name, p] : params_) p->zero_grad();
}

std::vector<int> CosegNet::final_stage_dilations() const {
  const auto plans = make_stage_plans(cfg_.encoder);
  std::vector<int> out;
  for (int u = 0; u < plans[3].units; ++u) {
    int mult = cfg_.encoder.multi_grid ? cfg_.encoder.multi_grid_rates[u] : 1;
    out.push_back(plans[3].dilation * mult);
  }
  return out;
}

NodePtr CosegNet::residual_unit(Graph& g, NodePtr x, const std::string& name, int in_ch,
                                int out_ch, int stride, int dilation) {
  // the stride-2 entry tap stays dense; later convs carry the stage rate
  const int d1 = stride > 1 ? 1 : dilation;
  auto w1 = by_name_.at(name + ".conv1.w");
  auto b1 = by_name_.at(name + ".conv1.b");
  auto y = g.relu(g.conv2d(x, w1, b1, stride, d1, d1));
  auto w2 = by_name_.at(name + ".conv2.w");
  auto b2 = by_name_.at(name + ".conv2.b");
  y = g.conv2d(y, w2, b2, 1, dilation, dilation);
  NodePtr shortcut = x;
  if (in_ch != out_ch || stride != 1) {
    auto wp = by_name_.at(name + ".proj.w");
    auto bp = by_name_.at(name + ".proj.b");
    shortcut = g.conv2d(x, wp, bp, stride, 1, 0);
  }
  return g.relu(g.add(y, shortcut));
}

NodePtr CosegNet::encode_one(Graph& g, const Tensor& img, NodePtr* lowlevel) {
  if (img.ndim() != 3 || img.dim(0) != 1 || img.dim(1) != cfg_.input_size ||
      img.dim(2) != cfg_.input_size)
    throw ConfigError("encode: input must be (1," + std::to_string(cfg_.input_size) + "," +
                      std::to_string(cfg_.input_size) + ")");
  const auto plans = make_stage_plans(cfg_.encoder);
  NodePtr x = g.input(img);
  for (int s = 0; s < 4; ++s) {
    const auto& p = plans[s];
    for (int u = 0; u < p.units; ++u) {
      const int in_ch = u == 0 ? p.in_ch : p.out_ch;
      const int stride = u == 0 ? p.stride : 1;
      int dil = p.dilation;
      if (s == 3 && cfg_.encoder.multi_grid) dil *= cfg_.encoder.multi_grid_rates[u];
      x = residual_unit(g, x, "encoder.s" + std::to_string(s) + ".u" + std::to_string(u), in_ch,
                        p.out_ch, stride, dil);
    }
    if (s == 1 && lowlevel) *lowlevel = x;
  }
  return x;
}

CosegNet::PairFeatures CosegNet::encode(Graph& g, const Tensor& img_a, const Tensor& img_b) {
  PairFeatures pf;
  pf.bottleneck_a = encode_one(g, img_a, &pf.lowlevel_a);
  pf.bottleneck_b = encode_one(g, img_b, &pf.lowlevel_b);
  return pf;
}

NodePtr CosegNet::channel_gate(Graph& g, NodePtr fa, NodePtr fb) {
  auto z = g.add(g.global_avg_pool(fa), g.global_avg_pool(fb));
  switch (cfg_.attention.channel) {
    case ChannelAttentionKind::SE: {
      auto h = g.relu(g.linear(z, by_name_.at("attn.se.fc1.w"), by_name_.at("attn.se.fc1.b")));
      return g.sigmoid(g.linear(h, by_name_.at("attn.se.fc2.w"), by_name_.at("attn.se.fc2.b")));
    }
    case ChannelAttentionKind::ECA:
      return g.sigmoid(g.conv1d(z, by_name_.at("attn.eca.kernel"), by_name_.at("attn.eca.bias")));
    default:
      return nullptr;
  }
}

NodePtr CosegNet::spatial_map(Graph& g, NodePtr f) {
  switch (cfg_.attention.spatial) {
    case SpatialAttentionKind::MSA:
      return g.minmax_normalize(g.channel_mean(f));
    case SpatialAttentionKind::ASPP: {
      std::vector<NodePtr> branches;
      for (size_t i = 0; i < cfg_.attention.aspp_rates.size(); ++i) {
        const int r = cfg_.attention.aspp_rates[i];
        const std::string base = "attn.aspp.branch" + std::to_string(i);
        branches.push_back(
            g.conv2d(f, by_name_.at(base + ".w"), by_name_.at(base + ".b"), 1, r, r));
      }
      NodePtr cat = branches[0];
      for (size_t i = 1; i < branches.size(); ++i) cat = g.concat_channels(cat, branches[i]);
      auto fused =
          g.conv2d(cat, by_name_.at("attn.aspp.fuse.w"), by_name_.at("attn.aspp.fuse.b"), 1, 1, 0);
      auto sig = g.sigmoid(fused);  // (1,h,w)
      return g.reshape(sig, {sig->value.dim(1), sig->value.dim(2)});
    }
    default:
      return nullptr;
  }
}

NodePtr CosegNet::danet_attend(Graph& g, NodePtr fa, NodePtr fb) {
  auto G = g.add(fa, fb);
  const int c = G->value.dim(0);
  const int n = G->value.dim(1) * G->value.dim(2);
  auto gm = g.reshape(G, {c, n});
  auto gmt = g.transpose2d(gm);

  // position branch: N x N affinity over spatial locations
  auto affinity_p = g.softmax_rows(g.matmul(gmt, gm));
  auto weighted_p = g.matmul(gm, g.transpose2d(affinity_p));
  auto pos = g.add(g.scale_by_scalar(g.reshape(weighted_p, G->value.shape),
                                     by_name_.at("attn.danet.gamma_p")),
                   G);

  // channel branch: C x C affinity
  auto affinity_c = g.softmax_rows(g.matmul(gm, gmt));
  auto weighted_c = g.matmul(affinity_c, gm);
  auto chn = g.add(g.scale_by_scalar(g.reshape(weighted_c, G->value.shape),
                                     by_name_.at("attn.danet.gamma_c")),
                   G);
  return g.add(pos, chn);
}

std::pair<NodePtr, NodePtr> CosegNet::apply_attention(Graph& g, const PairFeatures& pf) {
  if (cfg_.attention.danet) {
    auto shared = danet_attend(g, pf.bottleneck_a, pf.bottleneck_b);
    return {shared, shared};
  }
  NodePtr fa = pf.bottleneck_a, fb = pf.bottleneck_b;
  if (auto gate = channel_gate(g, pf.bottleneck_a, pf.bottleneck_b)) {
    fa = g.scale_channels(fa, gate);
    fb = g.scale_channels(fb, gate);
  }
  if (cfg_.attention.spatial != SpatialAttentionKind::None) {
    fa = g.scale_spatial(fa, spatial_map(g, pf.bottleneck_a));
    fb = g.scale_spatial(fb, spatial_map(g, pf.bottleneck_b));
  }
  return {fa, fb};
}

NodePtr CosegNet::decode(Graph& g, NodePtr attended, NodePtr lowlevel) {
  if (cfg_.decoder.variant == DecoderConfig::Variant::D1) {
    auto block = [&](NodePtr x, const std::string& name) {
      auto y = g.relu(g.conv2d(x, by_name_.at(name + ".w"), by_name_.at(name + ".b"), 1, 1, 1));
      return g.upsample_bilinear(y, 2);
    };
    auto x = block(attended, "decoder.d1.block0");
    x = block(x, "decoder.d1.block1");
    x = block(x, "decoder.d1.block2");
    auto out =
        g.conv2d(x, by_name_.at("decoder.d1.out.w"), by_name_.at("decoder.d1.out.b"), 1, 1, 0);
    return g.sigmoid(out);
  }
  if (!lowlevel) throw ConfigError("decode: D2 requires low-level features");
  if (lowlevel->value.dim(1) != attended->value.dim(1) * 2)
    throw DataError("decode: low-level features must sit at stride 4");
  auto up = g.upsample_bilinear(attended, 2);
  auto low = g.conv2d(lowlevel, by_name_.at("decoder.d2.proj.w"),
                      by_name_.at("decoder.d2.proj.b"), 1, 1, 0);
  auto x = g.concat_channels(up, low);
  x = g.relu(g.conv2d(x, by_name_.at("decoder.d2.conv1.w"), by_name_.at("decoder.d2.conv1.b"), 1,
                      1, 1));
  x = g.relu(g.conv2d(x, by_name_.at("decoder.d2.conv2.w"), by_name_.at("decoder.d2.conv2.b"), 1,
                      1, 1));
  x = g.upsample_bilinear(x, 4);
  auto out = g.conv2d(x, by_name_.at("decoder.d2.out.w"), by_name_.at("decoder.d2.out.b"), 1, 1, 0);
  return g.sigmoid(out);
}

CosegNet::PairOutput CosegNet::forward_pair(Graph& g, const Tensor& img_a, const Tensor& img_b) {
  PairFeatures pf = encode(g, img_a, img_b);
  auto [fa, fb] = apply_attention(g, pf);
  return {decode(g, fa, pf.lowlevel_a), decode(g, fb, pf.lowlevel_b)};
}

// ---- config <-> json ----

namespace {

std::string channel_name(ChannelAttentionKind k) {
  switch (k) {
    case ChannelAttentionKind::SE: return "se";
    case ChannelAttentionKind::ECA: return "eca";
    default: return "none";
  }
}

ChannelAttentionKind channel_from(const std::string& s) {
  if (s == "se") return ChannelAttentionKind::SE;
  if (s == "eca") return ChannelAttentionKind::ECA;
  if (s == "none") return ChannelAttentionKind::None;
  throw ConfigError("unknown channel attention: " + s);
}

std::string spatial_name(SpatialAttentionKind k) {
  switch (k) {
    case SpatialAttentionKind::MSA: return "msa";
    case SpatialAttentionKind::ASPP: return "aspp";
    default: return "none";
  }
}

SpatialAttentionKind spatial_from(const std::string& s) {
  if (s == "msa") return SpatialAttentionKind::MSA;
  if (s == "aspp") return SpatialAttentionKind::ASPP;
  if (s == "none") return SpatialAttentionKind::None;
  throw ConfigError("unknown spatial attention: " + s);
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["input_size"] = cfg.input_size;
  j["init_seed"] = cfg.init_seed;
  j["encoder"] = {{"stage_channels", cfg.encoder.stage_channels},
                  {"units_per_stage", cfg.encoder.units_per_stage},
                  {"multi_grid", cfg.encoder.multi_grid},
                  {"multi_grid_rates", cfg.encoder.multi_grid_rates}};
  j["attention"] = {{"channel", channel_name(cfg.attention.channel)},
                    {"spatial", spatial_name(cfg.attention.spatial)},
                    {"danet", cfg.attention.danet},
                    {"se_reduction", cfg.attention.se_reduction},
                    {"eca_gamma", cfg.attention.eca_gamma},
                    {"eca_b", cfg.attention.eca_b},
                    {"aspp_rates", cfg.attention.aspp_rates}};
  j["decoder"] = {{"variant", cfg.decoder.variant == DecoderConfig::Variant::D1 ? "d1" : "d2"},
                  {"d2_lowlevel_channels", cfg.decoder.d2_lowlevel_channels}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config JSON: ") + e.what());
  }
  ModelConfig cfg;
  try {
    cfg.input_size = j.value("input_size", cfg.input_size);
    cfg.init_seed = j.value("init_seed", cfg.init_seed);
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      cfg.encoder.stage_channels =
          e.value("stage_channels", cfg.encoder.stage_channels);
      cfg.encoder.units_per_stage = e.value("units_per_stage", cfg.encoder.units_per_stage);
      cfg.encoder.multi_grid = e.value("multi_grid", cfg.encoder.multi_grid);
      cfg.encoder.multi_grid_rates =
          e.value("multi_grid_rates", cfg.encoder.multi_grid_rates);
    }
    if (j.contains("attention")) {
      const auto& a = j["attention"];
      cfg.attention.channel = channel_from(a.value("channel", std::string("se")));
      cfg.attention.spatial = spatial_from(a.value("spatial", std::string("msa")));
      cfg.attention.danet = a.value("danet", false);
      cfg.attention.se_reduction = a.value("se_reduction", cfg.attention.se_reduction);
      cfg.attention.eca_gamma = a.value("eca_gamma", cfg.attention.eca_gamma);
      cfg.attention.eca_b = a.value("eca_b", cfg.attention.eca_b);
      cfg.attention.aspp_rates = a.value("aspp_rates", cfg.attention.aspp_rates);
    }
    if (j.contains("decoder")) {
      const auto& d = j["decoder"];
      std::string variant = d.value("variant", std::string("d1"));
      if (variant == "d1")
        cfg.decoder.variant = DecoderConfig::Variant::D1;
      else if (variant == "d2")
        cfg.decoder.variant = DecoderConfig::Variant::D2;
      else
        throw ConfigError("unknown decoder variant: " + variant);
      cfg.decoder.d2_lowlevel_channels =
          d.value("d2_lowlevel_channels", cfg.decoder.d2_lowlevel_channels);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config JSON: ") + e.what());
  }
  return cfg;
}

// ---- checkpoint container ----

namespace {

constexpr char kCkptMagic[5] = {'C', 'S', 'G', 'W', '1'};

template <typename T>
void write_raw(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& f, const std::string& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw DataError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(kCkptMagic, 5);
  nlohmann::json j;
  j["model"] = nlohmann::json::parse(model_config_to_json(ck.config));
  j["extra"] = nlohmann::json::parse(ck.extra_json.empty() ? "{}" : ck.extra_json);
  const std::string js = j.dump();
  write_raw<uint32_t>(f, static_cast<uint32_t>(js.size()));
  f.write(js.data(), static_cast<std::streamsize>(js.size()));
  write_raw<uint32_t>(f, static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    write_raw<uint16_t>(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<uint8_t>(f, static_cast<uint8_t>(t.ndim()));
    for (int d : t.shape) write_raw<uint32_t>(f, static_cast<uint32_t>(d));
    std::vector<float> buf(t.data.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t.data[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[5];
  f.read(magic, 5);
  if (!f || std::memcmp(magic, kCkptMagic, 5) != 0)
    throw DataError("not a CSGW1 checkpoint: " + path);
  const auto js_len = read_raw<uint32_t>(f, path);
  std::string js(js_len, '\0');
  f.read(js.data(), js_len);
  if (!f) throw DataError("truncated checkpoint: " + path);

  Checkpoint ck;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint JSON: ") + e.what());
  }
  ck.config = model_config_from_json(j.at("model").dump());
  ck.extra_json = j.value("extra", nlohmann::json::object()).dump();

  const auto count = read_raw<uint32_t>(f, path);
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<uint16_t>(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const auto ndim = read_raw<uint8_t>(f, path);
    std::vector<int> shape(ndim);
    for (int d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_raw<uint32_t>(f, path));
    Tensor t(shape);
    std::vector<float> buf(t.data.size());
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!f) throw DataError("truncated checkpoint tensor '" + name + "': " + path);
    for (size_t k = 0; k < buf.size(); ++k) t.data[k] = buf[k];
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void export_parameters(const CosegNet& model, std::map<std::string, Tensor>& tensors) {
  for (const auto& [name, p] : model.named_parameters()) tensors[name] = p->value;
}

void import_parameters(CosegNet& model, const std::map<std::string, Tensor>& tensors) {
  for (const auto& [name, p] : model.named_parameters()) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw DataError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape != p->value.shape)
      throw DataError("checkpoint tensor '" + name + "' has mismatched shape");
    p->value.data = it->second.data;
  }
}

}  // namespace lseg
