#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lseg/array2.hpp"
#include "lseg/nn.hpp"

namespace lseg {

// Small dilated residual encoder: four stages, stride-2 entries on the
// first three, atrous rates (2, 4) on the last two, output stride 8.
// The low-level tap is the second stage's output (stride 4).
struct EncoderConfig {
  std::vector<int> stage_channels{16, 32, 64, 128};
  int units_per_stage = 2;
  bool multi_grid = false;                  // per-unit rate multipliers, final stage
  std::vector<int> multi_grid_rates{2, 4, 8};
};

enum class ChannelAttentionKind { None, SE, ECA };
enum class SpatialAttentionKind { None, MSA, ASPP };

struct AttentionConfig {
  ChannelAttentionKind channel = ChannelAttentionKind::SE;
  SpatialAttentionKind spatial = SpatialAttentionKind::MSA;
  bool danet = false;  // excludes the channel/spatial selections
  int se_reduction = 16;
  double eca_gamma = 2.0;
  double eca_b = 1.0;
  std::vector<int> aspp_rates{1, 2, 4, 8};
};

struct DecoderConfig {
  enum class Variant { D1, D2 };
  Variant variant = Variant::D1;
  int d2_lowlevel_channels = 16;
};

struct ModelConfig {
  EncoderConfig encoder;
  AttentionConfig attention;
  DecoderConfig decoder;
  int input_size = 128;
  uint64_t init_seed = 11;
};

// Adaptive 1-D kernel size: nearest odd integer (ties upward) to
// log2(C)/gamma + b/gamma, at least 1.
int eca_kernel_size(int channels, double gamma, double b);

nn::Tensor image_to_tensor(const ImageF& img);   // (1,H,W)
ProbMap tensor_to_prob(const nn::Tensor& t);     // from (1,H,W)
MaskU8 threshold_prob(const ProbMap& p, double thr = 0.5);

class CosegNet {
 public:
  explicit CosegNet(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, nn::NodePtr>>& named_parameters() const {
    return params_;
  }
  void zero_grad();
  int bottleneck_channels() const { return cfg_.encoder.stage_channels.back(); }
  // effective dilation of each final-stage unit (base 4 x multi-grid rate)
  std::vector<int> final_stage_dilations() const;

  struct PairFeatures {
    nn::NodePtr bottleneck_a, bottleneck_b;  // (C, H/8, W/8)
    nn::NodePtr lowlevel_a, lowlevel_b;      // (C_low, H/4, W/4)
  };

  nn::NodePtr encode_one(nn::Graph& g, const nn::Tensor& img, nn::NodePtr* lowlevel = nullptr);
  PairFeatures encode(nn::Graph& g, const nn::Tensor& img_a, const nn::Tensor& img_b);

  // one shared gate from sum-fused pooled descriptors; (C) in (0,1)
  nn::NodePtr channel_gate(nn::Graph& g, nn::NodePtr fa, nn::NodePtr fb);
  // per-image spatial map from the raw bottleneck features
  nn::NodePtr spatial_map(nn::Graph& g, nn::NodePtr f);
  // dual attention on the sum-fused pair features; identical for both slots
  nn::NodePtr danet_attend(nn::Graph& g, nn::NodePtr fa, nn::NodePtr fb);

  std::pair<nn::NodePtr, nn::NodePtr> apply_attention(nn::Graph& g, const PairFeatures& pf);

  nn::NodePtr decode(nn::Graph& g, nn::NodePtr attended, nn::NodePtr lowlevel);

  struct PairOutput {
    nn::NodePtr prob_a, prob_b;  // (1,H,W) in (0,1)
  };
  PairOutput forward_pair(nn::Graph& g, const nn::Tensor& img_a, const nn::Tensor& img_b);

 private:
  nn::NodePtr param(const std::string& name, nn::Tensor init);
  nn::NodePtr conv_param_block(nn::Graph& g, nn::NodePtr x, const std::string& name, int in_ch,
                               int out_ch, int k, int stride, int dilation, int pad);
  nn::NodePtr residual_unit(nn::Graph& g, nn::NodePtr x, const std::string& name, int in_ch,
                            int out_ch, int stride, int dilation);

  ModelConfig cfg_;
  std::vector<std::pair<std::string, nn::NodePtr>> params_;
  std::map<std::string, nn::NodePtr> by_name_;
  uint64_t init_cursor_ = 0;
};

// Checkpoint container: magic "CSGW1", u32 JSON length, config+extra JSON,
// u32 tensor count, then per tensor: u16 name length, name, u8 ndim,
// u32 dims, f32 data. Little-endian throughout.
struct Checkpoint {
  ModelConfig config;
  std::string extra_json;  // "{}" when absent
  std::map<std::string, nn::Tensor> tensors;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// Copies model parameters into / out of a checkpoint tensor map. Loading
// validates names and shapes and names the offending tensor on mismatch.
void export_parameters(const CosegNet& model, std::map<std::string, nn::Tensor>& tensors);
void import_parameters(CosegNet& model, const std::map<std::string, nn::Tensor>& tensors);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace lseg
