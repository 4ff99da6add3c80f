#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "acan/ops.hpp"

namespace acan {

struct ConvBlock {
  Tensor weight;  // [C_out x C_in x 3 x 3 x 3]
  Tensor bias;    // [C_out]
  Stride3 stride;
};

struct EncoderConfig {
  int in_channels = 3;
  int frames = 8;
  int height = 32;
  int width = 32;
  std::vector<int> channels = {16, 32, 64};
  std::vector<Stride3> strides = {{1, 2, 2}, {2, 2, 2}, {2, 2, 2}};
  int high_block = 1;  // 0-based block whose output is the high-level map

  int feature_dim() const { return channels.back(); }
  int high_channels() const { return channels[high_block]; }
};

// Shared video feature generator: stacked conv3d/relu blocks with spatial
// (and partly temporal) downsampling. encode() returns the pooled feature of
// the last block and the raw map of the high block.
struct EncoderParams {
  EncoderConfig config;
  std::vector<ConvBlock> blocks;

  static EncoderParams init(const EncoderConfig& cfg, uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

struct EncoderOut {
  Tensor feature;   // [C_f], global average pool of the last block
  Tensor high_map;  // [C_h x T' x H' x W']
};

EncoderOut encode(const Tensor& video, const EncoderParams& params);

}  // namespace acan
