#include "acan/encoder.hpp"

#include <cmath>

#include "acan/rng.hpp"

namespace acan {

namespace {

Tensor uniform_fan_in(Shape dims, int fan_in, Rng& rng) {
  double bound = std::sqrt(1.0 / fan_in);
  std::vector<double> d(shape_numel(dims));
  for (double& v : d) v = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(dims), std::move(d), true);
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg, uint64_t seed) {
  EncoderParams p;
  p.config = cfg;
  int cin = cfg.in_channels;
  for (size_t b = 0; b < cfg.channels.size(); ++b) {
    Rng rng(derive_seed(seed, "encoder-block", b));
    int cout = cfg.channels[b];
    int fan_in = cin * 3 * 3 * 3;
    ConvBlock blk;
    blk.weight = uniform_fan_in({cout, cin, 3, 3, 3}, fan_in, rng);
    blk.bias = uniform_fan_in({cout}, fan_in, rng);
    blk.stride = cfg.strides[b];
    p.blocks.push_back(std::move(blk));
    cin = cout;
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t b = 0; b < blocks.size(); ++b) {
    out.emplace_back("encoder.block" + std::to_string(b) + ".weight", blocks[b].weight);
    out.emplace_back("encoder.block" + std::to_string(b) + ".bias", blocks[b].bias);
  }
  return out;
}

EncoderOut encode(const Tensor& video, const EncoderParams& params) {
  const EncoderConfig& cfg = params.config;
  if (video.dims() != Shape{cfg.in_channels, cfg.frames, cfg.height, cfg.width})
    throw ShapeError("encode: video " + shape_str(video.dims()) + " does not match configured " +
                     shape_str({cfg.in_channels, cfg.frames, cfg.height, cfg.width}));
  EncoderOut out;
  Tensor x = video;
  for (size_t b = 0; b < params.blocks.size(); ++b) {
    const ConvBlock& blk = params.blocks[b];
    x = relu(add_channel_bias(conv3d(x, blk.weight, blk.stride, {1, 1, 1}), blk.bias));
    if (static_cast<int>(b) == cfg.high_block) out.high_map = x;
  }
  out.feature = global_avg_pool(x);
  return out;
}

}  // namespace acan
