#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acan/ops.hpp"

namespace acan {

// Row-stochastic attention matrix over all spatiotemporal positions of a
// feature map: entry (p, q) is how strongly position p attends to position q.
struct PixelCorrelationMatrix {
  Tensor values;                   // [N x N], rows sum to 1
  std::array<int, 3> source_dims;  // (T', H', W') of the map it came from

  int positions() const { return source_dims[0] * source_dims[1] * source_dims[2]; }
};

struct GramMatrix {
  Tensor values;  // [N x N], symmetric PSD
};

// Projection kernels for the query/key/value maps, each a 1x1x1 conv from the
// high-level channel count down to the latent width. No bias: the attention
// logits stay a pure bilinear similarity.
struct CorrParams {
  Tensor query_proj;  // [C' x C_h x 1 x 1 x 1]
  Tensor key_proj;
  Tensor value_proj;

  static CorrParams init(int in_channels, int latent_channels, uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  int latent_channels() const { return query_proj.dim(0); }
};

// Attention matrix of a high-level map: softmax over key positions of the
// query/key similarity, one row per query position.
PixelCorrelationMatrix pcm(const Tensor& high_map, const CorrParams& params);

// Mixes the projected map by the attention rows and pools over positions,
// giving the fixed-length correlation feature vector.
Tensor correlation_vector(const Tensor& high_map, const PixelCorrelationMatrix& m,
                          const CorrParams& params);

GramMatrix gram(const PixelCorrelationMatrix& m);

// Squared Frobenius distance between the mean source Gram and the mean target
// Gram. Diagnostic only; not part of any training objective.
double video_covariance_loss(std::span<const GramMatrix> grams_s,
                             std::span<const GramMatrix> grams_t);

}  // namespace acan
