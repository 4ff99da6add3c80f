#include "acan/correlation.hpp"

#include <cmath>

#include "acan/kernels.hpp"
#include "acan/rng.hpp"

namespace acan {

namespace {

// flatten a projected map [C' x T' x H' x W'] to [C' x N]
Tensor project_flat(const Tensor& high_map, const Tensor& kernel) {
  Tensor proj = conv3d(high_map, kernel, {1, 1, 1}, {0, 0, 0});
  int n = proj.dim(1) * proj.dim(2) * proj.dim(3);
  return reshape(proj, {proj.dim(0), n});
}

}  // namespace

CorrParams CorrParams::init(int in_channels, int latent_channels, uint64_t seed) {
  if (latent_channels < 1) throw UsageError("CorrParams: latent width must be >= 1");
  auto make = [&](const char* tag) {
    Rng rng(derive_seed(seed, tag));
    double bound = std::sqrt(1.0 / in_channels);
    std::vector<double> d(static_cast<size_t>(latent_channels) * in_channels);
    for (double& v : d) v = rng.uniform(-bound, bound);
    return Tensor::from_data({latent_channels, in_channels, 1, 1, 1}, std::move(d), true);
  };
  CorrParams p;
  p.query_proj = make("corr-query");
  p.key_proj = make("corr-key");
  p.value_proj = make("corr-value");
  return p;
}

std::vector<std::pair<std::string, Tensor>> CorrParams::named_parameters() const {
  return {{"corr.query_proj", query_proj},
          {"corr.key_proj", key_proj},
          {"corr.value_proj", value_proj}};
}

PixelCorrelationMatrix pcm(const Tensor& high_map, const CorrParams& params) {
  if (high_map.ndim() != 4)
    throw ShapeError("pcm: high-level map must be C x T x H x W, got " +
                     shape_str(high_map.dims()));
  Tensor q = project_flat(high_map, params.query_proj);  // [C' x N]
  Tensor k = project_flat(high_map, params.key_proj);
  Tensor logits = matmul(transpose2d(q), k);  // [N x N]
  PixelCorrelationMatrix m;
  m.values = softmax_rows(logits);
  m.source_dims = {high_map.dim(1), high_map.dim(2), high_map.dim(3)};
  return m;
}

Tensor correlation_vector(const Tensor& high_map, const PixelCorrelationMatrix& m,
                          const CorrParams& params) {
  int n = high_map.dim(1) * high_map.dim(2) * high_map.dim(3);
  if (m.positions() != n || m.values.dim(0) != n)
    throw ShapeError("correlation_vector: attention matrix " + shape_str(m.values.dims()) +
                     " inconsistent with map " + shape_str(high_map.dims()));
  Tensor v = project_flat(high_map, params.value_proj);   // [C' x N]
  Tensor mixed = matmul(v, transpose2d(m.values));        // column p = row-p weighted mix
  return global_avg_pool(mixed);                          // [C']
}

GramMatrix gram(const PixelCorrelationMatrix& m) {
  return {matmul(transpose2d(m.values), m.values)};
}

double video_covariance_loss(std::span<const GramMatrix> grams_s,
                             std::span<const GramMatrix> grams_t) {
  if (grams_s.empty() || grams_t.empty())
    throw UsageError("video_covariance_loss: empty Gram list");
  int64_t n = grams_s[0].values.numel();
  std::vector<double> mean_s(n, 0.0), mean_t(n, 0.0);
  for (const GramMatrix& g : grams_s) {
    if (g.values.numel() != n) throw ShapeError("video_covariance_loss: Gram size mismatch");
    kernels::axpy(1.0 / grams_s.size(), g.values.data().data(), mean_s.data(), n);
  }
  for (const GramMatrix& g : grams_t) {
    if (g.values.numel() != n) throw ShapeError("video_covariance_loss: Gram size mismatch");
    kernels::axpy(1.0 / grams_t.size(), g.values.data().data(), mean_t.data(), n);
  }
  return kernels::sqdist(mean_s.data(), mean_t.data(), n);
}

}  // namespace acan
