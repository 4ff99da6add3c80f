#include "acan/heads.hpp"

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

MlpParams init_mlp(int in, int hidden, Rng& rng) {
  MlpParams p;
  p.w1 = uniform_fan_in({hidden, in}, in, rng);
  p.b1 = uniform_fan_in({hidden}, in, rng);
  p.w2 = uniform_fan_in({1, hidden}, hidden, rng);
  p.b2 = uniform_fan_in({1}, hidden, rng);
  return p;
}

// x[D] -> sigmoid(w2 relu(w1 x + b1) + b2), scalar
Tensor mlp_prob(const Tensor& x, const MlpParams& p) {
  Tensor col = reshape(x, {x.dim(0), 1});
  Tensor h = relu(add_channel_bias(matmul(p.w1, col), p.b1));
  Tensor logit = add_channel_bias(matmul(p.w2, h), p.b2);
  return sigmoid(reshape(logit, {1}));
}

}  // namespace

HeadParams HeadParams::init(int feature_dim, int corr_dim, int num_classes, int hidden,
                            uint64_t seed) {
  HeadParams p;
  Rng cls_rng(derive_seed(seed, "heads-classifier"));
  int in = feature_dim + corr_dim;
  p.cls_weight = uniform_fan_in({num_classes, in}, in, cls_rng);
  p.cls_bias = uniform_fan_in({num_classes}, in, cls_rng);
  Rng vd_rng(derive_seed(seed, "heads-video-disc"));
  p.video_disc = init_mlp(feature_dim, hidden, vd_rng);
  Rng cd_rng(derive_seed(seed, "heads-corr-disc"));
  p.corr_disc = init_mlp(corr_dim, hidden, cd_rng);
  return p;
}

std::vector<std::pair<std::string, Tensor>> HeadParams::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out = {
      {"heads.cls_weight", cls_weight}, {"heads.cls_bias", cls_bias}};
  auto add_mlp = [&](const char* prefix, const MlpParams& m) {
    out.emplace_back(std::string(prefix) + ".w1", m.w1);
    out.emplace_back(std::string(prefix) + ".b1", m.b1);
    out.emplace_back(std::string(prefix) + ".w2", m.w2);
    out.emplace_back(std::string(prefix) + ".b2", m.b2);
  };
  add_mlp("heads.video_disc", video_disc);
  add_mlp("heads.corr_disc", corr_disc);
  return out;
}

Tensor classify(const Tensor& feature, const Tensor& corr_feature, const HeadParams& params) {
  Tensor joint = concat(feature, corr_feature);
  if (joint.dim(0) != params.cls_weight.dim(1))
    throw ShapeError("classify: feature width " + shape_str(joint.dims()) +
                     " does not match classifier " + shape_str(params.cls_weight.dims()));
  Tensor logits = add_channel_bias(matmul(params.cls_weight, reshape(joint, {joint.dim(0), 1})),
                                   params.cls_bias);
  Tensor probs = softmax_rows(reshape(logits, {1, params.num_classes()}));
  return reshape(probs, {params.num_classes()});
}

Tensor discriminate(const Tensor& x, double lambda, const HeadParams& params,
                    Discriminator which) {
  const MlpParams& mlp = which == Discriminator::video ? params.video_disc : params.corr_disc;
  if (x.ndim() != 1 || x.dim(0) != mlp.w1.dim(1))
    throw ShapeError("discriminate: input " + shape_str(x.dims()) + " does not match " +
                     shape_str(mlp.w1.dims()));
  return mlp_prob(grad_reverse(x, lambda), mlp);
}

}  // namespace acan
