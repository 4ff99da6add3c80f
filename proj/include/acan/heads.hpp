#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "acan/ops.hpp"

namespace acan {

struct MlpParams {
  Tensor w1, b1;  // [hidden x in], [hidden]
  Tensor w2, b2;  // [1 x hidden], [1]
};

// Action classifier plus the two domain discriminators. Discriminators sit
// behind a gradient reversal, so one downhill optimizer step trains them to
// separate domains while pushing the feature path the other way.
struct HeadParams {
  Tensor cls_weight;  // [Cl x (C_f + C')]
  Tensor cls_bias;    // [Cl]
  MlpParams video_disc;  // C_f -> hidden -> 1
  MlpParams corr_disc;   // C' -> hidden -> 1

  static HeadParams init(int feature_dim, int corr_dim, int num_classes, int hidden,
                         uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  int num_classes() const { return cls_weight.dim(0); }
};

// Class probabilities from the concatenated feature; argmax is the prediction.
Tensor classify(const Tensor& feature, const Tensor& corr_feature, const HeadParams& params);

enum class Discriminator { video, correlation };

// Domain probability in (0,1) for one feature vector. lambda only affects the
// backward pass (reversal strength); the forward value ignores it.
Tensor discriminate(const Tensor& x, double lambda, const HeadParams& params,
                    Discriminator which);

}  // namespace acan
