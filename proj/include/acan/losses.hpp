#pragma once

#include <span>
#include <string>
#include <vector>

#include "acan/correlation.hpp"
#include "acan/ops.hpp"

namespace acan {

// Per-class, per-sample mixing weights. Active classes carry rows summing to
// 1; classes without batch mass carry all-zero rows and are flagged inactive.
struct ClassWeights {
  int num_classes = 0;
  int num_samples = 0;
  std::vector<double> w;        // [Cl x N], row-major
  std::vector<bool> active;     // per class

  double at(int cl, int i) const { return w[static_cast<size_t>(cl) * num_samples + i]; }
};

struct LossWeights {
  double lambda_v = 0.5;     // video domain loss weight
  double lambda_r = 1.0;     // correlation domain loss weight
  double lambda_d = 1.0;     // discrepancy weight
  double lambda_dist = 1.0;  // norm restriction weight
  double restriction_radius = 25.0;

  enum class SigmaPolicy { median_heuristic, fixed };
  SigmaPolicy sigma_policy = SigmaPolicy::median_heuristic;
  double sigma_fixed = 1.0;

  void validate() const;
};

enum class LossVariant { base, pcd, l2norm };

// Mean cross-entropy of predicted class probabilities against one-hot labels.
// Probabilities are clamped at 1e-12 before the log.
Tensor classification_loss(const Tensor& probs, const Tensor& one_hot_labels);

// Mean BCE with source labelled 0 and target labelled 1. Serves both the
// video and the correlation discriminator outputs.
Tensor domain_loss(const Tensor& src_probs, const Tensor& tgt_probs);

ClassWeights source_class_weights(const Tensor& one_hot_labels);  // [N x Cl]
ClassWeights target_class_weights(const Tensor& pseudo_labels,    // [N x Cl]
                                  double active_threshold = 1e-3);

// exp(-||a - b||_F^2 / (2 sigma^2))
Tensor gaussian_kernel(const Tensor& a, const Tensor& b, double sigma);

// sigma^2 = median of pairwise squared Frobenius distances, halved;
// falls back to sigma = 1 when the median is zero.
double median_bandwidth(std::span<const Tensor> mats);

// Class-weighted squared kernel mean-embedding distance between the source
// and target attention-matrix batches, averaged over classes active in both
// domains (0 if none). Differentiable w.r.t. the matrices; the weights and
// sigma are treated as constants.
Tensor pcd(const std::vector<Tensor>& pcms_s, const std::vector<Tensor>& pcms_t,
           const ClassWeights& ws, const ClassWeights& wt, double sigma);

// (mean_i ||Ms_i||_F - R)^2 + (mean_j ||Mt_j||_F - R)^2
Tensor norm_restriction_loss(const std::vector<Tensor>& pcms_s,
                             const std::vector<Tensor>& pcms_t, double radius);

// Unweighted biased MMD^2 over feature vectors (baseline).
Tensor mmd_loss(const std::vector<Tensor>& feats_s, const std::vector<Tensor>& feats_t,
                double sigma);

// ||Cov_s - Cov_t||_F^2 / (4 d^2) over feature vectors of width d (baseline).
Tensor coral_loss(const std::vector<Tensor>& feats_s, const std::vector<Tensor>& feats_t);

// Scalar composition of the reported objective:
//   base:   l_y - (lambda_v l_vd + lambda_r l_cd)
//   pcd:    base + lambda_d * discrepancy
//   l2norm: base + lambda_dist * discrepancy
// The training graph realizes the subtraction through gradient reversal and
// adds the domain terms; this function computes the reported value.
double overall_loss(double l_y, double l_vd, double l_cd, double discrepancy,
                    const LossWeights& w, LossVariant variant);

}  // namespace acan
