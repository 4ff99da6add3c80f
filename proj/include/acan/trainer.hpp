#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acan/data.hpp"
#include "acan/encoder.hpp"
#include "acan/heads.hpp"
#include "acan/losses.hpp"

namespace acan {

enum class Variant {
  source_only,
  dann,
  acan_base,
  acan,
  acan_l2norm,
  acan_minus_lcd,
  acan_minus_lvd,
  pcd_only,
  mmd_baseline,
  coral_baseline,
  target_only,
};

std::string variant_name(Variant v);
Variant variant_from_string(const std::string& name);
std::vector<Variant> all_variants();

struct TrainConfig {
  Variant variant = Variant::acan;
  LossWeights weights;
  int epochs = 40;
  int batch_per_domain = 8;
  double learning_rate = 0.005;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> lr_drop_epochs = {20, 35};  // lr divided by 10 after each
  uint64_t seed = 1;
  int disc_hidden = 64;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double l_y = 0, l_vd = 0, l_cd = 0, d_m = 0;
  double l_vs = 0;  // Gram-mean diagnostic, last batch of the epoch
  double source_train_acc = 0;
  double target_val_top1 = 0;
  double wall_seconds = 0;
};

struct ModelParams {
  EncoderParams encoder;
  CorrParams corr;
  HeadParams heads;

  static ModelParams init(const EncoderConfig& cfg, int num_classes, int disc_hidden,
                          uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

// velocity = momentum * velocity + grad + weight_decay * param;
// param -= lr * velocity
void sgd_step(std::span<Tensor> params, std::span<std::vector<double>> velocities, double lr,
              double momentum, double weight_decay);

struct DomainData {
  VideoSet train;
  VideoSet val;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> metrics;
};

// Adversarial training loop: paired source/target batches, variant-selected
// loss graph (domain losses enter through gradient reversal, so a single
// downhill step realizes the min-max), SGD with momentum and weight decay,
// per-epoch evaluation on the target validation split. Deterministic for a
// fixed config and seed.
TrainResult train(const TrainConfig& cfg, const DomainData& source, const DomainData& target);

// Top-1 accuracy; argmax ties break toward the lowest class index.
double evaluate(const ModelParams& params, const VideoSet& dataset);

struct AblationCell {
  Variant variant;
  uint64_t seed;
  double final_target_top1;
  double final_l_y;
  double final_d_m;
  double wall_seconds;
};

struct AblationReport {
  std::vector<Variant> variants;
  std::vector<uint64_t> seeds;
  std::vector<AblationCell> cells;  // variants x seeds, variant-major

  double mean_final(Variant v) const;
  double std_final(Variant v) const;
  // number of seeds where `a`'s final beats `b`'s final
  int ordering_count(Variant a, Variant b) const;
  const AblationCell& cell(Variant v, uint64_t seed) const;
};

AblationReport run_ablation(const TrainConfig& base, std::span<const Variant> variants,
                            std::span<const uint64_t> seeds, const DomainData& source,
                            const DomainData& target);

}  // namespace acan
