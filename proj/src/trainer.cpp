#include "acan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "acan/correlation.hpp"
#include "acan/rng.hpp"

namespace acan {

namespace {

struct VariantTraits {
  bool video_domain = false;   // adversarial loss on the pooled video feature
  bool corr_domain = false;    // adversarial loss on the correlation feature
  bool pcd_term = false;       // class-weighted kernel discrepancy on the PCMs
  bool l2norm_term = false;    // norm restriction on the PCMs
  bool mmd_term = false;       // global MMD on video features
  bool coral_term = false;     // covariance alignment on video features
  bool target_labels = false;  // supervised on target (upper bound)
};

VariantTraits traits(Variant v) {
  switch (v) {
    case Variant::source_only: return {};
    case Variant::dann: return {.video_domain = true};
    case Variant::acan_base: return {.video_domain = true, .corr_domain = true};
    case Variant::acan: return {.video_domain = true, .corr_domain = true, .pcd_term = true};
    case Variant::acan_l2norm:
      return {.video_domain = true, .corr_domain = true, .l2norm_term = true};
    case Variant::acan_minus_lcd: return {.video_domain = true, .pcd_term = true};
    case Variant::acan_minus_lvd: return {.corr_domain = true, .pcd_term = true};
    case Variant::pcd_only: return {.pcd_term = true};
    case Variant::mmd_baseline: return {.mmd_term = true};
    case Variant::coral_baseline: return {.coral_term = true};
    case Variant::target_only: return {.target_labels = true};
  }
  throw UsageError("unknown variant");
}

bool needs_target_forward(const VariantTraits& t) {
  return t.video_domain || t.corr_domain || t.pcd_term || t.l2norm_term || t.mmd_term ||
         t.coral_term;
}

const char* kVariantNames[] = {"source_only",    "dann",           "acan_base",
                               "acan",           "acan_l2norm",    "acan_minus_Lcd",
                               "acan_minus_Lvd", "pcd_only",       "mmd_baseline",
                               "coral_baseline", "target_only"};

}  // namespace

std::string variant_name(Variant v) { return kVariantNames[static_cast<int>(v)]; }

Variant variant_from_string(const std::string& name) {
  for (int i = 0; i < static_cast<int>(std::size(kVariantNames)); ++i)
    if (name == kVariantNames[i]) return static_cast<Variant>(i);
  throw UsageError("unknown variant '" + name + "'");
}

std::vector<Variant> all_variants() {
  std::vector<Variant> out;
  for (int i = 0; i < static_cast<int>(std::size(kVariantNames)); ++i)
    out.push_back(static_cast<Variant>(i));
  return out;
}

void TrainConfig::validate() const {
  if (batch_per_domain < 2)
    throw UsageError("TrainConfig: batch size must be >= 2 (pair estimators need pairs)");
  if (epochs < 1) throw UsageError("TrainConfig: epochs must be >= 1");
  if (learning_rate <= 0) throw UsageError("TrainConfig: learning rate must be positive");
  weights.validate();
}

ModelParams ModelParams::init(const EncoderConfig& cfg, int num_classes, int disc_hidden,
                              uint64_t seed) {
  ModelParams p;
  p.encoder = EncoderParams::init(cfg, derive_seed(seed, "init-encoder"));
  int latent = std::max(1, cfg.high_channels() / 2);
  p.corr = CorrParams::init(cfg.high_channels(), latent, derive_seed(seed, "init-corr"));
  p.heads = HeadParams::init(cfg.feature_dim(), latent, num_classes, disc_hidden,
                             derive_seed(seed, "init-heads"));
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out = encoder.named_parameters();
  for (auto& kv : corr.named_parameters()) out.push_back(kv);
  for (auto& kv : heads.named_parameters()) out.push_back(kv);
  return out;
}

void sgd_step(std::span<Tensor> params, std::span<std::vector<double>> velocities, double lr,
              double momentum, double weight_decay) {
  if (params.size() != velocities.size())
    throw UsageError("sgd_step: one velocity buffer per parameter required");
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p];
    if (!t.has_grad()) throw UsageError("sgd_step: parameter without gradient");
    std::vector<double>& vel = velocities[p];
    if (vel.empty()) vel.assign(t.numel(), 0.0);
    if (static_cast<int64_t>(vel.size()) != t.numel())
      throw UsageError("sgd_step: velocity shape mismatch");
    auto data = t.mutable_data();
    auto grad = t.grad();
    for (int64_t i = 0; i < t.numel(); ++i) {
      vel[i] = momentum * vel[i] + grad[i] + weight_decay * data[i];
      data[i] -= lr * vel[i];
    }
  }
}

namespace {

struct SampleForward {
  Tensor feature;    // f
  Tensor corr_feat;  // f_c
  PixelCorrelationMatrix m;
  Tensor probs;
};

SampleForward forward_sample(const Tensor& video, const ModelParams& mp) {
  SampleForward out;
  EncoderOut enc = encode(video, mp.encoder);
  out.feature = enc.feature;
  out.m = pcm(enc.high_map, mp.corr);
  out.corr_feat = correlation_vector(enc.high_map, out.m, mp.corr);
  out.probs = classify(out.feature, out.corr_feat, mp.heads);
  return out;
}

Tensor one_hot(std::span<const int> labels, int num_classes) {
  std::vector<double> d(labels.size() * num_classes, 0.0);
  for (size_t i = 0; i < labels.size(); ++i) d[i * num_classes + labels[i]] = 1.0;
  return Tensor::from_data({static_cast<int>(labels.size()), num_classes}, std::move(d));
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  return reshape(stack_rows(scalars), {static_cast<int>(scalars.size())});
}

int argmax_class(const Tensor& probs) {
  int best = 0;
  for (int c = 1; c < probs.dim(0); ++c)
    if (probs.data()[c] > probs.data()[best]) best = c;
  return best;
}

double finite_or_throw(double v, const char* term, int epoch, int step) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite ") + term + " at epoch " +
                       std::to_string(epoch) + " step " + std::to_string(step));
  return v;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DomainData& source, const DomainData& target) {
  cfg.validate();
  VariantTraits tr = traits(cfg.variant);
  const VideoSet& labeled = tr.target_labels ? target.train : source.train;
  if (labeled.samples.empty() || target.train.samples.empty())
    throw UsageError("train: empty training set");
  int num_classes = std::max(labeled.num_classes, target.train.num_classes);

  EncoderConfig enc_cfg;
  ModelParams mp = ModelParams::init(enc_cfg, num_classes, cfg.disc_hidden, cfg.seed);

  // Only the parameters that participate in this variant's objective step.
  std::vector<Tensor> params;
  for (auto& [name, t] : mp.encoder.named_parameters()) params.push_back(t);
  for (auto& [name, t] : mp.corr.named_parameters()) params.push_back(t);
  params.push_back(mp.heads.cls_weight);
  params.push_back(mp.heads.cls_bias);
  auto push_mlp = [&](const MlpParams& m) {
    params.push_back(m.w1);
    params.push_back(m.b1);
    params.push_back(m.w2);
    params.push_back(m.b2);
  };
  if (tr.video_domain) push_mlp(mp.heads.video_disc);
  if (tr.corr_domain) push_mlp(mp.heads.corr_disc);
  std::vector<std::vector<double>> velocities(params.size());

  int batch = cfg.batch_per_domain;
  int steps_per_epoch =
      static_cast<int>(std::min(labeled.samples.size(), target.train.samples.size())) / batch;
  if (steps_per_epoch < 1)
    throw UsageError("train: datasets smaller than one batch per domain");

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    int drops = 0;
    for (int d : cfg.lr_drop_epochs)
      if (epoch > d) ++drops;
    double lr = cfg.learning_rate / std::pow(10.0, drops);

    std::vector<int> src_idx(labeled.samples.size()), tgt_idx(target.train.samples.size());
    std::iota(src_idx.begin(), src_idx.end(), 0);
    std::iota(tgt_idx.begin(), tgt_idx.end(), 0);
    Rng srng(derive_seed(cfg.seed, "shuffle-src", epoch));
    Rng trng(derive_seed(cfg.seed, "shuffle-tgt", epoch));
    srng.shuffle(src_idx);
    trng.shuffle(tgt_idx);

    EpochMetrics em;
    em.epoch = epoch;
    int labeled_correct = 0, labeled_total = 0;

    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<int> labels(batch);
      std::vector<SampleForward> fs(batch);
      for (int b = 0; b < batch; ++b) {
        const VideoSample& s = labeled.samples[src_idx[step * batch + b]];
        fs[b] = forward_sample(s.video, mp);
        labels[b] = s.label;
      }

      std::vector<SampleForward> ft;
      if (needs_target_forward(tr)) {
        ft.resize(batch);
        for (int b = 0; b < batch; ++b)
          ft[b] = forward_sample(target.train.samples[tgt_idx[step * batch + b]].video, mp);
      }

      std::vector<Tensor> prob_rows(batch);
      for (int b = 0; b < batch; ++b) prob_rows[b] = fs[b].probs;
      Tensor labels_oh = one_hot(labels, num_classes);
      Tensor l_y = classification_loss(stack_rows(prob_rows), labels_oh);
      em.l_y += finite_or_throw(l_y.value(), "L_y", epoch, step);
      Tensor total = l_y;

      for (int b = 0; b < batch; ++b) {
        if (argmax_class(fs[b].probs) == labels[b]) ++labeled_correct;
        ++labeled_total;
      }

      if (tr.video_domain) {
        std::vector<Tensor> sp(batch), tp(batch);
        for (int b = 0; b < batch; ++b) {
          sp[b] = discriminate(fs[b].feature, cfg.weights.lambda_v, mp.heads,
                               Discriminator::video);
          tp[b] = discriminate(ft[b].feature, cfg.weights.lambda_v, mp.heads,
                               Discriminator::video);
        }
        Tensor l_vd = domain_loss(stack_scalars(sp), stack_scalars(tp));
        em.l_vd += finite_or_throw(l_vd.value(), "L_vd", epoch, step);
        total = add(total, l_vd);
      }
      if (tr.corr_domain) {
        std::vector<Tensor> sp(batch), tp(batch);
        for (int b = 0; b < batch; ++b) {
          sp[b] = discriminate(fs[b].corr_feat, cfg.weights.lambda_r, mp.heads,
                               Discriminator::correlation);
          tp[b] = discriminate(ft[b].corr_feat, cfg.weights.lambda_r, mp.heads,
                               Discriminator::correlation);
        }
        Tensor l_cd = domain_loss(stack_scalars(sp), stack_scalars(tp));
        em.l_cd += finite_or_throw(l_cd.value(), "L_cd", epoch, step);
        total = add(total, l_cd);
      }

      std::vector<Tensor> pcms_s, pcms_t;
      if (tr.pcd_term || tr.l2norm_term) {
        for (int b = 0; b < batch; ++b) {
          pcms_s.push_back(fs[b].m.values);
          pcms_t.push_back(ft[b].m.values);
        }
      }

      if (tr.pcd_term) {
        // pseudo-labels: the classifier's current output, detached (Eq-style
        // soft weights, recomputed every batch)
        std::vector<Tensor> pseudo_rows(batch);
        {
          NoGradGuard ng;
          for (int b = 0; b < batch; ++b)
            pseudo_rows[b] = classify(ft[b].feature, ft[b].corr_feat, mp.heads);
        }
        ClassWeights ws = source_class_weights(labels_oh);
        ClassWeights wt = target_class_weights(stack_rows(pseudo_rows));
        double sigma = cfg.weights.sigma_policy == LossWeights::SigmaPolicy::fixed
                           ? cfg.weights.sigma_fixed
                           : [&] {
                               std::vector<Tensor> pooled = pcms_s;
                               pooled.insert(pooled.end(), pcms_t.begin(), pcms_t.end());
                               return median_bandwidth(pooled);
                             }();
        Tensor d_m = pcd(pcms_s, pcms_t, ws, wt, sigma);
        em.d_m += finite_or_throw(d_m.value(), "d_M", epoch, step);
        total = add(total, mul_scalar(d_m, cfg.weights.lambda_d));
      }

      if (tr.l2norm_term) {
        Tensor restr = norm_restriction_loss(pcms_s, pcms_t, cfg.weights.restriction_radius);
        em.d_m += finite_or_throw(restr.value(), "norm restriction", epoch, step);
        total = add(total, mul_scalar(restr, cfg.weights.lambda_dist));
      }

      if (tr.mmd_term || tr.coral_term) {
        std::vector<Tensor> feat_s(batch), feat_t(batch);
        for (int b = 0; b < batch; ++b) {
          feat_s[b] = fs[b].feature;
          feat_t[b] = ft[b].feature;
        }
        Tensor disc;
        if (tr.mmd_term) {
          double sigma = cfg.weights.sigma_policy == LossWeights::SigmaPolicy::fixed
                             ? cfg.weights.sigma_fixed
                             : [&] {
                                 std::vector<Tensor> pooled = feat_s;
                                 pooled.insert(pooled.end(), feat_t.begin(), feat_t.end());
                                 return median_bandwidth(pooled);
                               }();
          disc = mmd_loss(feat_s, feat_t, sigma);
        } else {
          disc = coral_loss(feat_s, feat_t);
        }
        em.d_m += finite_or_throw(disc.value(), "feature discrepancy", epoch, step);
        total = add(total, mul_scalar(disc, cfg.weights.lambda_d));
      }

      for (Tensor& p : params) p.zero_grad();
      backward(total);
      sgd_step(params, velocities, lr, cfg.momentum, cfg.weight_decay);

      // Gram-mean diagnostic on the last batch of the epoch
      if (step == steps_per_epoch - 1 && needs_target_forward(tr)) {
        NoGradGuard ng;
        std::vector<GramMatrix> gs, gt;
        for (int b = 0; b < batch; ++b) {
          gs.push_back(gram(fs[b].m));
          gt.push_back(gram(ft[b].m));
        }
        em.l_vs = video_covariance_loss(gs, gt);
      }
    }

    em.l_y /= steps_per_epoch;
    em.l_vd /= steps_per_epoch;
    em.l_cd /= steps_per_epoch;
    em.d_m /= steps_per_epoch;
    em.source_train_acc = static_cast<double>(labeled_correct) / labeled_total;
    em.target_val_top1 = evaluate(mp, target.val);
    em.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.metrics.push_back(em);
  }

  result.params = std::move(mp);
  return result;
}

double evaluate(const ModelParams& params, const VideoSet& dataset) {
  if (dataset.samples.empty()) throw UsageError("evaluate: empty dataset");
  NoGradGuard ng;
  int correct = 0;
  for (const VideoSample& s : dataset.samples) {
    SampleForward f = forward_sample(s.video, params);
    if (argmax_class(f.probs) == s.label) ++correct;
  }
  return static_cast<double>(correct) / dataset.samples.size();
}

// ------------------------------------------------------------------ ablation

double AblationReport::mean_final(Variant v) const {
  double acc = 0;
  int n = 0;
  for (const AblationCell& c : cells)
    if (c.variant == v) {
      acc += c.final_target_top1;
      ++n;
    }
  return n ? acc / n : 0.0;
}

double AblationReport::std_final(Variant v) const {
  double m = mean_final(v), acc = 0;
  int n = 0;
  for (const AblationCell& c : cells)
    if (c.variant == v) {
      acc += (c.final_target_top1 - m) * (c.final_target_top1 - m);
      ++n;
    }
  return n > 1 ? std::sqrt(acc / (n - 1)) : 0.0;
}

int AblationReport::ordering_count(Variant a, Variant b) const {
  int count = 0;
  for (uint64_t s : seeds)
    if (cell(a, s).final_target_top1 > cell(b, s).final_target_top1) ++count;
  return count;
}

const AblationCell& AblationReport::cell(Variant v, uint64_t seed) const {
  for (const AblationCell& c : cells)
    if (c.variant == v && c.seed == seed) return c;
  throw UsageError("AblationReport: no cell for " + variant_name(v));
}

AblationReport run_ablation(const TrainConfig& base, std::span<const Variant> variants,
                            std::span<const uint64_t> seeds, const DomainData& source,
                            const DomainData& target) {
  if (seeds.empty()) throw UsageError("run_ablation: need at least one seed");
  AblationReport report;
  report.variants.assign(variants.begin(), variants.end());
  report.seeds.assign(seeds.begin(), seeds.end());
  for (Variant v : variants)
    for (uint64_t s : seeds) {
      TrainConfig cfg = base;
      cfg.variant = v;
      cfg.seed = s;
      auto t0 = std::chrono::steady_clock::now();
      TrainResult r = train(cfg, source, target);
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const EpochMetrics& last = r.metrics.back();
      report.cells.push_back({v, s, last.target_val_top1, last.l_y, last.d_m, wall});
    }
  return report;
}

}  // namespace acan
