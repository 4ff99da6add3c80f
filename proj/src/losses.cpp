#include "acan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "acan/kernels.hpp"

namespace acan {

void LossWeights::validate() const {
  if (lambda_v < 0 || lambda_r < 0 || lambda_d < 0 || lambda_dist < 0)
    throw UsageError("LossWeights: trade-off weights must be non-negative");
  if (restriction_radius <= 0) throw UsageError("LossWeights: restriction radius must be positive");
  if (sigma_policy == SigmaPolicy::fixed && sigma_fixed <= 0)
    throw UsageError("LossWeights: fixed sigma must be positive");
}

Tensor classification_loss(const Tensor& probs, const Tensor& one_hot_labels) {
  if (probs.dims() != one_hot_labels.dims() || probs.ndim() != 2)
    throw ShapeError("classification_loss: probs " + shape_str(probs.dims()) +
                     " vs labels " + shape_str(one_hot_labels.dims()));
  int n = probs.dim(0);
  return mul_scalar(sum(mul(one_hot_labels, log_clamped(probs))), -1.0 / n);
}

Tensor domain_loss(const Tensor& src_probs, const Tensor& tgt_probs) {
  if (src_probs.ndim() != 1 || tgt_probs.ndim() != 1)
    throw ShapeError("domain_loss: expects probability vectors");
  // source label 0: -log(1 - p); target label 1: -log(p)
  Tensor ones = Tensor::full({src_probs.dim(0)}, 1.0);
  Tensor src_term = mul_scalar(mean(log_clamped(sub(ones, src_probs))), -1.0);
  Tensor tgt_term = mul_scalar(mean(log_clamped(tgt_probs)), -1.0);
  return add(src_term, tgt_term);
}

namespace {

ClassWeights normalize_columns(const Tensor& scores, double active_threshold) {
  int n = scores.dim(0), cl = scores.dim(1);
  ClassWeights out;
  out.num_classes = cl;
  out.num_samples = n;
  out.w.assign(static_cast<size_t>(cl) * n, 0.0);
  out.active.assign(cl, false);
  for (int c = 0; c < cl; ++c) {
    double mass = 0.0;
    for (int i = 0; i < n; ++i) mass += scores.at({i, c});
    if (mass < active_threshold) continue;  // all-zero row, inactive
    out.active[c] = true;
    for (int i = 0; i < n; ++i)
      out.w[static_cast<size_t>(c) * n + i] = scores.at({i, c}) / mass;
  }
  return out;
}

}  // namespace

ClassWeights source_class_weights(const Tensor& one_hot_labels) {
  if (one_hot_labels.ndim() != 2)
    throw ShapeError("source_class_weights: expected [N x Cl] one-hot matrix");
  // any positive batch mass makes a class active for hard labels
  return normalize_columns(one_hot_labels, 0.5);
}

ClassWeights target_class_weights(const Tensor& pseudo_labels, double active_threshold) {
  if (pseudo_labels.ndim() != 2)
    throw ShapeError("target_class_weights: expected [N x Cl] probability matrix");
  return normalize_columns(pseudo_labels, active_threshold);
}

Tensor gaussian_kernel(const Tensor& a, const Tensor& b, double sigma) {
  if (sigma <= 0) throw UsageError("gaussian_kernel: sigma must be positive");
  if (a.dims() != b.dims())
    throw ShapeError("gaussian_kernel: shape mismatch " + shape_str(a.dims()) + " vs " +
                     shape_str(b.dims()));
  Tensor d = sub(a, b);
  return exp(mul_scalar(sum(mul(d, d)), -1.0 / (2.0 * sigma * sigma)));
}

double median_bandwidth(std::span<const Tensor> mats) {
  if (mats.size() < 2) throw UsageError("median_bandwidth: need at least 2 matrices");
  std::vector<double> d2;
  for (size_t i = 0; i < mats.size(); ++i)
    for (size_t j = i + 1; j < mats.size(); ++j)
      d2.push_back(kernels::sqdist(mats[i].data().data(), mats[j].data().data(),
                                   mats[i].numel()));
  std::sort(d2.begin(), d2.end());
  size_t n = d2.size();
  double med = (n % 2 == 1) ? d2[n / 2] : 0.5 * (d2[n / 2 - 1] + d2[n / 2]);
  if (med == 0.0) return 1.0;
  return std::sqrt(med / 2.0);
}

// ------------------------------------------------------------ discrepancy

namespace {

// Shared fused kernel-discrepancy node:
//   sum over active classes of
//     ws' Kss ws + wt' Ktt wt - 2 ws' Kst wt,   K = exp(-||.-.||^2 / 2 sigma^2)
// scaled by `scale`. Backward distributes k'(a,b) = k(a,b) (b - a) / sigma^2
// through every weighted pair; sigma and the weights are constants.
Tensor weighted_kernel_discrepancy(const std::vector<Tensor>& xs, const std::vector<Tensor>& xt,
                                   const ClassWeights& ws, const ClassWeights& wt,
                                   const std::vector<int>& classes, double scale, double sigma,
                                   const char* name) {
  int ns = static_cast<int>(xs.size()), nt = static_cast<int>(xt.size());
  int64_t numel = xs[0].numel();
  for (const Tensor& t : xs)
    if (t.numel() != numel) throw ShapeError(std::string(name) + ": inconsistent source shapes");
  for (const Tensor& t : xt)
    if (t.numel() != numel) throw ShapeError(std::string(name) + ": inconsistent target shapes");

  auto kmat = [&](const std::vector<Tensor>& a, const std::vector<Tensor>& b, bool symmetric) {
    std::vector<double> k(a.size() * b.size());
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = symmetric ? i : 0; j < b.size(); ++j) {
        double d2 = kernels::sqdist(a[i].data().data(), b[j].data().data(), numel);
        double v = std::exp(-d2 / (2.0 * sigma * sigma));
        k[i * b.size() + j] = v;
        if (symmetric) k[j * a.size() + i] = v;
      }
    return k;
  };
  std::vector<double> kss = kmat(xs, xs, true);
  std::vector<double> ktt = kmat(xt, xt, true);
  std::vector<double> kst = kmat(xs, xt, false);

  // per-pair weight products summed over the selected classes
  std::vector<double> pss(static_cast<size_t>(ns) * ns, 0.0),
      ptt(static_cast<size_t>(nt) * nt, 0.0), pst(static_cast<size_t>(ns) * nt, 0.0);
  for (int cl : classes) {
    for (int i = 0; i < ns; ++i)
      for (int i2 = 0; i2 < ns; ++i2) pss[i * ns + i2] += ws.at(cl, i) * ws.at(cl, i2);
    for (int j = 0; j < nt; ++j)
      for (int j2 = 0; j2 < nt; ++j2) ptt[j * nt + j2] += wt.at(cl, j) * wt.at(cl, j2);
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < nt; ++j) pst[i * nt + j] += ws.at(cl, i) * wt.at(cl, j);
  }

  double value = 0.0;
  for (int i = 0; i < ns * ns; ++i) value += pss[i] * kss[i];
  for (int j = 0; j < nt * nt; ++j) value += ptt[j] * ktt[j];
  for (int i = 0; i < ns * nt; ++i) value -= 2.0 * pst[i] * kst[i];
  value *= scale;

  std::vector<Tensor> parents;
  parents.reserve(ns + nt);
  parents.insert(parents.end(), xs.begin(), xs.end());
  parents.insert(parents.end(), xt.begin(), xt.end());
  std::vector<std::shared_ptr<TensorImpl>> si, ti;
  for (const Tensor& t : xs) si.push_back(t.impl());
  for (const Tensor& t : xt) ti.push_back(t.impl());

  double inv_s2 = 1.0 / (sigma * sigma);
  return Tensor::make_node(
      {1}, {value}, std::move(parents),
      [=](const std::vector<double>& g, const std::vector<std::vector<double>*>& sinks) {
        double gs = g[0] * scale * inv_s2;
        // pair (a, b) with total coefficient c contributes c * k * (b - a) to
        // grad(a) and c * k * (a - b) to grad(b)
        auto deposit = [&](std::vector<double>* sink, double coef,
                           const std::vector<double>& self, const std::vector<double>& other) {
          if (!sink || coef == 0.0) return;
          kernels::axpy(coef, other.data(), sink->data(), numel);
          kernels::axpy(-coef, self.data(), sink->data(), numel);
        };
        for (int i = 0; i < ns; ++i)
          for (int i2 = 0; i2 < ns; ++i2) {
            if (i == i2) continue;  // zero difference
            double c = 2.0 * gs * pss[i * ns + i2] * kss[i * ns + i2];
            // both orderings appear in the sum; handled once per ordered pair
            deposit(sinks[i], c, si[i]->data, si[i2]->data);
          }
        for (int j = 0; j < nt; ++j)
          for (int j2 = 0; j2 < nt; ++j2) {
            if (j == j2) continue;
            double c = 2.0 * gs * ptt[j * nt + j2] * ktt[j * nt + j2];
            deposit(sinks[ns + j], c, ti[j]->data, ti[j2]->data);
          }
        for (int i = 0; i < ns; ++i)
          for (int j = 0; j < nt; ++j) {
            double c = -2.0 * gs * pst[i * nt + j] * kst[i * nt + j];
            deposit(sinks[i], c, si[i]->data, ti[j]->data);
            deposit(sinks[ns + j], c, ti[j]->data, si[i]->data);
          }
      },
      name);
}

}  // namespace

Tensor pcd(const std::vector<Tensor>& pcms_s, const std::vector<Tensor>& pcms_t,
           const ClassWeights& ws, const ClassWeights& wt, double sigma) {
  if (sigma <= 0) throw UsageError("pcd: sigma must be positive");
  if (ws.num_classes != wt.num_classes)
    throw UsageError("pcd: class count mismatch between source and target weights");
  if (static_cast<int>(pcms_s.size()) != ws.num_samples ||
      static_cast<int>(pcms_t.size()) != wt.num_samples)
    throw UsageError("pcd: weight matrix width does not match batch size");

  std::vector<int> joint;
  for (int c = 0; c < ws.num_classes; ++c)
    if (ws.active[c] && wt.active[c]) joint.push_back(c);
  if (joint.empty()) return Tensor::scalar(0.0);

  return weighted_kernel_discrepancy(pcms_s, pcms_t, ws, wt, joint,
                                     1.0 / static_cast<double>(joint.size()), sigma, "pcd");
}

Tensor mmd_loss(const std::vector<Tensor>& feats_s, const std::vector<Tensor>& feats_t,
                double sigma) {
  if (feats_s.empty() || feats_t.empty()) throw UsageError("mmd_loss: empty batch");
  if (sigma <= 0) throw UsageError("mmd_loss: sigma must be positive");
  // biased MMD^2 is the one-class weighted discrepancy with uniform weights
  auto uniform = [](int n) {
    ClassWeights w;
    w.num_classes = 1;
    w.num_samples = n;
    w.w.assign(n, 1.0 / n);
    w.active = {true};
    return w;
  };
  return weighted_kernel_discrepancy(feats_s, feats_t, uniform(static_cast<int>(feats_s.size())),
                                     uniform(static_cast<int>(feats_t.size())), {0}, 1.0, sigma, "mmd_loss");
}

Tensor norm_restriction_loss(const std::vector<Tensor>& pcms_s,
                             const std::vector<Tensor>& pcms_t, double radius) {
  if (radius <= 0) throw UsageError("norm_restriction_loss: radius must be positive");
  if (pcms_s.empty() || pcms_t.empty()) throw UsageError("norm_restriction_loss: empty batch");
  auto mean_norm = [](const std::vector<Tensor>& mats) {
    Tensor acc = frobenius_norm(mats[0]);
    for (size_t i = 1; i < mats.size(); ++i) acc = add(acc, frobenius_norm(mats[i]));
    return mul_scalar(acc, 1.0 / mats.size());
  };
  Tensor ds = add_scalar(mean_norm(pcms_s), -radius);
  Tensor dt = add_scalar(mean_norm(pcms_t), -radius);
  return add(mul(ds, ds), mul(dt, dt));
}

Tensor coral_loss(const std::vector<Tensor>& feats_s, const std::vector<Tensor>& feats_t) {
  if (static_cast<int>(feats_s.size()) < 2 || feats_t.size() < 2)
    throw UsageError("coral_loss: need at least 2 samples per domain");
  int d = feats_s[0].dim(0);
  auto covariance = [&](const std::vector<Tensor>& feats) {
    int n = static_cast<int>(feats.size());
    Tensor x = stack_rows(feats);  // [n x d]
    Tensor ones_row = Tensor::full({1, n}, 1.0);
    Tensor mu = mul_scalar(matmul(ones_row, x), 1.0 / n);  // [1 x d]
    Tensor centered = sub(x, matmul(Tensor::full({n, 1}, 1.0), mu));
    return mul_scalar(matmul(transpose2d(centered), centered), 1.0 / (n - 1));
  };
  Tensor diff = sub(covariance(feats_s), covariance(feats_t));
  return mul_scalar(sum(mul(diff, diff)), 1.0 / (4.0 * d * d));
}

double overall_loss(double l_y, double l_vd, double l_cd, double discrepancy,
                    const LossWeights& w, LossVariant variant) {
  double base = l_y - (w.lambda_v * l_vd + w.lambda_r * l_cd);
  switch (variant) {
    case LossVariant::base:
      return base;
    case LossVariant::pcd:
      return base + w.lambda_d * discrepancy;
    case LossVariant::l2norm:
      return base + w.lambda_dist * discrepancy;
  }
  throw UsageError("overall_loss: unknown variant");
}

}  // namespace acan
