#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "acan/correlation.hpp"
#include "acan/encoder.hpp"
#include "acan/gradcheck.hpp"
#include "acan/heads.hpp"
#include "acan/rng.hpp"

using namespace acan;

namespace {

Tensor random_tensor(Shape dims, Rng& rng, bool rg = false) {
  std::vector<double> d(shape_numel(dims));
  for (double& v : d) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(dims), std::move(d), rg);
}

void fill(Tensor t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

// Tiny encoder for gradient checks; arithmetic is size-independent.
EncoderConfig tiny_encoder_config() {
  EncoderConfig cfg;
  cfg.in_channels = 2;
  cfg.frames = 4;
  cfg.height = 8;
  cfg.width = 8;
  cfg.channels = {2, 3};
  cfg.strides = {{1, 2, 2}, {2, 2, 2}};
  cfg.high_block = 0;
  return cfg;
}

}  // namespace

TEST_CASE("encoder default shapes match the stride arithmetic") {
  EncoderConfig cfg;  // 3x8x32x32, channels 16/32/64
  // independent shape computation from the declared strides
  int t = cfg.frames, h = cfg.height, w = cfg.width;
  Shape expected_high;
  for (size_t b = 0; b < cfg.channels.size(); ++b) {
    t = (t + 2 - 3) / cfg.strides[b].t + 1;
    h = (h + 2 - 3) / cfg.strides[b].h + 1;
    w = (w + 2 - 3) / cfg.strides[b].w + 1;
    if (static_cast<int>(b) == cfg.high_block) expected_high = {cfg.channels[b], t, h, w};
  }
  CHECK(expected_high == Shape{32, 4, 8, 8});

  EncoderParams p = EncoderParams::init(cfg, 11);
  Rng rng(derive_seed(11, "enc-shape"));
  EncoderOut out = encode(random_tensor({3, 8, 32, 32}, rng), p);
  CHECK(out.feature.dims() == Shape{64});
  CHECK(out.high_map.dims() == expected_high);
  int n_positions = out.high_map.dim(1) * out.high_map.dim(2) * out.high_map.dim(3);
  CHECK(n_positions == 256);
  // high map keeps enough extent for a meaningful attention matrix
  CHECK(out.high_map.dim(1) >= 2);
  CHECK(out.high_map.dim(2) >= 2);
  CHECK(out.high_map.dim(3) >= 2);
}

TEST_CASE("encoder is deterministic and literally weight-shared") {
  EncoderConfig cfg = tiny_encoder_config();
  EncoderParams p = EncoderParams::init(cfg, 3);
  Rng rng(derive_seed(3, "enc-det"));
  Tensor v = random_tensor({2, 4, 8, 8}, rng);
  EncoderOut a = encode(v, p);
  EncoderOut b = encode(v, p);  // same params object: the sharing is literal
  CHECK(std::memcmp(a.feature.data().data(), b.feature.data().data(),
                    a.feature.numel() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.high_map.data().data(), b.high_map.data().data(),
                    a.high_map.numel() * sizeof(double)) == 0);
}

TEST_CASE("encoder rejects mismatched input") {
  EncoderConfig cfg = tiny_encoder_config();
  EncoderParams p = EncoderParams::init(cfg, 3);
  CHECK_THROWS_AS(encode(Tensor::zeros({2, 4, 8, 9}), p), ShapeError);
}

TEST_CASE("encoder gradients w.r.t. all parameters") {
  EncoderConfig cfg = tiny_encoder_config();
  EncoderParams p = EncoderParams::init(cfg, 5);
  Rng rng(derive_seed(5, "enc-grad"));
  Tensor v = random_tensor({2, 4, 8, 8}, rng);
  auto f = [&] {
    EncoderOut out = encode(v, p);
    return add(sum(out.feature), sum(out.high_map));
  };
  for (auto& [name, param] : p.named_parameters()) {
    INFO(name);
    CHECK(finite_diff_check(f, param) <= 1e-4);
  }
}

TEST_CASE("pcm of a constant map is exactly uniform") {
  Tensor fh = Tensor::full({4, 2, 2, 2}, 0.3);
  CorrParams cp = CorrParams::init(4, 2, 9);
  PixelCorrelationMatrix m = pcm(fh, cp);
  CHECK(m.values.dims() == Shape{8, 8});
  for (double v : m.values.data()) CHECK(v == doctest::Approx(1.0 / 8).epsilon(1e-14));
}

TEST_CASE("pcm matches a direct out-of-graph recomputation") {
  // N = 4 positions, hand evaluation of softmax(q^T k)
  Rng rng(derive_seed(9, "pcm-hand"));
  Tensor fh = random_tensor({2, 1, 2, 2}, rng);
  CorrParams cp = CorrParams::init(2, 1, 10);
  PixelCorrelationMatrix m = pcm(fh, cp);

  const double wq0 = cp.query_proj.data()[0], wq1 = cp.query_proj.data()[1];
  const double wk0 = cp.key_proj.data()[0], wk1 = cp.key_proj.data()[1];
  double q[4], k[4];
  for (int p = 0; p < 4; ++p) {
    q[p] = wq0 * fh.data()[p] + wq1 * fh.data()[4 + p];
    k[p] = wk0 * fh.data()[p] + wk1 * fh.data()[4 + p];
  }
  for (int row = 0; row < 4; ++row) {
    double logits[4], mx = -1e300;
    for (int col = 0; col < 4; ++col) {
      logits[col] = q[row] * k[col];
      mx = std::max(mx, logits[col]);
    }
    double z = 0;
    for (int col = 0; col < 4; ++col) z += std::exp(logits[col] - mx);
    for (int col = 0; col < 4; ++col) {
      double expect = std::exp(logits[col] - mx) / z;
      CHECK(std::abs(m.values.at({row, col}) - expect) <= 1e-12);
    }
  }
}

TEST_CASE("pcm rows are stochastic on random inputs") {
  CorrParams cp = CorrParams::init(3, 2, 21);
  Rng rng(derive_seed(21, "pcm-rows"));
  for (int it = 0; it < 100; ++it) {
    Tensor fh = random_tensor({3, 2, 2, 3}, rng);
    PixelCorrelationMatrix m = pcm(fh, cp);
    int n = m.positions();
    for (int r = 0; r < n; ++r) {
      double s = 0;
      for (int c = 0; c < n; ++c) {
        double v = m.values.at({r, c});
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("pcm is permutation-equivariant over positions") {
  // T'=H'=1 so positions are the W axis; permuting them permutes rows and
  // columns of the attention matrix by the same permutation
  Rng rng(derive_seed(13, "pcm-perm"));
  Tensor fh = random_tensor({3, 1, 1, 5}, rng);
  CorrParams cp = CorrParams::init(3, 2, 13);
  int perm[5] = {3, 0, 4, 1, 2};
  std::vector<double> permuted(fh.numel());
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 5; ++p) permuted[c * 5 + p] = fh.data()[c * 5 + perm[p]];
  PixelCorrelationMatrix m = pcm(fh, cp);
  PixelCorrelationMatrix mp = pcm(Tensor::from_data({3, 1, 1, 5}, std::move(permuted)), cp);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      CHECK(std::abs(mp.values.at({r, c}) - m.values.at({perm[r], perm[c]})) <= 1e-12);
}

TEST_CASE("correlation vector under uniform attention is the value mean") {
  Rng rng(derive_seed(17, "corr-uniform"));
  Tensor fh = random_tensor({2, 1, 2, 2}, rng);
  CorrParams cp = CorrParams::init(2, 2, 17);
  PixelCorrelationMatrix uniform{Tensor::full({4, 4}, 0.25), {1, 2, 2}};
  Tensor fc = correlation_vector(fh, uniform, cp);
  // mean over positions of the value projection
  Tensor v = conv3d(fh, cp.value_proj, {1, 1, 1}, {0, 0, 0});
  for (int c = 0; c < 2; ++c) {
    double mean = 0;
    for (int p = 0; p < 4; ++p) mean += v.data()[c * 4 + p] / 4.0;
    CHECK(fc.data()[c] == doctest::Approx(mean).epsilon(1e-13));
  }
}

TEST_CASE("correlation vector hand case: near-identity attention") {
  // value projection = identity on one channel, so values are [1, 3];
  // near-identity rows mix almost nothing and the pool gives their mean 2,
  // independent of the mixing epsilon
  Tensor fh = Tensor::from_data({1, 1, 1, 2}, {1.0, 3.0});
  CorrParams cp = CorrParams::init(1, 1, 1);
  fill(cp.value_proj, 1.0);
  double eps = 1e-6;
  PixelCorrelationMatrix m{
      Tensor::from_data({2, 2}, {1 - eps, eps, eps, 1 - eps}), {1, 1, 2}};
  Tensor fc = correlation_vector(fh, m, cp);
  CHECK(fc.numel() == 1);
  CHECK(fc.value() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("correlation vector rejects mismatched attention matrix") {
  Tensor fh = Tensor::zeros({1, 1, 1, 3});
  CorrParams cp = CorrParams::init(1, 1, 2);
  PixelCorrelationMatrix wrong{Tensor::full({2, 2}, 0.5), {1, 1, 2}};
  CHECK_THROWS_AS(correlation_vector(fh, wrong, cp), ShapeError);
}

TEST_CASE("gradients flow through pcm and correlation_vector") {
  Rng rng(derive_seed(23, "corr-grad"));
  Tensor fh = random_tensor({2, 1, 2, 2}, rng, true);
  CorrParams cp = CorrParams::init(2, 1, 23);
  auto f = [&] {
    PixelCorrelationMatrix m = pcm(fh, cp);
    return sum(correlation_vector(fh, m, cp));
  };
  CHECK(finite_diff_check(f, fh) <= 1e-4);
  CHECK(finite_diff_check(f, cp.query_proj) <= 1e-4);
  CHECK(finite_diff_check(f, cp.key_proj) <= 1e-4);
  CHECK(finite_diff_check(f, cp.value_proj) <= 1e-4);
}

TEST_CASE("gram hand case and structural properties") {
  PixelCorrelationMatrix m{Tensor::from_data({2, 2}, {0.5, 0.5, 0.5, 0.5}), {1, 1, 2}};
  GramMatrix g = gram(m);
  for (double v : g.values.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(derive_seed(29, "gram"));
  CorrParams cp = CorrParams::init(2, 2, 29);
  for (int it = 0; it < 100; ++it) {
    Tensor fh = random_tensor({2, 1, 2, 2}, rng);
    GramMatrix gi = gram(pcm(fh, cp));
    int n = gi.values.dim(0);
    for (int r = 0; r < n; ++r)
      for (int c = r + 1; c < n; ++c)
        CHECK(std::abs(gi.values.at({r, c}) - gi.values.at({c, r})) <= 1e-12);
    for (int probe = 0; probe < 50; ++probe) {
      std::vector<double> x(n);
      for (double& v : x) v = rng.uniform(-1, 1);
      double quad = 0;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) quad += x[r] * gi.values.at({r, c}) * x[c];
      CHECK(quad >= -1e-9);
    }
  }
}

TEST_CASE("gram of uniform attention has constant entries 1/N") {
  Tensor fh = Tensor::full({2, 1, 2, 2}, 1.0);
  CorrParams cp = CorrParams::init(2, 1, 31);
  GramMatrix g = gram(pcm(fh, cp));
  for (double v : g.values.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("video_covariance_loss values and symmetry") {
  GramMatrix g2{Tensor::from_data({1, 1}, {2.0})};
  GramMatrix g5{Tensor::from_data({1, 1}, {5.0})};
  std::vector<GramMatrix> a{g2}, b{g5};
  CHECK(video_covariance_loss(a, b) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(video_covariance_loss(b, a) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(video_covariance_loss(a, a) == 0.0);

  // random batch against direct mean-then-norm computation
  Rng rng(derive_seed(37, "vcl"));
  std::vector<GramMatrix> gs, gt;
  for (int i = 0; i < 3; ++i) gs.push_back({random_tensor({3, 3}, rng)});
  for (int i = 0; i < 4; ++i) gt.push_back({random_tensor({3, 3}, rng)});
  double expect = 0;
  for (int e = 0; e < 9; ++e) {
    double ms = 0, mt = 0;
    for (auto& g : gs) ms += g.values.data()[e] / 3.0;
    for (auto& g : gt) mt += g.values.data()[e] / 4.0;
    expect += (ms - mt) * (ms - mt);
  }
  CHECK(std::abs(video_covariance_loss(gs, gt) - expect) <= 1e-12);
  CHECK_THROWS_AS(video_covariance_loss({}, gt), UsageError);
}

TEST_CASE("classify: zero weights give uniform probabilities") {
  HeadParams hp = HeadParams::init(4, 2, 5, 8, 41);
  fill(hp.cls_weight, 0.0);
  fill(hp.cls_bias, 0.0);
  Tensor probs = classify(Tensor::full({4}, 0.7), Tensor::full({2}, -0.3), hp);
  for (double v : probs.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("classify: probabilities sum to one; hand logit case") {
  Rng rng(derive_seed(43, "classify"));
  HeadParams hp = HeadParams::init(4, 2, 3, 8, 43);
  Tensor probs = classify(random_tensor({4}, rng), random_tensor({2}, rng), hp);
  double s = 0;
  for (double v : probs.data()) s += v;
  CHECK(std::abs(s - 1.0) <= 1e-12);

  // logits (0, ln 3) -> probabilities (0.25, 0.75)
  HeadParams two = HeadParams::init(1, 1, 2, 4, 44);
  fill(two.cls_weight, 0.0);
  two.cls_bias.mutable_data()[0] = 0.0;
  two.cls_bias.mutable_data()[1] = std::log(3.0);
  Tensor p2 = classify(Tensor::zeros({1}), Tensor::zeros({1}), two);
  CHECK(p2.data()[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p2.data()[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("classify depends on both feature blocks unless weights vanish") {
  Rng rng(derive_seed(47, "both-feats"));
  HeadParams hp = HeadParams::init(3, 2, 4, 8, 47);
  Tensor f = random_tensor({3}, rng);
  Tensor fc = random_tensor({2}, rng);
  Tensor base = classify(f, fc, hp);
  Tensor zf = classify(Tensor::zeros({3}), fc, hp);
  Tensor zc = classify(f, Tensor::zeros({2}), hp);
  bool differs_f = false, differs_c = false;
  for (int i = 0; i < 4; ++i) {
    differs_f = differs_f || std::abs(base.data()[i] - zf.data()[i]) > 1e-9;
    differs_c = differs_c || std::abs(base.data()[i] - zc.data()[i]) > 1e-9;
  }
  CHECK(differs_f);
  CHECK(differs_c);
}

TEST_CASE("discriminate: zero weights give 0.5; forward ignores lambda") {
  HeadParams hp = HeadParams::init(4, 2, 3, 8, 53);
  fill(hp.video_disc.w1, 0.0);
  fill(hp.video_disc.b1, 0.0);
  fill(hp.video_disc.w2, 0.0);
  fill(hp.video_disc.b2, 0.0);
  Tensor x = Tensor::full({4}, 1.3);
  CHECK(discriminate(x, 1.0, hp, Discriminator::video).value() == doctest::Approx(0.5));

  Rng rng(derive_seed(53, "disc"));
  HeadParams hp2 = HeadParams::init(4, 2, 3, 8, 54);
  Tensor y = random_tensor({4}, rng);
  double v0 = discriminate(y, 0.0, hp2, Discriminator::video).value();
  double v05 = discriminate(y, 0.5, hp2, Discriminator::video).value();
  double v1 = discriminate(y, 1.0, hp2, Discriminator::video).value();
  CHECK(v0 == v05);
  CHECK(v05 == v1);
  CHECK(v1 > 0.0);
  CHECK(v1 < 1.0);
}

TEST_CASE("discriminate: input gradient flips sign exactly with lambda") {
  Rng rng(derive_seed(59, "disc-grl"));
  HeadParams hp = HeadParams::init(3, 2, 4, 8, 59);
  Tensor x = Tensor::from_data({3}, {0.4, -0.2, 0.9}, true);
  auto grad_with = [&](double lambda) {
    x.zero_grad();
    backward(discriminate(x, lambda, hp, Discriminator::video));
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  auto gp = grad_with(1.0);
  auto gn = grad_with(-1.0);
  for (size_t i = 0; i < gp.size(); ++i) CHECK(gp[i] == -gn[i]);
}

TEST_CASE("discriminator descends on the domain loss while the feature path ascends") {
  Rng rng(derive_seed(61, "disc-minmax"));
  HeadParams hp = HeadParams::init(3, 2, 4, 8, 61);
  Tensor xs = random_tensor({3}, rng, true);
  Tensor xt = random_tensor({3}, rng, true);
  auto loss_fn = [&](double lambda) {
    Tensor ps = discriminate(xs, lambda, hp, Discriminator::video);
    Tensor pt = discriminate(xt, lambda, hp, Discriminator::video);
    // source label 0, target label 1
    return add(mul_scalar(log_clamped(sub(Tensor::scalar(1.0), ps)), -1.0),
               mul_scalar(log_clamped(pt), -1.0));
  };
  // gradient step on the discriminator parameters lowers the loss
  double before = loss_fn(1.0).value();
  for (Tensor t : {hp.video_disc.w1, hp.video_disc.b1, hp.video_disc.w2, hp.video_disc.b2})
    t.zero_grad();
  backward(loss_fn(1.0));
  for (Tensor t : {hp.video_disc.w1, hp.video_disc.b1, hp.video_disc.w2, hp.video_disc.b2}) {
    auto d = t.mutable_data();
    for (int64_t i = 0; i < t.numel(); ++i) d[i] -= 0.01 * t.grad()[i];
  }
  CHECK(loss_fn(1.0).value() < before);

  // while the reversed input gradient points uphill: moving the features
  // along -grad (the optimizer direction) increases the same loss
  xs.zero_grad();
  xt.zero_grad();
  backward(loss_fn(1.0));
  double base = loss_fn(1.0).value();
  auto dxs = xs.mutable_data();
  for (int64_t i = 0; i < xs.numel(); ++i) dxs[i] -= 0.05 * xs.grad()[i];
  auto dxt = xt.mutable_data();
  for (int64_t i = 0; i < xt.numel(); ++i) dxt[i] -= 0.05 * xt.grad()[i];
  CHECK(loss_fn(1.0).value() > base);
}

TEST_CASE("discriminate rejects wrong input width") {
  HeadParams hp = HeadParams::init(4, 2, 3, 8, 67);
  CHECK_THROWS_AS(discriminate(Tensor::zeros({2}), 1.0, hp, Discriminator::video), ShapeError);
  CHECK_THROWS_AS(discriminate(Tensor::zeros({4}), 1.0, hp, Discriminator::correlation),
                  ShapeError);
}
