#pragma once

// Independent brute-force oracles used by the tests. Plain left-to-right
// loops only; nothing here may call into the library's numeric paths.

#include <cmath>
#include <span>
#include <vector>

#include "acan/losses.hpp"

namespace oracles {

inline double sqdist_plain(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

inline double gaussian_plain(std::span<const double> a, std::span<const double> b,
                             double sigma) {
  return std::exp(-sqdist_plain(a, b) / (2.0 * sigma * sigma));
}

// Triple-loop evaluation of the class-weighted kernel discrepancy: for every
// class active in both domains, the within-source, within-target and cross
// weighted kernel sums, averaged over those classes.
inline double pcd_plain(const std::vector<std::vector<double>>& ms,
                        const std::vector<std::vector<double>>& mt,
                        const acan::ClassWeights& ws, const acan::ClassWeights& wt,
                        double sigma) {
  std::vector<int> joint;
  for (int c = 0; c < ws.num_classes; ++c)
    if (ws.active[c] && wt.active[c]) joint.push_back(c);
  if (joint.empty()) return 0.0;
  double total = 0.0;
  for (int c : joint) {
    double term = 0.0;
    for (size_t i = 0; i < ms.size(); ++i)
      for (size_t i2 = 0; i2 < ms.size(); ++i2)
        term += ws.at(c, i) * ws.at(c, i2) * gaussian_plain(ms[i], ms[i2], sigma);
    for (size_t j = 0; j < mt.size(); ++j)
      for (size_t j2 = 0; j2 < mt.size(); ++j2)
        term += wt.at(c, j) * wt.at(c, j2) * gaussian_plain(mt[j], mt[j2], sigma);
    for (size_t i = 0; i < ms.size(); ++i)
      for (size_t j = 0; j < mt.size(); ++j)
        term -= 2.0 * ws.at(c, i) * wt.at(c, j) * gaussian_plain(ms[i], mt[j], sigma);
    total += term;
  }
  return total / joint.size();
}

// Biased MMD^2, plain double loop.
inline double mmd_plain(const std::vector<std::vector<double>>& xs,
                        const std::vector<std::vector<double>>& xt, double sigma) {
  double ss = 0, tt = 0, st = 0;
  for (const auto& a : xs)
    for (const auto& b : xs) ss += gaussian_plain(a, b, sigma);
  for (const auto& a : xt)
    for (const auto& b : xt) tt += gaussian_plain(a, b, sigma);
  for (const auto& a : xs)
    for (const auto& b : xt) st += gaussian_plain(a, b, sigma);
  double ns = xs.size(), nt = xt.size();
  return ss / (ns * ns) + tt / (nt * nt) - 2.0 * st / (ns * nt);
}

// Intensity-weighted row/column centroid of one frame, channel-averaged and
// thresholded at the midpoint between frame min and max.
inline std::pair<double, double> frame_centroid(std::span<const double> video, int channels,
                                                int frames, int height, int width, int frame) {
  std::vector<double> gray(static_cast<size_t>(height) * width, 0.0);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        gray[y * width + x] +=
            video[((static_cast<size_t>(c) * frames + frame) * height + y) * width + x] /
            channels;
  double lo = gray[0], hi = gray[0];
  for (double v : gray) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double thr = 0.5 * (lo + hi);
  double wsum = 0, ysum = 0, xsum = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double w = gray[y * width + x] - thr;
      if (w <= 0) continue;
      wsum += w;
      ysum += w * y;
      xsum += w * x;
    }
  return {ysum / wsum, xsum / wsum};
}

}  // namespace oracles
