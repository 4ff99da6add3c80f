#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acan/tensor.hpp"

namespace acan {

enum class Domain { bright, dark };
enum class Split { train, val };

std::string domain_name(Domain d);
std::string split_name(Split s);

// Photometric transform parameters of one domain.
struct DomainPhotometric {
  double brightness = 1.0;  // in (0, 1]
  double contrast = 1.0;
  double noise_std = 0.0;
  double gamma = 1.0;
};

// Moving-shape video benchmark: the motion pattern encodes the action class,
// the photometric transform encodes the domain, so adaptation gains are
// attributable to bridging the photometric gap alone.
struct SynthConfig {
  int num_classes = 6;  // translate up/down/left/right, expand, orbit
  int train_per_class = 60;
  int val_per_class = 24;
  int channels = 3;
  int frames = 8;
  int height = 32;
  int width = 32;
  DomainPhotometric bright{0.95, 1.0, 0.01, 1.0};
  DomainPhotometric dark{0.18, 0.85, 0.015, 1.25};

  void validate() const;
};

struct VideoSample {
  Tensor video;  // [C x T x H x W], values in [0, 1]
  int label;
};

struct VideoSet {
  std::vector<VideoSample> samples;
  int num_classes = 0;
};

// Pure function of (cfg, seed, domain, split): the same arguments always
// produce bit-identical tensors.
VideoSet generate_dataset(const SynthConfig& cfg, Domain domain, Split split, uint64_t seed);

// pixelwise b * (c * (v^gamma - 0.5) + 0.5) + noise, clipped to [0, 1]
Tensor illumination_shift(const Tensor& video, double brightness, double contrast,
                          double noise_std, double gamma, uint64_t seed);

struct DatasetStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

// Per-channel mean and (population) std over every pixel of every frame.
DatasetStats dataset_stats(const VideoSet& set);

// Tensor file: magic "ACTN" | u32 LE version=1 | u8 dtype=2 (f64) | u8 ndim |
// ndim x u32 LE extents | row-major f64 LE payload.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// One tensor file per sample plus a `manifest.csv` with header `path,label`.
void write_dataset(const VideoSet& set, const std::filesystem::path& dir);
// Ingests any directory in that layout; validates shapes agree and labels are
// in-range 0-based integers.
VideoSet read_dataset(const std::filesystem::path& dir);

}  // namespace acan
