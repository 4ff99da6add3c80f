#include "acan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "acan/rng.hpp"

namespace acan {

namespace fs = std::filesystem;

std::string domain_name(Domain d) { return d == Domain::bright ? "bright" : "dark"; }
std::string split_name(Split s) { return s == Split::train ? "train" : "val"; }

void SynthConfig::validate() const {
  if (num_classes < 2 || num_classes > 6)
    throw UsageError("SynthConfig: num_classes must be in [2, 6] (one motion pattern per class)");
  if (train_per_class < 1 || val_per_class < 1)
    throw UsageError("SynthConfig: split sizes must be positive");
  if (channels != 3) throw UsageError("SynthConfig: only 3-channel video is supported");
  if (frames < 2 || height < 16 || width < 16)
    throw UsageError("SynthConfig: frame shape too small for the motion patterns");
  if (bright.brightness <= 0 || bright.brightness > 1 || dark.brightness <= 0 ||
      dark.brightness > 1)
    throw UsageError("SynthConfig: brightness scales must lie in (0, 1]");
  if (!(dark.brightness < bright.brightness))
    throw UsageError("SynthConfig: dark domain must be dimmer than bright domain");
}

namespace {

struct ShapeTrack {
  double cy, cx, vy, vx;   // per-frame translation
  double radius, grow;     // per-frame radius growth
  double orbit_r, theta, omega;  // orbit motion; orbit_r = 0 disables
};

// Motion pattern for one clip. Classes: 0 up, 1 down, 2 left, 3 right,
// 4 expand, 5 orbit.
ShapeTrack make_track(int label, int frames, int height, int width, Rng& rng) {
  ShapeTrack s{};
  double midy = height / 2.0, midx = width / 2.0;
  s.radius = rng.uniform(3.5, 5.0);
  double speed = rng.uniform(1.1, 1.6);
  double travel = speed * (frames - 1) / 2.0;
  double jit = rng.uniform(-3.0, 3.0);
  switch (label) {
    case 0: s.cy = midy + travel; s.cx = midx + jit; s.vy = -speed; break;
    case 1: s.cy = midy - travel; s.cx = midx + jit; s.vy = speed; break;
    case 2: s.cy = midy + jit; s.cx = midx + travel; s.vx = -speed; break;
    case 3: s.cy = midy + jit; s.cx = midx - travel; s.vx = speed; break;
    case 4:
      s.cy = midy + rng.uniform(-2.0, 2.0);
      s.cx = midx + rng.uniform(-2.0, 2.0);
      s.radius = rng.uniform(2.5, 3.5);
      s.grow = rng.uniform(0.45, 0.65);
      break;
    case 5:
      s.cy = midy;
      s.cx = midx;
      s.orbit_r = rng.uniform(6.0, 8.0);
      s.theta = rng.uniform(0.0, 6.283185307179586);
      s.omega = rng.uniform(0.55, 0.8);
      break;
    default:
      throw UsageError("make_track: label out of range");
  }
  return s;
}

// Base clip in [0, 1]: soft-edged disk over a flat background, one intensity
// pair per channel.
Tensor render_clip(int label, const SynthConfig& cfg, Rng& rng) {
  double bg[3], fg[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = rng.uniform(0.35, 0.55);
    fg[c] = std::min(1.0, bg[c] + rng.uniform(0.3, 0.45));
  }
  ShapeTrack track = make_track(label, cfg.frames, cfg.height, cfg.width, rng);

  std::vector<double> data(static_cast<size_t>(3) * cfg.frames * cfg.height * cfg.width);
  for (int t = 0; t < cfg.frames; ++t) {
    double cy = track.cy + track.vy * t;
    double cx = track.cx + track.vx * t;
    if (track.orbit_r > 0) {
      double a = track.theta + track.omega * t;
      cy = track.cy + track.orbit_r * std::sin(a);
      cx = track.cx + track.orbit_r * std::cos(a);
    }
    double r = track.radius + track.grow * t;
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
        double a = std::clamp(r + 0.5 - d, 0.0, 1.0);  // 1 px soft edge
        for (int c = 0; c < 3; ++c) {
          size_t idx = ((static_cast<size_t>(c) * cfg.frames + t) * cfg.height + y) * cfg.width + x;
          data[idx] = bg[c] + a * (fg[c] - bg[c]);
        }
      }
  }
  return Tensor::from_data({3, cfg.frames, cfg.height, cfg.width}, std::move(data));
}

}  // namespace

Tensor illumination_shift(const Tensor& video, double brightness, double contrast,
                          double noise_std, double gamma, uint64_t seed) {
  bool identity = brightness == 1.0 && contrast == 1.0 && gamma == 1.0 && noise_std == 0.0;
  std::vector<double> out(video.data().begin(), video.data().end());
  if (!identity) {
    Rng rng(seed);
    for (double& v : out) {
      double g = gamma == 1.0 ? v : std::pow(v, gamma);
      double shifted = brightness * (contrast * (g - 0.5) + 0.5);
      if (noise_std > 0) shifted += rng.normal() * noise_std;
      v = std::clamp(shifted, 0.0, 1.0);
    }
  }
  return Tensor::from_data(video.dims(), std::move(out));
}

VideoSet generate_dataset(const SynthConfig& cfg, Domain domain, Split split, uint64_t seed) {
  cfg.validate();
  const DomainPhotometric& photo = domain == Domain::bright ? cfg.bright : cfg.dark;
  int per_class = split == Split::train ? cfg.train_per_class : cfg.val_per_class;
  std::string tag = domain_name(domain) + "-" + split_name(split);

  VideoSet set;
  set.num_classes = cfg.num_classes;
  set.samples.resize(static_cast<size_t>(cfg.num_classes) * per_class);
  for (int cl = 0; cl < cfg.num_classes; ++cl)
    for (int k = 0; k < per_class; ++k) {
      int index = cl * per_class + k;
      Rng rng(derive_seed(seed, "clip-" + tag, index));
      Tensor base = render_clip(cl, cfg, rng);
      Tensor shifted = illumination_shift(base, photo.brightness, photo.contrast,
                                          photo.noise_std, photo.gamma,
                                          derive_seed(seed, "noise-" + tag, index));
      set.samples[index] = {std::move(shifted), cl};
    }
  return set;
}

DatasetStats dataset_stats(const VideoSet& set) {
  if (set.samples.empty()) throw UsageError("dataset_stats: empty dataset");
  DatasetStats st;
  double sum[3] = {0, 0, 0}, sumsq[3] = {0, 0, 0};
  int64_t count = 0;
  for (const VideoSample& s : set.samples) {
    int64_t inner = s.video.numel() / 3;
    for (int c = 0; c < 3; ++c) {
      const double* p = s.video.data().data() + c * inner;
      for (int64_t i = 0; i < inner; ++i) {
        sum[c] += p[i];
        sumsq[c] += p[i] * p[i];
      }
    }
    count += inner;
  }
  for (int c = 0; c < 3; ++c) {
    st.mean[c] = sum[c] / count;
    st.stddev[c] = std::sqrt(std::max(0.0, sumsq[c] / count - st.mean[c] * st.mean[c]));
  }
  return st;
}

// ------------------------------------------------------------- tensor file

namespace {

constexpr char kMagic[4] = {'A', 'C', 'T', 'N'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF64 = 2;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& in, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

double get_f64(const std::string& in, size_t off) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_tensor(const fs::path& path, const Tensor& t) {
  std::string buf;
  buf.reserve(10 + 4 * t.ndim() + 8 * t.numel());
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  buf.push_back(static_cast<char>(kDtypeF64));
  buf.push_back(static_cast<char>(t.ndim()));
  for (int d : t.dims()) put_u32(buf, static_cast<uint32_t>(d));
  for (double v : t.data()) put_f64(buf, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("write_tensor: cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw UsageError("write_tensor: write failed for " + path.string());
}

Tensor read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("read_tensor: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 10) throw ParseError(path.string() + ": truncated header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw ParseError(path.string() + ": bad magic");
  uint32_t version = get_u32(buf, 4);
  if (version != kVersion)
    throw ParseError(path.string() + ": unsupported version " + std::to_string(version));
  uint8_t dtype = static_cast<uint8_t>(buf[8]);
  if (dtype != kDtypeF64)
    throw ParseError(path.string() + ": unsupported dtype " + std::to_string(dtype));
  int ndim = static_cast<uint8_t>(buf[9]);
  if (ndim < 1) throw ParseError(path.string() + ": bad ndim 0");
  if (buf.size() < 10 + 4 * static_cast<size_t>(ndim))
    throw ParseError(path.string() + ": truncated dims");

  Shape dims(ndim);
  int64_t numel = 1;
  for (int i = 0; i < ndim; ++i) {
    uint32_t d = get_u32(buf, 10 + 4 * static_cast<size_t>(i));
    if (d == 0) throw ParseError(path.string() + ": zero extent in dims");
    dims[i] = static_cast<int>(d);
    numel *= d;
  }
  size_t payload_off = 10 + 4 * static_cast<size_t>(ndim);
  if (buf.size() != payload_off + 8 * static_cast<size_t>(numel))
    throw ParseError(path.string() + ": truncated payload (expected " +
                     std::to_string(numel) + " values)");

  std::vector<double> data(numel);
  for (int64_t i = 0; i < numel; ++i) data[i] = get_f64(buf, payload_off + 8 * i);
  return Tensor::from_data(std::move(dims), std::move(data));
}

// ---------------------------------------------------------------- datasets

void write_dataset(const VideoSet& set, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw UsageError("write_dataset: cannot open manifest in " + dir.string());
  manifest << "path,label\n";
  for (size_t i = 0; i < set.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.actn", i);
    write_tensor(dir / name, set.samples[i].video);
    manifest << name << "," << set.samples[i].label << "\n";
  }
}

VideoSet read_dataset(const fs::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw ParseError("read_dataset: missing manifest.csv in " + dir.string());
  std::string line;
  if (!std::getline(manifest, line) || line != "path,label")
    throw ParseError("read_dataset: manifest header must be exactly 'path,label'");

  VideoSet set;
  int max_label = -1;
  Shape expected;
  int lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0)
      throw ParseError("read_dataset: malformed manifest row " + std::to_string(lineno));
    std::string rel = line.substr(0, comma);
    int label;
    try {
      size_t used = 0;
      label = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ParseError("read_dataset: bad label on manifest row " + std::to_string(lineno));
    }
    if (label < 0)
      throw ParseError("read_dataset: negative label on manifest row " + std::to_string(lineno));
    Tensor video = read_tensor(dir / rel);
    if (video.ndim() != 4)
      throw ParseError("read_dataset: " + rel + " is not a C x T x H x W tensor");
    if (expected.empty())
      expected = video.dims();
    else if (video.dims() != expected)
      throw ParseError("read_dataset: " + rel + " shape " + shape_str(video.dims()) +
                       " differs from " + shape_str(expected));
    max_label = std::max(max_label, label);
    set.samples.push_back({std::move(video), label});
  }
  if (set.samples.empty()) throw ParseError("read_dataset: manifest lists no samples");
  set.num_classes = max_label + 1;
  return set;
}

}  // namespace acan
