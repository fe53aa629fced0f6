#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "hashcond/autodiff/ops_image.hpp"
#include "hashcond/core/rng.hpp"
#include "hashcond/core/serialize.hpp"
#include "hashcond/core/tensor.hpp"

namespace hashcond {

namespace fs = std::filesystem;

struct NormStats {
  std::vector<double> mean, stdev;  // per channel, computed on the train split
};

struct LabeledDataset {
  Tensor<float> images;  // [N,C,H,W] in normalized (z-scored) space
  std::vector<int> labels;
  std::string split_tag;  // train | database | query
  int num_classes = 0;
  std::vector<std::vector<int>> class_index;
  NormStats norm_stats;

  int count() const { return images.shape.d[0]; }
  int channels() const { return images.shape.d[1]; }
  int side() const { return images.shape.d[2]; }
};

inline std::vector<std::vector<int>> build_class_index(const std::vector<int>& labels, int c) {
  std::vector<std::vector<int>> idx(c);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw ValidationError("label " + std::to_string(labels[i]) + " outside [0," +
                            std::to_string(c) + ") at row " + std::to_string(i));
    idx[labels[i]].push_back((int)i);
  }
  return idx;
}

inline NormStats compute_norm_stats(const Tensor<float>& raw01) {
  const int n = raw01.shape.d[0], c = raw01.shape.d[1];
  const int64_t plane = (int64_t)raw01.shape.d[2] * raw01.shape.d[3];
  NormStats st;
  st.mean.assign(c, 0.0);
  st.stdev.assign(c, 0.0);
  if (n == 0) throw ValidationError("empty dataset: zero images");
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float* p = raw01.image(i) + plane * ch;
      for (int64_t k = 0; k < plane; ++k) st.mean[ch] += p[k];
    }
  for (int ch = 0; ch < c; ++ch) st.mean[ch] /= double(n) * plane;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float* p = raw01.image(i) + plane * ch;
      for (int64_t k = 0; k < plane; ++k) {
        const double d = p[k] - st.mean[ch];
        st.stdev[ch] += d * d;
      }
    }
  for (int ch = 0; ch < c; ++ch) {
    st.stdev[ch] = std::sqrt(st.stdev[ch] / (double(n) * plane));
    if (st.stdev[ch] < 1e-8) st.stdev[ch] = 1.0;
  }
  return st;
}

inline void normalize_inplace(Tensor<float>& t, const NormStats& st) {
  const int n = t.shape.d[0], c = t.shape.d[1];
  const int64_t plane = (int64_t)t.shape.d[2] * t.shape.d[3];
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      float* p = t.image(i) + plane * ch;
      const float m = (float)st.mean[ch], inv = (float)(1.0 / st.stdev[ch]);
      for (int64_t k = 0; k < plane; ++k) p[k] = (p[k] - m) * inv;
    }
}

inline void denormalize_inplace(Tensor<float>& t, const NormStats& st) {
  const int n = t.shape.d[0], c = t.shape.d[1];
  const int64_t plane = (int64_t)t.shape.d[2] * t.shape.d[3];
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      float* p = t.image(i) + plane * ch;
      const float m = (float)st.mean[ch], s = (float)st.stdev[ch];
      for (int64_t k = 0; k < plane; ++k) p[k] = p[k] * s + m;
    }
}

// Clamp normalized pixels to the image of [0,1] under the channel stats; the
// export-time constraint on synthetic pixels.
inline void clamp_to_unit_range(Tensor<float>& t, const NormStats& st) {
  const int n = t.shape.d[0], c = t.shape.d[1];
  const int64_t plane = (int64_t)t.shape.d[2] * t.shape.d[3];
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      float* p = t.image(i) + plane * ch;
      const float lo = (float)((0.0 - st.mean[ch]) / st.stdev[ch]);
      const float hi = (float)((1.0 - st.mean[ch]) / st.stdev[ch]);
      for (int64_t k = 0; k < plane; ++k) p[k] = std::clamp(p[k], lo, hi);
    }
}

// FNV-1a over image bytes and labels; the immutability and fairness receipts.
inline uint64_t dataset_checksum(const LabeledDataset& ds) {
  uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&h](const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001B3ull;
    }
  };
  mix(ds.images.data.data(), ds.images.data.size() * sizeof(float));
  mix(ds.labels.data(), ds.labels.size() * sizeof(int));
  return h;
}

// ------------------------------- PPM I/O -----------------------------------

inline void save_ppm(const fs::path& path, const Tensor<float>& raw01, int index) {
  const int c = raw01.shape.d[1], h = raw01.shape.d[2], w = raw01.shape.d[3];
  if (c != 3) throw ValidationError("save_ppm: need 3 channels");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "P6\n" << w << " " << h << "\n255\n";
  const int64_t plane = (int64_t)h * w;
  const float* img = raw01.image(index);
  for (int64_t k = 0; k < plane; ++k)
    for (int ch = 0; ch < 3; ++ch) {
      const float v = std::clamp(img[ch * plane + k], 0.0f, 1.0f);
      f.put((char)(unsigned char)std::lround(v * 255.0f));
    }
  if (!f) throw IoError("short write: " + path.string());
}

// P6 parser tolerant of comments and arbitrary whitespace.
inline Tensor<float> load_ppm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  auto next_token = [&f, &path]() {
    std::string tok;
    int ch;
    while ((ch = f.get()) != EOF) {
      if (ch == '#') {
        while ((ch = f.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (!std::isspace(ch)) {
        tok.push_back((char)ch);
        while ((ch = f.peek()) != EOF && !std::isspace(ch)) tok.push_back((char)f.get());
        return tok;
      }
    }
    throw CorruptionError("truncated PPM header: " + path.string());
  };
  if (next_token() != "P6") throw CorruptionError("not a P6 PPM: " + path.string());
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw CorruptionError("unsupported PPM header: " + path.string());
  f.get();  // single whitespace after maxval
  std::vector<unsigned char> buf((size_t)w * h * 3);
  f.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)buf.size());
  if (!f) throw CorruptionError("truncated PPM payload: " + path.string());
  Tensor<float> out(Shape::of(1, 3, h, w));
  const int64_t plane = (int64_t)h * w;
  for (int64_t k = 0; k < plane; ++k)
    for (int ch = 0; ch < 3; ++ch)
      out.data[ch * plane + k] = buf[k * 3 + ch] / float(maxval);
  return out;
}

// ------------------------- raw split construction --------------------------

namespace detail {

struct RawSplit {
  Tensor<float> images;  // [N,C,H,W] in [0,1]
  std::vector<int> labels;
  int num_classes = 0;
};

inline RawSplit load_cifar10_raw(const fs::path& root, const std::string& split) {
  fs::path dir = root / "cifar10";
  if (fs::exists(dir / "cifar-10-batches-bin")) dir = dir / "cifar-10-batches-bin";
  std::vector<fs::path> files;
  if (split == "query") {
    files.push_back(dir / "test_batch.bin");
  } else {
    for (int i = 1; i <= 5; ++i)
      files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  }
  for (const auto& p : files)
    if (!fs::exists(p)) throw IoError("missing CIFAR-10 batch: " + p.string());

  const int record = 1 + 3072;
  RawSplit out;
  out.num_classes = 10;
  std::vector<unsigned char> raw;
  for (const auto& p : files) {
    std::ifstream f(p, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + p.string());
    const auto bytes = (size_t)f.tellg();
    if (bytes % record) throw CorruptionError("batch size not a record multiple: " + p.string());
    f.seekg(0);
    const size_t prev = raw.size();
    raw.resize(prev + bytes);
    f.read(reinterpret_cast<char*>(raw.data() + prev), (std::streamsize)bytes);
    if (!f) throw IoError("short read: " + p.string());
  }
  const int n = (int)(raw.size() / record);
  out.images = Tensor<float>(Shape::of(n, 3, 32, 32));
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const unsigned char* rec = raw.data() + (size_t)i * record;
    out.labels[i] = rec[0];
    float* img = out.images.image(i);
    for (int k = 0; k < 3072; ++k) img[k] = rec[1 + k] / 255.0f;
  }
  return out;
}

inline RawSplit load_folder_raw(const fs::path& root, const std::string& name,
                                const std::string& split) {
  const fs::path dir = root / name / (split == "database" ? "train" : split);
  if (!fs::exists(dir))
    throw ValidationError("dataset split directory missing: " + dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw ValidationError("zero classes found under " + dir.string());

  std::vector<Tensor<float>> imgs;
  std::vector<int> labels;
  for (size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c]))
      if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      imgs.push_back(load_ppm(p));
      labels.push_back((int)c);
    }
  }
  if (imgs.empty()) throw ValidationError("zero images found under " + dir.string());
  const Shape one = imgs[0].shape;
  RawSplit out;
  out.num_classes = (int)class_dirs.size();
  out.images = Tensor<float>(Shape::of((int)imgs.size(), one.d[1], one.d[2], one.d[3]));
  out.labels = std::move(labels);
  for (size_t i = 0; i < imgs.size(); ++i) {
    if (imgs[i].shape != one)
      throw ValidationError("inconsistent image sizes under " + dir.string());
    std::copy(imgs[i].data.begin(), imgs[i].data.end(), out.images.image((int)i));
  }
  return out;
}

// Procedural 10-class corpus: class-specific grating plus a mode-colored
// foreground shape, under heavy photometric and additive nuisance. Stands in
// for a natural-image benchmark where none is on disk.
struct SynthParams {
  double angle, freq;
  int shape;
  double hue_a[3], hue_b[3];
  double mode_hues[4][3];
};

inline SynthParams synth_class_params(int class_id, uint64_t base_seed) {
  Rng g(derive_seed(base_seed, 1000 + (uint64_t)class_id));
  SynthParams p;
  p.angle = g.uniform(0.0, std::numbers::pi);
  p.freq = g.uniform(2.0, 6.0);
  p.shape = class_id % 5;  // disk, square, ring, cross, stripe
  for (auto& v : p.hue_a) v = g.uniform();
  for (auto& v : p.hue_b) v = g.uniform();
  for (auto& m : p.mode_hues)
    for (auto& v : m) v = g.uniform();
  return p;
}

inline Tensor<float> synth_images(int class_id, int n, int side, uint64_t stream_seed,
                                  uint64_t base_seed, double noise) {
  const SynthParams p = synth_class_params(class_id, base_seed);
  Rng g(stream_seed);
  Tensor<float> out(Shape::of(n, 3, side, side));
  const double ca = std::cos(p.angle), sa = std::sin(p.angle);
  std::vector<double> img((size_t)3 * side * side);
  for (int i = 0; i < n; ++i) {
    const double phase = g.uniform(0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double t = (ca * x + sa * y) / side;
        const double grat = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * p.freq * t + phase);
        for (int ch = 0; ch < 3; ++ch)
          img[(size_t)ch * side * side + y * side + x] =
              p.hue_a[ch] * grat + p.hue_b[ch] * (1.0 - grat);
      }
    const int mode = g.uniform_int(0, 3);
    const double cy = g.uniform(6.0, side - 6.0);
    const double cx = g.uniform(6.0, side - 6.0);
    const double r = g.uniform(4.0, 9.0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double dy = y - cy, dx = x - cx;
        bool hit = false;
        switch (p.shape) {
          case 0: hit = dy * dy + dx * dx < r * r; break;
          case 1: hit = std::abs(dy) < r && std::abs(dx) < r; break;
          case 2: {
            const double d2 = dy * dy + dx * dx;
            hit = d2 < r * r && d2 > 0.3025 * r * r;
            break;
          }
          case 3:
            hit = (std::abs(dy) < 0.35 * r || std::abs(dx) < 0.35 * r) &&
                  std::abs(dy) < r && std::abs(dx) < r;
            break;
          default: hit = std::abs(ca * dx + sa * dy) < 0.45 * r; break;
        }
        if (hit)
          for (int ch = 0; ch < 3; ++ch) {
            double& v = img[(size_t)ch * side * side + y * side + x];
            v = 0.65 * p.mode_hues[mode][ch] + 0.35 * v;
          }
      }
    // smooth nuisance field: 4x4 normal grid upscaled to the full side
    Tensor<float> low(Shape::of(1, 3, 4, 4));
    for (auto& v : low.data) v = (float)g.normal();
    Tensor<float> field = bilinear_resize_value(low, side, side);
    const double bright = g.uniform(-0.18, 0.18);
    const double contr = g.uniform(0.75, 1.25);
    double mean = 0;
    for (double v : img) mean += v;
    mean /= (double)img.size();
    float* dst = out.image(i);
    for (size_t k = 0; k < img.size(); ++k) {
      double v = (img[k] - mean) * contr + mean + bright;
      v += 0.12 * field.data[k] + noise * g.normal();
      dst[k] = (float)std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

inline RawSplit synth10_raw(const std::string& split, int per_class_train, int per_class_query,
                            int side, uint64_t base_seed, double noise) {
  const bool query = split == "query";
  const int per_class = query ? per_class_query : per_class_train;
  RawSplit out;
  out.num_classes = 10;
  out.images = Tensor<float>(Shape::of(per_class * 10, 3, side, side));
  out.labels.resize((size_t)per_class * 10);
  for (int c = 0; c < 10; ++c) {
    Tensor<float> block = synth_images(c, per_class, side,
                                       derive_seed(base_seed, query ? 20000u + c : 10000u + c),
                                       base_seed, noise);
    std::copy(block.data.begin(), block.data.end(), out.images.image(c * per_class));
    for (int i = 0; i < per_class; ++i) out.labels[(size_t)c * per_class + i] = c;
  }
  return out;
}

// Tiny 3-class corpus for smoke tests: one strongly colored pattern per class,
// light noise, trivially separable.
inline RawSplit toy3_raw(const std::string& split, uint64_t base_seed) {
  const bool query = split == "query";
  const int per_class = query ? 5 : 10, side = 32;
  RawSplit out;
  out.num_classes = 3;
  out.images = Tensor<float>(Shape::of(per_class * 3, 3, side, side));
  out.labels.resize((size_t)per_class * 3);
  for (int c = 0; c < 3; ++c) {
    Rng g(derive_seed(base_seed, query ? 600u + c : 500u + c));
    for (int i = 0; i < per_class; ++i) {
      float* img = out.images.image(c * per_class + i);
      const double shift = g.uniform(-2.0, 2.0);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double axis = c == 0 ? x : (c == 1 ? y : x + y);
          const double wave = 0.5 + 0.5 * std::sin(axis / 3.0 + shift);
          for (int ch = 0; ch < 3; ++ch) {
            const double base = ch == c % 3 ? 0.8 : 0.2;
            const double v = base * wave + 0.1 + 0.05 * g.normal();
            img[(size_t)ch * side * side + y * side + x] = (float)std::clamp(v, 0.0, 1.0);
          }
        }
      out.labels[(size_t)c * per_class + i] = c;
    }
  }
  return out;
}

}  // namespace detail

// Defaults for the procedural stand-in corpus; the desk-scale analogue of a
// 500-image-per-class natural benchmark.
struct SynthSpec {
  int per_class_train = 500;
  int per_class_query = 100;
  int side = 32;
  uint64_t base_seed = 7;
  double noise = 0.25;
};

inline LabeledDataset load_dataset(const fs::path& root, const std::string& name,
                                   const std::string& split,
                                   const SynthSpec& synth = SynthSpec{}) {
  if (split != "train" && split != "database" && split != "query")
    throw ValidationError("unknown split: " + split);
  auto raw_of = [&](const std::string& sp) -> detail::RawSplit {
    if (name == "cifar10") return detail::load_cifar10_raw(root, sp);
    if (name == "synth10")
      return detail::synth10_raw(sp, synth.per_class_train, synth.per_class_query, synth.side,
                                 synth.base_seed, synth.noise);
    if (name == "toy3") return detail::toy3_raw(sp, synth.base_seed);
    return detail::load_folder_raw(root, name, sp);
  };

  // stats always come from the train split
  detail::RawSplit train = raw_of("train");
  NormStats stats = compute_norm_stats(train.images);
  detail::RawSplit chosen = (split == "query") ? raw_of("query") : std::move(train);

  LabeledDataset ds;
  ds.num_classes = chosen.num_classes;
  ds.images = std::move(chosen.images);
  ds.labels = std::move(chosen.labels);
  ds.split_tag = split;
  ds.norm_stats = stats;
  normalize_inplace(ds.images, stats);
  ds.class_index = build_class_index(ds.labels, ds.num_classes);
  return ds;
}

// Gather `batch` images of one class, sampled without replacement.
inline std::vector<int> sample_class_rows(const LabeledDataset& ds, int class_id, int batch,
                                          Rng& rng) {
  if (class_id < 0 || class_id >= ds.num_classes)
    throw ValidationError("class_id out of range: " + std::to_string(class_id));
  const auto& pool = ds.class_index[class_id];
  if (batch > (int)pool.size())
    throw ValidationError("batch " + std::to_string(batch) + " exceeds class population " +
                          std::to_string(pool.size()));
  return rng.sample_without_replacement(pool, batch);
}

inline Tensor<float> gather_rows(const Tensor<float>& images, const std::vector<int>& rows) {
  Tensor<float> out(Shape::of((int)rows.size(), images.shape.d[1], images.shape.d[2],
                              images.shape.d[3]));
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(images.image(rows[i]), images.image(rows[i]) + images.image_size(),
              out.image((int)i));
  return out;
}

}  // namespace hashcond
