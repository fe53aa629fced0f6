#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hashcond/core/serialize.hpp"
#include "hashcond/data/dataset.hpp"

namespace hashcond {


struct Provenance {
  std::string method;       // iem | dm-plain | random | herding
  uint64_t seed = 0;
  int iterations = 0;       // condensation iterations completed (0 for coresets)
  double alpha = 0.0;       // perturbation strength used (0 for coresets)
  std::string config_hash;  // hex of the originating config
  double ratio = 0.0;       // (c*ipc) / |train|
};

// Learnable condensed set. Pixels live in normalized space; labels are sorted
// by class with exactly ipc rows per class, so they are fully determined by
// (c, ipc) and never stored separately.
struct SyntheticSet {
  Tensor<float> pixels;  // [c*ipc, channels, l, l]
  std::vector<int> labels;
  int num_classes = 0;
  int ipc = 0;
  int formation_factor = 1;
  int image_side = 0;
  NormStats norm_stats;
  Provenance provenance;

  int count() const { return pixels.shape.d[0]; }
  int channels() const { return pixels.shape.d[1]; }
};

inline std::vector<int> synthetic_labels(int c, int ipc) {
  std::vector<int> out((size_t)c * ipc);
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < ipc; ++i) out[(size_t)k * ipc + i] = k;
  return out;
}

inline void validate_synthetic(const SyntheticSet& s) {
  if (s.num_classes < 1 || s.ipc < 1) throw ValidationError("synthetic set: c and ipc must be >= 1");
  if (s.count() != s.num_classes * s.ipc)
    throw ValidationError("synthetic set: pixel count != c*ipc");
  if (s.image_side != s.pixels.shape.d[2] || s.image_side != s.pixels.shape.d[3])
    throw ValidationError("synthetic set: image_side mismatch");
  if (s.formation_factor < 1 || s.image_side % s.formation_factor)
    throw ValidationError("synthetic set: formation factor must divide the image side");
  if (s.labels != synthetic_labels(s.num_classes, s.ipc))
    throw ValidationError("synthetic set: labels must be sorted by class, ipc per class");
  if ((int)s.norm_stats.mean.size() != s.channels() ||
      (int)s.norm_stats.stdev.size() != s.channels())
    throw ValidationError("synthetic set: norm stats do not match channels");
  if (!(s.provenance.ratio < 1.0))
    throw ValidationError("synthetic set: compression ratio must be < 1");
}

inline void save_synthetic(const SyntheticSet& s, const fs::path& dir) {
  validate_synthetic(s);
  fs::create_directories(dir);
  json manifest{
      {"schema_version", kArchiveSchemaVersion},
      {"c", s.num_classes},
      {"ipc", s.ipc},
      {"channels", s.channels()},
      {"image_side", s.image_side},
      {"formation_factor", s.formation_factor},
      {"norm_stats", {{"mean", s.norm_stats.mean}, {"std", s.norm_stats.stdev}}},
      {"provenance",
       {{"method", s.provenance.method},
        {"seed", s.provenance.seed},
        {"iterations", s.provenance.iterations},
        {"alpha", s.provenance.alpha},
        {"config_hash", s.provenance.config_hash},
        {"ratio", s.provenance.ratio}}},
      {"byte_order", "little"},
      {"dtype", "float32"},
  };
  write_json(dir / "manifest.json", manifest);
  write_f32_blob(dir / "pixels.f32", s.pixels.data);
}

inline SyntheticSet load_synthetic(const fs::path& dir) {
  const json m = read_json(dir / "manifest.json");
  if (!m.contains("schema_version") || !m["schema_version"].is_number_integer())
    throw CorruptionError("manifest missing schema_version: " + dir.string());
  if (m["schema_version"].get<int>() != kArchiveSchemaVersion)
    throw VersionError("unsupported archive schema_version " +
                       std::to_string(m["schema_version"].get<int>()) + ": " + dir.string());
  SyntheticSet s;
  try {
    s.num_classes = m.at("c").get<int>();
    s.ipc = m.at("ipc").get<int>();
    const int channels = m.at("channels").get<int>();
    s.image_side = m.at("image_side").get<int>();
    s.formation_factor = m.at("formation_factor").get<int>();
    s.norm_stats.mean = m.at("norm_stats").at("mean").get<std::vector<double>>();
    s.norm_stats.stdev = m.at("norm_stats").at("std").get<std::vector<double>>();
    const auto& pv = m.at("provenance");
    s.provenance.method = pv.at("method").get<std::string>();
    s.provenance.seed = pv.at("seed").get<uint64_t>();
    s.provenance.iterations = pv.at("iterations").get<int>();
    s.provenance.alpha = pv.at("alpha").get<double>();
    s.provenance.config_hash = pv.at("config_hash").get<std::string>();
    s.provenance.ratio = pv.at("ratio").get<double>();
    if (m.at("byte_order").get<std::string>() != "little" ||
        m.at("dtype").get<std::string>() != "float32")
      throw CorruptionError("unsupported encoding in manifest: " + dir.string());
    s.pixels = Tensor<float>(
        Shape::of(s.num_classes * s.ipc, channels, s.image_side, s.image_side));
  } catch (const json::exception& e) {
    throw CorruptionError("bad manifest in " + dir.string() + ": " + e.what());
  }
  s.pixels.data = read_f32_blob(dir / "pixels.f32", s.pixels.data.size());
  s.labels = synthetic_labels(s.num_classes, s.ipc);
  validate_synthetic(s);
  return s;
}

}  // namespace hashcond
