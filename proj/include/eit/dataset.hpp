#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eit/forward.hpp"
#include "eit/phantom.hpp"

namespace eit {

namespace fs = std::filesystem;

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { missing_file, length_mismatch, non_finite, bad_manifest };

  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct DatasetManifest {
  int format_version = 1;
  int n_samples = 0;
  int grid_nx = PixelImage::kSize;
  int grid_ny = PixelImage::kSize;
  std::array<double, 4> extent{-1.0, 1.0, -1.0, 1.0};  // xmin, xmax, ymin, ymax
  int n_boundary = 64;
  int n_max_frequency = 16;
  std::vector<double> noise_levels{0.0, 0.01, 0.05};
  bool textured = false;
  int max_inclusions = 4;
  std::uint64_t global_seed = 0;
  double mesh_h = 0.03;
  /// Indices of the samples on disk, and of those that failed to generate.
  std::vector<int> samples;
  std::vector<int> failed;

  int n_patterns() const { return 2 * n_max_frequency; }
  /// Throws DatasetError(bad_manifest) when a field is out of range.
  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

nlohmann::json phantom_to_json(const Phantom& phantom);
Phantom phantom_from_json(const nlohmann::json& j);

/// Shortest decimal that round-trips the noise level: 0 -> "0", 0.01 -> "0.01".
std::string noise_tag(double delta);

fs::path sample_dir(const fs::path& root, int index);

/// Raw little-endian float64, row-major, no header. Written to `<path>.tmp`
/// and renamed into place.
void write_f64(const fs::path& path, std::span<const double> values);
/// Reads exactly `count` values. Throws DatasetError: missing_file,
/// length_mismatch or non_finite.
std::vector<double> read_f64(const fs::path& path, std::size_t count);

void write_text_atomic(const fs::path& path, const std::string& text);

void write_manifest(const fs::path& root, const DatasetManifest& manifest);
DatasetManifest read_manifest(const fs::path& root);

struct NoisyMeasurement {
  double delta = 0.0;
  NtDMatrix ntd;
  BoundaryVoltages voltages;
};

struct SampleBundle {
  Phantom phantom;
  PixelImage sigma;
  std::vector<NoisyMeasurement> measurements;  // in manifest noise-level order

  const NoisyMeasurement& at_noise(double delta) const;
};

void write_sample(const fs::path& dir, const SampleBundle& sample, const DatasetManifest& manifest);
SampleBundle read_sample(const fs::path& dir, const DatasetManifest& manifest);

void write_image(const fs::path& path, const PixelImage& image);
PixelImage read_image(const fs::path& path);

/// Homogeneous (sigma = 1) noiseless voltages and NtD stored in the dataset root.
BoundaryVoltages read_background_voltages(const fs::path& root, const DatasetManifest& manifest);
NtDMatrix read_background_ntd(const fs::path& root, const DatasetManifest& manifest);

struct GenerateReport {
  int written = 0;
  std::vector<int> failed;
};

/// Simulate every sample of the manifest into `root` and write the manifest
/// last. Progress and per-sample failures go to `log` when non-null. Throws
/// std::runtime_error when more than 1% of the samples fail.
GenerateReport generate_dataset(const fs::path& root, DatasetManifest manifest, unsigned threads = 1,
                                std::ostream* log = nullptr);

}  // namespace eit
