#include "eit/dataset.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "eit/parallel.hpp"

namespace eit {

using nlohmann::json;

namespace {

void bad_manifest(const std::string& what) { throw DatasetError(DatasetError::Kind::bad_manifest, "manifest: " + what); }

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return out;
  }
}

std::vector<double> flatten(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Matrix unflatten(const std::vector<double>& v, int rows, int cols) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r) * cols + c];
  }
  return m;
}

std::size_t image_size() { return static_cast<std::size_t>(PixelImage::kSize) * PixelImage::kSize; }

void write_measurements(const fs::path& dir, const std::string& tag, const NtDMatrix& ntd,
                        const BoundaryVoltages& volt) {
  write_f64(dir / ("ntd_" + tag + ".f64"), flatten(ntd.entries));
  write_f64(dir / ("volt_" + tag + ".f64"), std::span<const double>(volt.samples.data(), volt.samples.size()));
}

}  // namespace

void DatasetManifest::validate() const {
  if (format_version != 1) bad_manifest("unsupported formatVersion");
  if (n_samples < 1) bad_manifest("nSamples must be positive");
  if (grid_nx != PixelImage::kSize || grid_ny != PixelImage::kSize) bad_manifest("grid must be 64x64");
  if (n_max_frequency < 1) bad_manifest("nMaxFrequency must be positive");
  if (n_boundary < 2 * n_max_frequency) bad_manifest("nBoundary must be at least 2 * nMaxFrequency");
  if (noise_levels.empty() || noise_levels.front() != 0.0) bad_manifest("noiseLevels must start at 0");
  for (std::size_t i = 1; i < noise_levels.size(); ++i) {
    if (!(noise_levels[i] > noise_levels[i - 1])) bad_manifest("noiseLevels must be strictly ascending");
  }
  if (max_inclusions < 1 || max_inclusions > 6) bad_manifest("maxInclusions must lie in [1, 6]");
  if (!(mesh_h >= 0.005 && mesh_h <= 0.2)) bad_manifest("meshH must lie in [0.005, 0.2]");
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"formatVersion", m.format_version},
           {"nSamples", m.n_samples},
           {"gridNx", m.grid_nx},
           {"gridNy", m.grid_ny},
           {"extent", m.extent},
           {"nBoundary", m.n_boundary},
           {"nMaxFrequency", m.n_max_frequency},
           {"nPatterns", m.n_patterns()},
           {"noiseLevels", m.noise_levels},
           {"textured", m.textured},
           {"maxInclusions", m.max_inclusions},
           {"globalSeed", m.global_seed},
           {"meshH", m.mesh_h},
           {"samples", m.samples},
           {"failed", m.failed}};
}

void from_json(const json& j, DatasetManifest& m) {
  try {
    j.at("formatVersion").get_to(m.format_version);
    j.at("nSamples").get_to(m.n_samples);
    j.at("gridNx").get_to(m.grid_nx);
    j.at("gridNy").get_to(m.grid_ny);
    j.at("extent").get_to(m.extent);
    j.at("nBoundary").get_to(m.n_boundary);
    j.at("nMaxFrequency").get_to(m.n_max_frequency);
    j.at("noiseLevels").get_to(m.noise_levels);
    j.at("textured").get_to(m.textured);
    j.at("maxInclusions").get_to(m.max_inclusions);
    j.at("globalSeed").get_to(m.global_seed);
    j.at("meshH").get_to(m.mesh_h);
    m.samples = j.value("samples", std::vector<int>{});
    m.failed = j.value("failed", std::vector<int>{});
  } catch (const json::exception& e) {
    bad_manifest(e.what());
  }
  if (j.contains("nPatterns") && j["nPatterns"] != m.n_patterns()) bad_manifest("nPatterns != 2 * nMaxFrequency");
}

json phantom_to_json(const Phantom& phantom) {
  json inclusions = json::array();
  for (const auto& inc : phantom.inclusions) {
    const auto& e = inc.ellipse;
    json rec{{"h", e.center.x}, {"k", e.center.y}, {"a", e.a}, {"b", e.b}, {"alpha", e.alpha}};
    if (const auto* c = std::get_if<ConstantPayload>(&inc.payload)) {
      rec["kind"] = "constant";
      rec["value"] = c->value;
    } else {
      const auto& t = std::get<TexturedPayload>(inc.payload);
      rec["kind"] = "textured";
      rec["kx"] = t.kx;
      rec["ky"] = t.ky;
      rec["lo"] = t.lo;
      rec["hi"] = t.hi;
    }
    inclusions.push_back(std::move(rec));
  }
  return json{{"background", phantom.background}, {"inclusions", std::move(inclusions)}};
}

Phantom phantom_from_json(const json& j) {
  Phantom p;
  p.background = j.value("background", 1.0);
  for (const auto& rec : j.at("inclusions")) {
    Inclusion inc;
    inc.ellipse = {{rec.at("h").get<double>(), rec.at("k").get<double>()},
                   rec.at("a").get<double>(), rec.at("b").get<double>(), rec.at("alpha").get<double>()};
    const auto kind = rec.at("kind").get<std::string>();
    if (kind == "constant") {
      inc.payload = ConstantPayload{rec.at("value").get<double>()};
    } else if (kind == "textured") {
      inc.payload = TexturedPayload{rec.at("kx").get<double>(), rec.at("ky").get<double>(),
                                    rec.at("lo").get<double>(), rec.at("hi").get<double>()};
    } else {
      throw std::invalid_argument("phantom: unknown inclusion kind '" + kind + "'");
    }
    p.inclusions.push_back(std::move(inc));
  }
  return p;
}

std::string noise_tag(double delta) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, delta);
  return {buf, res.ptr};
}

fs::path sample_dir(const fs::path& root, int index) {
  char name[16];
  std::snprintf(name, sizeof name, "%06d", index);
  return root / "samples" / name;
}

void write_f64(const fs::path& path, std::span<const double> values) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    for (double v : values) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<double> read_f64(const fs::path& path, std::size_t count) {
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw DatasetError(DatasetError::Kind::missing_file, "missing file: " + path.string());
  if (bytes != count * sizeof(double)) {
    throw DatasetError(DatasetError::Kind::length_mismatch,
                       path.string() + ": expected " + std::to_string(count * sizeof(double)) + " bytes, found " +
                           std::to_string(bytes));
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError(DatasetError::Kind::missing_file, "cannot open " + path.string());
  std::vector<double> out(count);
  for (auto& v : out) {
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), sizeof bits);
    v = std::bit_cast<double>(to_little_endian(bits));
    if (!std::isfinite(v)) throw DatasetError(DatasetError::Kind::non_finite, path.string() + ": non-finite value");
  }
  if (!is) throw DatasetError(DatasetError::Kind::length_mismatch, "short read: " + path.string());
  return out;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << text;
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_manifest(const fs::path& root, const DatasetManifest& manifest) {
  write_text_atomic(root / "manifest.json", json(manifest).dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& root) {
  std::ifstream is(root / "manifest.json");
  if (!is) throw DatasetError(DatasetError::Kind::missing_file, "missing manifest in " + root.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    bad_manifest(e.what());
  }
  auto m = j.get<DatasetManifest>();
  m.validate();
  return m;
}

const NoisyMeasurement& SampleBundle::at_noise(double delta) const {
  for (const auto& m : measurements) {
    if (m.delta == delta) return m;
  }
  throw std::out_of_range("no measurements at noise level " + noise_tag(delta));
}

void write_sample(const fs::path& dir, const SampleBundle& sample, const DatasetManifest& manifest) {
  if (sample.measurements.size() != manifest.noise_levels.size()) {
    throw std::invalid_argument("write_sample: one measurement per noise level required");
  }
  fs::create_directories(dir);
  write_text_atomic(dir / "phantom.json", phantom_to_json(sample.phantom).dump(2) + "\n");
  write_image(dir / "sigma.f64", sample.sigma);
  for (const auto& m : sample.measurements) {
    if (m.ntd.entries.rows() != manifest.n_patterns() || m.voltages.patterns() != manifest.n_patterns() ||
        m.voltages.count() != manifest.n_boundary) {
      throw std::invalid_argument("write_sample: measurement shape does not match the manifest");
    }
    write_measurements(dir, noise_tag(m.delta), m.ntd, m.voltages);
  }
}

SampleBundle read_sample(const fs::path& dir, const DatasetManifest& manifest) {
  SampleBundle s;
  std::ifstream is(dir / "phantom.json");
  if (!is) throw DatasetError(DatasetError::Kind::missing_file, "missing file: " + (dir / "phantom.json").string());
  s.phantom = phantom_from_json(json::parse(is));
  s.sigma = read_image(dir / "sigma.f64");
  const int p = manifest.n_patterns();
  for (double delta : manifest.noise_levels) {
    const auto tag = noise_tag(delta);
    NoisyMeasurement m;
    m.delta = delta;
    m.ntd.entries = unflatten(read_f64(dir / ("ntd_" + tag + ".f64"), static_cast<std::size_t>(p) * p), p, p);
    const auto v = read_f64(dir / ("volt_" + tag + ".f64"), static_cast<std::size_t>(p) * manifest.n_boundary);
    m.voltages.samples = Eigen::Map<const RowMatrix>(v.data(), p, manifest.n_boundary);
    s.measurements.push_back(std::move(m));
  }
  return s;
}

void write_image(const fs::path& path, const PixelImage& image) { write_f64(path, image.values); }

PixelImage read_image(const fs::path& path) {
  PixelImage img;
  img.values = read_f64(path, image_size());
  return img;
}

BoundaryVoltages read_background_voltages(const fs::path& root, const DatasetManifest& manifest) {
  const int p = manifest.n_patterns();
  const auto v = read_f64(root / "volt_background.f64", static_cast<std::size_t>(p) * manifest.n_boundary);
  return {Eigen::Map<const RowMatrix>(v.data(), p, manifest.n_boundary)};
}

NtDMatrix read_background_ntd(const fs::path& root, const DatasetManifest& manifest) {
  const int p = manifest.n_patterns();
  return {unflatten(read_f64(root / "ntd_background.f64", static_cast<std::size_t>(p) * p), p, p)};
}

GenerateReport generate_dataset(const fs::path& root, DatasetManifest manifest, unsigned threads, std::ostream* log) {
  manifest.samples.clear();
  manifest.failed.clear();
  manifest.validate();
  fs::create_directories(root / "samples");

  const DiskMesh mesh = build_disk_mesh(manifest.mesh_h);
  const CurrentBasis basis(manifest.n_max_frequency);

  const auto background = compute_ntd(ConductivityField::constant(mesh, 1.0), basis, manifest.n_boundary);
  write_measurements(root, "background", ntd_from_noisy_voltages(background.voltages, basis), background.voltages);

  std::mutex log_mutex;
  std::vector<char> ok(static_cast<std::size_t>(manifest.n_samples), 0);
  parallel_for(ok.size(), threads, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    try {
      SampleBundle s;
      s.phantom = sample_phantom(derive_seed(manifest.global_seed, i), manifest.max_inclusions, manifest.textured);
      s.sigma = rasterize(s.phantom);
      const auto clean = compute_ntd(phantom_to_mesh(s.phantom, mesh), basis, manifest.n_boundary);
      for (std::size_t k = 0; k < manifest.noise_levels.size(); ++k) {
        NoisyMeasurement m;
        m.delta = manifest.noise_levels[k];
        m.voltages = add_noise(clean.voltages, m.delta, derive_seed(manifest.global_seed, i, k + 1));
        m.ntd = ntd_from_noisy_voltages(m.voltages, basis);
        s.measurements.push_back(std::move(m));
      }
      write_sample(sample_dir(root, index), s, manifest);
      ok[i] = 1;
    } catch (const std::exception& e) {
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << "sample " << index << " failed: " << e.what() << '\n';
      }
    }
  });

  GenerateReport report;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (ok[i]) {
      manifest.samples.push_back(static_cast<int>(i));
      ++report.written;
    } else {
      manifest.failed.push_back(static_cast<int>(i));
    }
  }
  report.failed = manifest.failed;
  if (log) *log << "generated " << report.written << " of " << manifest.n_samples << " samples\n";
  if (report.failed.size() * 100 > static_cast<std::size_t>(manifest.n_samples)) {
    throw std::runtime_error("dataset generation aborted: " + std::to_string(report.failed.size()) + " of " +
                             std::to_string(manifest.n_samples) + " samples failed");
  }
  write_manifest(root, manifest);
  return report;
}

}  // namespace eit
