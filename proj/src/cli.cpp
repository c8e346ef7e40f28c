#include "eit/cli.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "eit/dataset.hpp"
#include "eit/dbar.hpp"
#include "eit/dsm.hpp"
#include "eit/metrics.hpp"
#include "eit/parallel.hpp"
#include "eit/sparsity.hpp"

namespace eit {

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ParamMap = std::map<std::string, std::string>;

ParamMap parse_params(const std::vector<std::string>& raw) {
  ParamMap out;
  for (const auto& kv : raw) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects key=value, got '" + kv + "'");
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw ConfigError("parameter " + key + ": not a number: '" + text + "'");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("parameter " + key + ": not an integer: '" + text + "'");
  return static_cast<int>(v);
}

// Consumes the known keys of `params`; anything left over is a config error.
class ParamReader {
 public:
  explicit ParamReader(ParamMap params) : params_(std::move(params)) {}

  void real(const std::string& key, double& target) {
    if (auto it = params_.find(key); it != params_.end()) {
      target = to_double(key, it->second);
      params_.erase(it);
    }
    echo_[key] = target;
  }
  void integer(const std::string& key, int& target) {
    if (auto it = params_.find(key); it != params_.end()) {
      target = to_int(key, it->second);
      params_.erase(it);
    }
    echo_[key] = target;
  }
  void finish() const {
    if (!params_.empty()) throw ConfigError("unknown parameter '" + params_.begin()->first + "'");
  }
  const json& echo() const { return echo_; }

 private:
  ParamMap params_;
  json echo_ = json::object();
};

std::vector<int> select_samples(const DatasetManifest& manifest, const std::string& range) {
  if (range.empty()) return manifest.samples;
  const auto colon = range.find(':');
  if (colon == std::string::npos) throw ConfigError("--samples expects a:b");
  const int a = colon == 0 ? 0 : to_int("samples", range.substr(0, colon));
  const int b = colon + 1 == range.size() ? manifest.n_samples : to_int("samples", range.substr(colon + 1));
  if (a < 0 || b < a) throw ConfigError("--samples: invalid range " + range);
  std::vector<int> out;
  for (int s : manifest.samples) {
    if (s >= a && s < b) out.push_back(s);
  }
  return out;
}

int cmd_generate(const fs::path& out_dir, int n, int max_inclusions, bool textured, const std::vector<double>& noise,
                 std::uint64_t seed, double mesh_h, unsigned threads, std::ostream& out, std::ostream& err) {
  DatasetManifest m;
  m.n_samples = n;
  m.max_inclusions = max_inclusions;
  m.textured = textured;
  m.noise_levels = noise;
  m.global_seed = seed;
  m.mesh_h = mesh_h;
  try {
    m.validate();
  } catch (const DatasetError& e) {
    throw ConfigError(e.what());
  }
  try {
    const auto report = generate_dataset(out_dir, m, threads, &err);
    out << "wrote " << report.written << " samples to " << out_dir.string() << '\n';
    return report.failed.empty() ? kExitOk : kExitPartial;
  } catch (const std::exception& e) {
    err << "generate: " << e.what() << '\n';
    return kExitPartial;
  }
}

struct MethodRunner {
  json params;
  // Reconstructs one sample; fills `meta` with method diagnostics.
  std::function<PixelImage(const SampleBundle&, json& meta, const fs::path& out_dir)> run;
  bool parallel_samples = true;
};

MethodRunner make_runner(const std::string& method, const ParamMap& raw, double delta, double mesh_h,
                         unsigned threads, const fs::path& data_dir, const DatasetManifest& manifest,
                         std::shared_ptr<const DiskMesh>& mesh) {
  ParamReader reader(raw);
  MethodRunner runner;

  if (method == "sparsity") {
    SparsitySettings s;
    reader.real("alpha", s.alpha);
    reader.integer("iterations", s.max_iterations);
    reader.integer("memory", s.memory);
    reader.real("tau", s.tau);
    reader.real("q", s.q);
    reader.real("s_stop", s.s_stop);
    reader.real("s_init", s.s_init);
    reader.real("lambda", s.lambda);
    reader.finish();
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    mesh = std::make_shared<const DiskMesh>(build_disk_mesh(mesh_h));
    runner.run = [s, delta, mesh](const SampleBundle& sample, json& meta, const fs::path&) {
      const auto r = reconstruct_sparsity(sample.at_noise(delta).voltages, *mesh, s);
      meta["iterations"] = r.iterations;
      meta["stopReason"] = r.stop_reason;
      return r.image;
    };
  } else if (method == "dbar") {
    DbarSettings s;
    s.threads = threads;
    double radius = cutoff_radius(delta);
    reader.real("R", radius);
    reader.integer("m", s.exponent);
    reader.real("tolerance", s.solver.tolerance);
    reader.integer("restart", s.solver.restart);
    reader.integer("max_iterations", s.solver.max_iterations);
    reader.finish();
    if (!(radius > 0.0) || s.exponent < 3 || s.exponent > 10 || !(s.solver.tolerance > 0.0) ||
        s.solver.restart < 1 || s.solver.max_iterations < 1) {
      throw ConfigError("dbar: parameter out of range");
    }
    s.radius = radius;
    runner.parallel_samples = false;
    runner.run = [s, delta](const SampleBundle& sample, json& meta, const fs::path&) {
      double condition = 0.0;
      const auto dtn = ntd_to_dtn(sample.at_noise(delta).ntd, &condition);
      const auto r = reconstruct_dbar(dtn, delta, s);
      meta["R"] = r.radius;
      meta["condition"] = condition;
      meta["solverIterations"] = r.total_iterations;
      meta["maxSolverIterations"] = r.max_iterations;
      meta["failedPixels"] = r.failed_pixels;
      meta["maxImagMu"] = r.max_imag;
      return r.image;
    };
  } else if (method == "dsm-index") {
    double gamma = 1.0;
    int export_phi = 0;
    reader.real("gamma", gamma);
    reader.integer("export_phi", export_phi);
    reader.finish();
    if (!(gamma >= 0.0)) throw ConfigError("dsm-index: gamma must be nonnegative");
    mesh = std::make_shared<const DiskMesh>(build_disk_mesh(mesh_h));
    const auto background = std::make_shared<const BoundaryVoltages>(read_background_voltages(data_dir, manifest));
    runner.run = [gamma, export_phi, delta, mesh, background](const SampleBundle& sample, json& meta,
                                                               const fs::path& out_dir) {
      const auto r = reconstruct_dsm(sample.at_noise(delta).voltages, *background, *mesh, gamma);
      meta["zeroData"] = r.index.zero_data;
      if (export_phi) write_f64(out_dir / "phi.f64", export_phi_stack(*mesh, r.phis));
      return r.index.values;
    };
  } else {
    throw ConfigError("unknown method '" + method + "'");
  }
  runner.params = reader.echo();
  return runner;
}

int cmd_reconstruct(const fs::path& data_dir, const std::string& method, double delta, const fs::path& out_dir,
                    const std::vector<std::string>& raw_params, const std::string& range, double mesh_h,
                    unsigned threads, std::ostream& out, std::ostream& err) {
  DatasetManifest manifest;
  try {
    manifest = read_manifest(data_dir);
  } catch (const DatasetError& e) {
    throw ConfigError(e.what());
  }
  if (std::find(manifest.noise_levels.begin(), manifest.noise_levels.end(), delta) == manifest.noise_levels.end()) {
    throw ConfigError("noise level " + noise_tag(delta) + " is not in the dataset");
  }
  if (!(mesh_h >= 0.005 && mesh_h <= 0.2)) throw ConfigError("--mesh-h must lie in [0.005, 0.2]");
  const auto samples = select_samples(manifest, range);

  std::shared_ptr<const DiskMesh> mesh;
  auto runner = make_runner(method, parse_params(raw_params), delta, mesh_h, threads, data_dir, manifest, mesh);

  std::vector<json> records(samples.size());
  std::vector<char> ok(samples.size(), 0);
  std::mutex log_mutex;
  auto one = [&](std::size_t i) {
    const int index = samples[i];
    json meta{{"index", index}};
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto sample = read_sample(sample_dir(data_dir, index), manifest);
      const auto target = sample_dir(out_dir, index);
      fs::create_directories(target);
      const PixelImage image = runner.run(sample, meta, target);
      write_image(target / "sigma.f64", image);
      ok[i] = 1;
    } catch (const std::exception& e) {
      meta["error"] = e.what();
      std::lock_guard lock(log_mutex);
      err << "sample " << index << ": " << e.what() << '\n';
    }
    meta["ok"] = static_cast<bool>(ok[i]);
    meta["wallSeconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records[i] = std::move(meta);
  };
  fs::create_directories(out_dir);
  if (runner.parallel_samples) {
    parallel_for(samples.size(), threads, one);
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) one(i);
  }

  json run{{"method", method},
           {"delta", delta},
           {"dataset", fs::absolute(data_dir).lexically_normal().string()},
           {"meshH", method == "dbar" ? json(nullptr) : json(mesh_h)},
           {"params", runner.params},
           {"samples", json::array()},
           {"failed", json::array()}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    run["samples"].push_back(records[i]);
    if (!ok[i]) run["failed"].push_back(samples[i]);
  }
  write_text_atomic(out_dir / "run.json", run.dump(2) + "\n");
  const auto failed = run["failed"].size();
  out << method << ": reconstructed " << samples.size() - failed << " of " << samples.size() << " samples\n";
  return failed == 0 ? kExitOk : kExitPartial;
}

int cmd_evaluate(const fs::path& data_dir, const std::vector<std::string>& preds, const fs::path& out_path,
                 std::ostream& out, std::ostream& err) {
  DatasetManifest manifest;
  try {
    manifest = read_manifest(data_dir);
  } catch (const DatasetError& e) {
    throw ConfigError(e.what());
  }
  std::vector<MetricRow> rows;
  std::vector<MetricRow> aggregates;
  bool partial = false;
  std::map<std::pair<std::string, double>, std::vector<MetricReport>> groups;
  std::vector<std::pair<std::string, double>> order;

  for (const auto& pred : preds) {
    const fs::path pred_dir(pred);
    std::ifstream is(pred_dir / "run.json");
    if (!is) throw ConfigError("missing run.json in " + pred);
    json run;
    try {
      is >> run;
    } catch (const json::exception& e) {
      throw ConfigError(pred + "/run.json: " + e.what());
    }
    const auto method = run.value("method", std::string("unknown"));
    const double delta = run.value("delta", 0.0);
    const auto key = std::make_pair(method, delta);
    if (!groups.contains(key)) order.push_back(key);
    auto& group = groups[key];

    for (int index : manifest.samples) {
      try {
        const auto truth = read_image(sample_dir(data_dir, index) / "sigma.f64");
        const auto image = read_image(sample_dir(pred_dir, index) / "sigma.f64");
        MetricRow row{std::to_string(index), method, delta, evaluate(image, truth)};
        group.push_back(row.report);
        rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        partial = true;
        err << method << " sample " << index << ": " << e.what() << '\n';
      }
    }
  }
  for (const auto& key : order) rows.push_back({"mean", key.first, key.second, mean_report(groups[key])});

  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  write_text_atomic(out_path, csv.str());
  out << "wrote " << rows.size() << " rows to " << out_path.string() << '\n';
  return partial ? kExitPartial : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Benchmark toolkit for 2D continuum EIT reconstruction", "eitbench"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* gen = app.add_subcommand("generate", "Simulate a dataset of random phantoms");
  std::string gen_out;
  int n = 100, max_inclusions = 4;
  bool textured = false;
  std::vector<double> noise{0.0, 0.01, 0.05};
  std::uint64_t seed = 0;
  double gen_h = 0.03;
  gen->add_option("--out", gen_out, "Dataset directory")->required();
  gen->add_option("--n", n, "Number of samples");
  gen->add_option("--max-inclusions", max_inclusions, "Maximum inclusions per phantom (1..6)");
  gen->add_option("--textured", textured, "Textured inclusions (true/false)");
  gen->add_option("--noise", noise, "Comma-separated noise levels")->delimiter(',');
  gen->add_option("--seed", seed, "Global seed");
  gen->add_option("--mesh-h", gen_h, "Forward mesh size");
  gen->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct every sample of a dataset");
  std::string rec_data, rec_out, method, range;
  double delta = 0.0, rec_h = 0.06;
  std::vector<std::string> params;
  rec->add_option("--data", rec_data, "Dataset directory")->required();
  rec->add_option("--method", method, "sparsity | dbar | dsm-index")->required();
  rec->add_option("--delta", delta, "Noise level to reconstruct from");
  rec->add_option("--out", rec_out, "Prediction directory")->required();
  rec->add_option("--param", params, "Method parameter key=value (repeatable)");
  rec->add_option("--samples", range, "Half-open sample index range a:b");
  rec->add_option("--mesh-h", rec_h, "Inversion mesh size");
  rec->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* ev = app.add_subcommand("evaluate", "Score predictions against the ground truth");
  std::string ev_data, ev_out;
  std::vector<std::string> preds;
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--pred", preds, "Prediction directory (repeatable)")->required();
  ev->add_option("--out", ev_out, "CSV report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Error& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_out, n, max_inclusions, textured, noise, seed, gen_h, threads, out, err);
    if (*rec) return cmd_reconstruct(rec_data, method, delta, rec_out, params, range, rec_h, threads, out, err);
    return cmd_evaluate(ev_data, preds, ev_out, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n\n" << app.help() << '\n';
    return kExitConfig;
  }
}

}  // namespace eit
