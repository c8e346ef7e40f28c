// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// usage: acceptance <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "eit/cli.hpp"
#include "eit/dataset.hpp"
#include "eit/dbar.hpp"
#include "eit/metrics.hpp"
#include "eit/sparsity.hpp"
#include "oracles/radial.hpp"
#include "oracles/scattering.hpp"
#include "support/files.hpp"

using namespace eit;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path g_work;

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "eitbench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, std::cerr);
  return code;
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

Phantom disk(Point c, double a, double b, double value, double alpha = 0.0) {
  Phantom p;
  p.inclusions.push_back({Ellipse{c, a, b, alpha}, ConstantPayload{value}});
  return p;
}

const DiskMesh& forward_mesh() {
  static const DiskMesh mesh = build_disk_mesh(0.03);
  return mesh;
}

DtNMatrix radial_dtn(double s, double rho) {
  CurrentBasis basis;
  DtNMatrix d{Matrix::Zero(basis.size(), basis.size())};
  for (int m = 0; m < basis.size(); ++m) d.entries(m, m) = oracle::dtn_eigenvalue(basis.frequency(m), s, rho);
  return d;
}

// --- 1 ---------------------------------------------------------------------
void homogeneous_ntd(Verdict& v) {
  const auto t0 = Clock::now();
  const auto mesh = build_disk_mesh(0.03);
  CurrentBasis basis;
  const auto data = compute_ntd(ConductivityField::constant(mesh, 1.0), basis);
  const double elapsed = seconds_since(t0);
  double diag = 0.0, off = 0.0;
  for (int m = 0; m < 32; ++m) {
    for (int k = 0; k < 32; ++k) {
      const double e = data.ntd.entries(m, k);
      if (m == k) {
        diag = std::max(diag, std::abs(e * basis.frequency(m) - 1.0));
      } else {
        off = std::max(off, std::abs(e));
      }
    }
  }
  v.detail << "max diag rel err " << diag << ", max off-diag " << off << ", " << elapsed << " s ";
  v.check(diag <= 0.02, "diagonal within 2%");
  v.check(off <= 1e-3, "off-diagonal <= 1e-3");
  v.check(elapsed <= 10.0, "runtime <= 10 s");
}

// --- 2 ---------------------------------------------------------------------
void radial_oracle(Verdict& v) {
  CurrentBasis basis;
  for (double s : {0.5, 2.0}) {
    const auto data = compute_ntd(phantom_to_mesh(disk({0.0, 0.0}, 0.4, 0.4, s), forward_mesh()), basis);
    double worst = 0.0;
    for (int m = 0; m < 32; ++m) {
      const double o = oracle::ntd_eigenvalue(basis.frequency(m), s, 0.4);
      worst = std::max(worst, std::abs(data.ntd.entries(m, m) / o - 1.0));
    }
    v.detail << "s=" << s << ": max rel err " << worst << "; ";
    v.check(worst <= 0.02, "diagonal within 2% at s=" + std::to_string(s));
  }
}

// --- 3 ---------------------------------------------------------------------
Vector bump(const DiskMesh& mesh, Point c, double w) {
  Vector b(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const double r = distance(mesh.nodes()[i], c) / w;
    b[static_cast<Eigen::Index>(i)] = r < 1.0 ? std::pow(1.0 - r * r, 2) : 0.0;
  }
  return b;
}

void gradient_check(Verdict& v) {
  const auto mesh = build_disk_mesh(0.06);
  const std::vector<Phantom> phantoms{disk({0.3, 0.2}, 0.25, 0.2, 2.0, 0.3), disk({-0.4, -0.1}, 0.3, 0.15, 0.4, 1.1)};
  const std::vector<std::pair<Point, double>> directions{{{0.1, -0.2}, 0.4}, {{-0.3, 0.35}, 0.3}};
  double worst = 0.0;
  for (const auto& p : phantoms) {
    const auto data = compute_ntd(phantom_to_mesh(p, forward_mesh()), CurrentBasis{}).voltages;
    const MisfitFunctional j(mesh, data);
    const ConductivityField sigma(mesh, Vector::Ones(static_cast<Eigen::Index>(mesh.num_nodes())) +
                                            0.3 * bump(mesh, {0.0, 0.1}, 0.6));
    const Vector dj = j.nodal_derivative(j.evaluate(sigma));
    for (const auto& [c, w] : directions) {
      const Vector dir = bump(mesh, c, w);
      const double eps = 1e-4;
      const double fd = (j.value(ConductivityField(mesh, sigma.values() + eps * dir)) -
                         j.value(ConductivityField(mesh, sigma.values() - eps * dir))) /
                        (2.0 * eps);
      worst = std::max(worst, std::abs(dj.dot(dir) - fd) / std::abs(fd));
    }
  }
  v.detail << "max rel err " << worst << " over 2 phantoms x 2 directions ";
  v.check(worst <= 1e-3, "relative error <= 1e-3");
}

// --- 4 ---------------------------------------------------------------------
bool weakly_monotone(const SparsityResult& r, int memory) {
  std::vector<double> history{r.initial_psi};
  for (const auto& step : r.accepted) {
    const std::size_t from = history.size() > static_cast<std::size_t>(memory) ? history.size() - memory : 0;
    double reference = history[from];
    for (std::size_t i = from; i < history.size(); ++i) reference = std::max(reference, history[i]);
    const double margin = step.margin;
    if (!(margin >= 0.0) || !(step.psi <= reference - margin)) return false;
    history.push_back(step.psi);
  }
  return true;
}

void sparsity_sanity(Verdict& v) {
  const auto mesh = build_disk_mesh(0.06);
  SparsitySettings settings;

  auto t0 = Clock::now();
  const auto flat = reconstruct_sparsity(
      compute_ntd(ConductivityField::constant(forward_mesh(), 1.0), CurrentBasis{}).voltages, mesh, settings);
  double dev = 0.0;
  for (double x : flat.image.values) dev = std::max(dev, std::abs(x - 1.0));
  v.detail << "homogeneous max |sigma-1| " << dev << " (" << seconds_since(t0) << " s); ";
  v.check(dev <= 1e-3, "homogeneous reconstruction within 1e-3 of 1");
  v.check(weakly_monotone(flat, settings.memory), "weak monotonicity (homogeneous)");

  double slowest = 0.0;
  for (const auto& p : {disk({0.0, 0.0}, 0.3, 0.3, 2.0), disk({0.3, 0.2}, 0.25, 0.2, 2.0, 0.3),
                        disk({-0.35, 0.25}, 0.25, 0.18, 0.4, 1.0)}) {
    t0 = Clock::now();
    const auto r = reconstruct_sparsity(compute_ntd(phantom_to_mesh(p, forward_mesh()), CurrentBasis{}).voltages, mesh,
                                        settings);
    slowest = std::max(slowest, seconds_since(t0));
    // support: |sigma - 1| at least half its maximum
    double peak = 0.0;
    for (int i = 0; i < PixelImage::kSize * PixelImage::kSize; ++i)
      if (PixelImage::mask()[static_cast<std::size_t>(i)]) peak = std::max(peak, std::abs(r.image.values[static_cast<std::size_t>(i)] - 1.0));
    double cx = 0.0, cy = 0.0;
    int count = 0;
    for (int row = 0; row < PixelImage::kSize; ++row) {
      for (int col = 0; col < PixelImage::kSize; ++col) {
        if (!PixelImage::on_mask(row, col) || std::abs(r.image.at(row, col) - 1.0) < 0.5 * peak) continue;
        const Point x = PixelImage::pixel_center(row, col);
        cx += x.x;
        cy += x.y;
        ++count;
      }
    }
    const Point truth = p.inclusions[0].ellipse.center;
    const double err = count > 0 ? distance({cx / count, cy / count}, truth) : INFINITY;
    v.detail << "centroid err " << err << " (" << r.iterations << " it, " << r.stop_reason << "); ";
    v.check(err <= 0.1, "support centroid within 0.1");
    v.check(weakly_monotone(r, settings.memory), "weak monotonicity");
  }
  v.detail << "slowest " << slowest << " s ";
  v.check(slowest <= 300.0, "runtime <= 5 min per sample");
}

// --- shared dataset for 5, 8 and 9 -------------------------------------------
constexpr int kSamples = 50;

const fs::path& dataset() {
  static const fs::path root = [] {
    const auto dir = g_work / "dataset";
    fs::remove_all(dir);
    if (cli({"generate", "--out", dir.string(), "--n", std::to_string(kSamples), "--seed", "2024"}) != kExitOk)
      throw std::runtime_error("dataset generation failed");
    return dir;
  }();
  return root;
}

fs::path reconstruction(const std::string& method, const std::string& delta) {
  const auto out = g_work / ("pred_" + method + "_" + delta);
  if (fs::exists(out / "run.json")) return out;
  fs::remove_all(out);
  if (cli({"reconstruct", "--data", dataset().string(), "--method", method, "--delta", delta, "--out", out.string()}) !=
      kExitOk)
    throw std::runtime_error("reconstruction failed: " + method + " at " + delta);
  return out;
}

// --- 5 ---------------------------------------------------------------------
void dbar_sanity(Verdict& v) {
  const auto flat = reconstruct_dbar(dtn_homogeneous(), 0.0);
  bool exact = true;
  for (double x : flat.image.values) exact = exact && x == 1.0;
  v.check(exact, "t = 0 gives sigma = 1 exactly");

  const KGrid grid(5.0);
  const auto dtn = ntd_to_dtn(compute_ntd(phantom_to_mesh(disk({0.3, -0.2}, 0.3, 0.2, 1.8, 0.7), forward_mesh()),
                                          CurrentBasis{})
                                  .ntd);
  const auto t = scattering_transform_exp(dtn, grid);
  double asym = 0.0, scale = 0.0;
  const int n = grid.size();
  for (std::size_t idx : grid.active_points()) {
    const int i = static_cast<int>(idx) / n, j = static_cast<int>(idx) % n;
    asym = std::max(asym, std::abs(t.values[grid.flat(n - i, n - j)] - std::conj(t.values[idx])));
    scale = std::max(scale, std::abs(t.values[idx]));
  }
  v.detail << "conjugate asymmetry " << asym / scale << "; ";
  v.check(asym <= 1e-8 * scale, "t(-k) = conj t(k) within 1e-8");

  const std::map<std::string, double> expected{{"0", 5.0}, {"0.01", 4.5}, {"0.05", 4.0}};
  double slowest = 0.0;
  for (const auto& [delta, radius] : expected) {
    const auto out = g_work / ("cutoff_" + delta);
    fs::remove_all(out);
    const int code = cli({"reconstruct", "--data", dataset().string(), "--method", "dbar", "--delta", delta, "--samples",
                          "0:1", "--out", out.string()});
    v.check(code == kExitOk, "dbar run at delta " + delta);
    if (code != kExitOk) continue;
    const auto run = read_json(out / "run.json");
    const double r = run["samples"][0]["R"].get<double>();
    slowest = std::max(slowest, run["samples"][0]["wallSeconds"].get<double>());
    v.detail << "R(" << delta << ")=" << r << " ";
    v.check(std::abs(r - radius) < 1e-12, "cutoff at delta " + delta);
  }
  v.detail << "; slowest sample " << slowest << " s ";
  v.check(slowest <= 120.0, "runtime <= 2 min per sample");
}

// --- 6 ---------------------------------------------------------------------
void scattering_oracle(Verdict& v) {
  const auto d = radial_dtn(2.0, 0.4);
  auto lambda = [](int n) { return oracle::dtn_eigenvalue(n, 2.0, 0.4); };
  double worst = 0.0;
  for (Complex k : {Complex(1.0, 0.0), Complex(0.0, 2.0), Complex(1.5, 1.5), Complex(-3.0, 0.5), Complex(4.2, 0.0)}) {
    const Complex expected = oracle::born_transform(k, lambda);
    worst = std::max(worst, std::abs(scattering_point(d, k) - expected) / std::abs(expected));
  }
  // the same comparison against the transform of simulated data
  const auto sim = ntd_to_dtn(compute_ntd(phantom_to_mesh(disk({0.0, 0.0}, 0.4, 0.4, 2.0), forward_mesh()),
                                          CurrentBasis{})
                                  .ntd);
  double sim_worst = 0.0;
  for (Complex k : {Complex(1.0, 0.0), Complex(0.0, 2.0), Complex(1.5, 1.5), Complex(-3.0, 0.5), Complex(4.2, 0.0)}) {
    const Complex expected = oracle::born_transform(k, lambda);
    sim_worst = std::max(sim_worst, std::abs(scattering_point(sim, k) - expected) / std::abs(expected));
  }
  v.detail << "max rel err " << worst << " (radial DtN), " << sim_worst << " (FEM DtN, informational) ";
  v.check(worst <= 0.01, "within 1% at 5 k-values");
}

// --- 7 ---------------------------------------------------------------------
void metrics_suite(Verdict& v) {
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  std::vector<double> truth(200);
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = 1.0 + 0.5 * std::sin(0.37 * static_cast<double>(i));
  const auto id = evaluate_pixels(truth, truth);
  v.check(id.rie == 0.0 && id.rmse == 0.0 && id.mae == 0.0 && id.rle == 0.0 && near(id.icc, 1.0) && id.dc == 1.0,
          "identity example");

  const std::vector<double> t2{1.0, 2.0}, p2{1.0, 1.0};
  const auto two = evaluate_pixels(p2, t2);
  v.check(near(two.rie, 1.0 / 3.0) && near(two.mae, 0.5) && near(two.rmse, std::sqrt(0.5)) &&
              near(two.rle, 1.0 / std::sqrt(5.0)),
          "two-pixel example");

  auto shifted = truth;
  for (auto& x : shifted) x += 0.5;
  const auto sh = evaluate_pixels(shifted, truth);
  v.check(near(sh.icc, 1.0) && near(sh.rmse, 0.5) && near(sh.mae, 0.5), "shift example");
  v.detail << "identity, two-pixel and shift examples to 1e-12 ";
}

// --- 8 ---------------------------------------------------------------------
std::map<std::pair<std::string, std::string>, MetricReport> mean_rows(const fs::path& csv) {
  std::map<std::pair<std::string, std::string>, MetricReport> out;
  std::ifstream is(csv);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("mean,", 0) != 0) continue;
    std::vector<std::string> c;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) c.push_back(f);
    MetricReport r;
    r.rie = std::stod(c[3]);
    r.icc = std::stod(c[4]);
    r.dc = std::stod(c[5]);
    r.rmse = std::stod(c[6]);
    r.mae = std::stod(c[7]);
    r.rle = std::stod(c[8]);
    const double delta = std::stod(c[2]);
    out[{c[1], delta == 0.0 ? "0" : noise_tag(delta)}] = r;
  }
  return out;
}

void noise_trend(Verdict& v) {
  const auto t0 = Clock::now();
  std::vector<std::string> args{"evaluate", "--data", dataset().string()};
  for (const char* method : {"sparsity", "dbar"})
    for (const char* delta : {"0", "0.05"}) {
      args.push_back("--pred");
      args.push_back(reconstruction(method, delta).string());
    }
  const auto csv = g_work / "report.csv";
  args.push_back("--out");
  args.push_back(csv.string());
  v.check(cli(args) == kExitOk, "evaluate over all samples");
  auto m = mean_rows(csv);
  const auto& s0 = m[{"sparsity", "0"}];
  const auto& s5 = m[{"sparsity", "0.05"}];
  const auto& d0 = m[{"dbar", "0"}];
  const auto& d5 = m[{"dbar", "0.05"}];
  v.detail << kSamples << " samples; RLE sparsity " << s0.rle << " -> " << s5.rle << " ("
           << 100.0 * (s5.rle / s0.rle - 1.0) << "%), dbar " << d0.rle << " -> " << d5.rle << "; RIE at 0: dbar "
           << d0.rie << " vs sparsity " << s0.rie << "; " << seconds_since(t0) << " s ";
  v.check(s5.rle <= 1.25 * s0.rle, "sparsity RLE grows by at most 25%");
  v.check(d5.rle >= d0.rle, "dbar RLE does not improve with noise");
  v.check(d0.rie > s0.rie, "dbar RIE above sparsity RIE at delta 0");
}

// --- 9 ---------------------------------------------------------------------
void determinism(Verdict& v) {
  const auto again = g_work / "dataset_threads2";
  fs::remove_all(again);
  v.check(cli({"generate", "--out", again.string(), "--n", std::to_string(kSamples), "--seed", "2024", "--threads",
               "2"}) == kExitOk,
          "regenerate with 2 threads");
  v.check(testing::snapshot(dataset()) == testing::snapshot(again), "dataset byte-identical across runs and threads");
  fs::remove_all(again);

  // every method re-run on a subset, once more single-threaded and once on two threads
  const std::vector<std::pair<std::string, std::string>> runs{{"sparsity", "0.05"}, {"dbar", "0"}, {"dsm-index", "0.01"}};
  for (const auto& [method, delta] : runs) {
    std::map<std::string, std::string> images[2];
    for (int pass = 0; pass < 2; ++pass) {
      const auto out = g_work / ("repeat_" + method + "_" + std::to_string(pass));
      fs::remove_all(out);
      v.check(cli({"reconstruct", "--data", dataset().string(), "--method", method, "--delta", delta, "--samples", "0:4",
                   "--out", out.string(), "--threads", pass == 0 ? "1" : "2"}) == kExitOk,
              method + " rerun");
      images[pass] = testing::snapshot(out, true);
      fs::remove_all(out);
    }
    v.check(!images[0].empty() && images[0] == images[1], method + " byte-identical across 1 and 2 threads");
    if (method != "dsm-index") {
      // and identical to the full single-threaded run of criterion 8
      const auto full = testing::snapshot(reconstruction(method, delta), true);
      bool same = true;
      for (const auto& [name, bytes] : images[0]) same = same && full.contains(name) && full.at(name) == bytes;
      v.check(same, method + " byte-identical to the full run");
    }
    v.detail << method << " ok; ";
  }
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "eit_acceptance";
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"homogeneous NtD", homogeneous_ntd},
      {"radial oracle", radial_oracle},
      {"gradient check", gradient_check},
      {"sparsity sanity", sparsity_sanity},
      {"D-bar sanity", dbar_sanity},
      {"scattering-transform oracle", scattering_oracle},
      {"metrics suite", metrics_suite},
      {"noise trend", noise_trend},
      {"determinism", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "[exception: " << e.what() << "] ";
    }
    failures += !v.pass;
    std::printf("criterion %zu: %s  %s -- %s(%.1f s)\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                v.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
