#include "eit/metrics.hpp"

#include <cmath>
#include <ostream>

namespace eit {

namespace {

long rounded(double v) { return std::lround(v * 100.0); }

}  // namespace

MetricReport evaluate_pixels(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("evaluate: pixel counts differ");
  if (truth.empty()) throw std::invalid_argument("evaluate: no pixels");
  const auto n = static_cast<double>(truth.size());

  double abs_diff = 0.0, abs_truth = 0.0, sq_diff = 0.0, sq_truth = 0.0;
  double mean_p = 0.0, mean_t = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = pred[i] - truth[i];
    abs_diff += std::abs(d);
    abs_truth += std::abs(truth[i]);
    sq_diff += d * d;
    sq_truth += truth[i] * truth[i];
    mean_p += pred[i];
    mean_t += truth[i];
  }
  if (abs_truth == 0.0) throw std::invalid_argument("evaluate: truth is identically zero");
  mean_p /= n;
  mean_t /= n;

  MetricReport r;
  r.n_pixels = static_cast<int>(truth.size());
  r.rie = abs_diff / abs_truth;
  r.rmse = std::sqrt(sq_diff / n);
  r.mae = abs_diff / n;
  r.rle = std::sqrt(sq_diff / sq_truth);

  double cov = 0.0, var_p = 0.0, var_t = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double a = pred[i] - mean_p, b = truth[i] - mean_t;
    cov += a * b;
    var_p += a * a;
    var_t += b * b;
  }
  if (var_p == 0.0 || var_t == 0.0) {
    r.icc_undefined = true;
  } else {
    r.icc = std::clamp(cov / std::sqrt(var_p * var_t), -1.0, 1.0);
  }

  // Supports are pixels that differ from background after rounding to two decimals.
  long x = 0, y = 0, both = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const long t = rounded(truth[i]), p = rounded(pred[i]);
    x += t != 100;
    y += p != 100;
    both += (t != 100 && p != 100 && t == p);
  }
  r.dc = (x + y == 0) ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(x + y);
  return r;
}

MetricReport evaluate(const PixelImage& pred, const PixelImage& truth) {
  if (pred.values.size() != truth.values.size()) throw std::invalid_argument("evaluate: image sizes differ");
  std::vector<double> p, t;
  const auto& mask = PixelImage::mask();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    p.push_back(pred.values[i]);
    t.push_back(truth.values[i]);
  }
  return evaluate_pixels(p, t);
}

MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.rie += r.rie;
    m.icc += r.icc;
    m.dc += r.dc;
    m.rmse += r.rmse;
    m.mae += r.mae;
    m.rle += r.rle;
    m.n_pixels += r.n_pixels;
    m.icc_undefined = m.icc_undefined || r.icc_undefined;
  }
  const auto n = static_cast<double>(reports.size());
  m.rie /= n;
  m.icc /= n;
  m.dc /= n;
  m.rmse /= n;
  m.mae /= n;
  m.rle /= n;
  return m;
}

void write_metrics_csv(std::ostream& os, std::span<const MetricRow> rows) {
  const auto flags = os.flags();
  const auto precision = os.precision(17);
  os << "sample,method,delta,rie,icc,dc,rmse,mae,rle\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << row.sample << ',' << row.method << ',' << row.delta << ',' << r.rie << ',' << r.icc << ',' << r.dc << ','
       << r.rmse << ',' << r.mae << ',' << r.rle << '\n';
  }
  os.precision(precision);
  os.flags(flags);
}

}  // namespace eit
