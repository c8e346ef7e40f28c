#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "eit/phantom.hpp"

namespace eit {

struct MetricReport {
  double rie = 0.0;
  double icc = 0.0;
  double dc = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double rle = 0.0;
  int n_pixels = 0;
  bool icc_undefined = false;  // one of the inputs has zero variance
};

/// The six image metrics over paired pixel values. Throws std::invalid_argument
/// on a length mismatch, an empty input or a truth vector that is all zero.
MetricReport evaluate_pixels(std::span<const double> pred, std::span<const double> truth);

/// evaluate_pixels over the on-mask pixels of two images.
MetricReport evaluate(const PixelImage& pred, const PixelImage& truth);

struct MetricRow {
  std::string sample;  // sample index, or "mean" for aggregates
  std::string method;
  double delta = 0.0;
  MetricReport report;
};

/// Mean of each metric over the reports.
MetricReport mean_report(std::span<const MetricReport> reports);

/// CSV with header sample,method,delta,rie,icc,dc,rmse,mae,rle and 17 significant digits.
void write_metrics_csv(std::ostream& os, std::span<const MetricRow> rows);

}  // namespace eit
