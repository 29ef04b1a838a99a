#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mtoo {

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double mre_percent = 0.0;        // mean of per-sample |e|/|truth|, in percent
  std::optional<double> pcc;       // absent for n < 2 or constant truth
  int count = 0;
  int mre_excluded = 0;            // samples with |truth| <= 1e-9, skipped for MRE
  bool mre_warning = false;        // set when exclusions exceed 1% of samples
};

/// MAE, RMSE, PCC and MRE of predictions against ground truth.
MetricReport compute_metrics(std::span<const double> pred, std::span<const double> truth);

/// One row of the VAE-vs-direct comparison table.
struct ComparisonRow {
  std::string technology;
  std::string quantity;
  MetricReport vae;
  MetricReport dnn;
  double mae_delta = 0.0;  // vae.mae - dnn.mae; negative means the VAE wins
};

ComparisonRow compare_reports(const std::string& technology, const std::string& quantity,
                              const MetricReport& vae, const MetricReport& dnn);

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_to_table(const std::vector<ComparisonRow>& rows);

std::string report_to_csv_row(const std::string& label, const MetricReport& r);

}  // namespace mtoo
