#include "mtoo/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mtoo/errors.hpp"

namespace mtoo {

MetricReport compute_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DataError("compute_metrics: length mismatch");
  if (pred.empty()) throw DataError("compute_metrics: empty input");

  MetricReport r;
  r.count = static_cast<int>(pred.size());
  double abs_sum = 0.0, sq_sum = 0.0, rel_sum = 0.0;
  int rel_n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(truth[i]) > 1e-9) {
      rel_sum += std::abs(e) / std::abs(truth[i]);
      ++rel_n;
    } else {
      ++r.mre_excluded;
    }
  }
  const double n = static_cast<double>(pred.size());
  r.mae = abs_sum / n;
  r.rmse = std::sqrt(sq_sum / n);
  r.mre_percent = rel_n > 0 ? rel_sum / rel_n * 100.0 : 0.0;
  r.mre_warning = r.mre_excluded > 0 && static_cast<double>(r.mre_excluded) > 0.01 * n;

  if (pred.size() >= 2) {
    double mp = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      mp += pred[i];
      mt += truth[i];
    }
    mp /= n;
    mt /= n;
    double cov = 0.0, vp = 0.0, vt = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      cov += (pred[i] - mp) * (truth[i] - mt);
      vp += (pred[i] - mp) * (pred[i] - mp);
      vt += (truth[i] - mt) * (truth[i] - mt);
    }
    if (vp > 0.0 && vt > 0.0) r.pcc = cov / std::sqrt(vp * vt);
  }
  return r;
}

ComparisonRow compare_reports(const std::string& technology, const std::string& quantity,
                              const MetricReport& vae, const MetricReport& dnn) {
  ComparisonRow row;
  row.technology = technology;
  row.quantity = quantity;
  row.vae = vae;
  row.dnn = dnn;
  row.mae_delta = vae.mae - dnn.mae;
  return row;
}

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}
}  // namespace

std::string report_to_csv_row(const std::string& label, const MetricReport& r) {
  std::ostringstream os;
  os << label << ',' << num(r.mae) << ',' << num(r.rmse) << ','
     << (r.pcc ? num(*r.pcc) : std::string("")) << ',' << num(r.mre_percent) << ',' << r.count;
  return os.str();
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "technology,quantity,vae_mae,dnn_mae,mae_delta,vae_rmse,dnn_rmse,vae_pcc,dnn_pcc,"
        "vae_mre_pct,dnn_mre_pct\n";
  for (const auto& r : rows) {
    os << r.technology << ',' << r.quantity << ',' << num(r.vae.mae) << ',' << num(r.dnn.mae)
       << ',' << num(r.mae_delta) << ',' << num(r.vae.rmse) << ',' << num(r.dnn.rmse) << ','
       << (r.vae.pcc ? num(*r.vae.pcc) : std::string("")) << ','
       << (r.dnn.pcc ? num(*r.dnn.pcc) : std::string("")) << ',' << num(r.vae.mre_percent) << ','
       << num(r.dnn.mre_percent) << '\n';
  }
  return os.str();
}

std::string comparison_to_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %-14s %12s %12s %12s\n", "tech", "quantity", "vae_mae",
                "dnn_mae", "delta");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-6s %-14s %12.5g %12.5g %12.5g\n", r.technology.c_str(),
                  r.quantity.c_str(), r.vae.mae, r.dnn.mae, r.mae_delta);
    os << line;
  }
  return os.str();
}

}  // namespace mtoo
