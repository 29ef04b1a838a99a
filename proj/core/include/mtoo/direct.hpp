#pragma once

#include <string>
#include <vector>

#include "mtoo/dataset.hpp"
#include "mtoo/vae.hpp"

namespace mtoo {

/// Per-technology supervised KPI predictor. Shares the hidden-layer plan of
/// the VAE KPI predictor; only the input layer differs.
struct DirectModel {
  int technology_id = 0;
  nn::Network network;
  std::vector<double> in_min, in_max;  // native-vector min-max (train split)
  std::array<double, 3> kpi_min{}, kpi_max{};
  std::string fingerprint;
  std::vector<TrainingCurvePoint> curves;  // recon/kl columns stay zero
  bool trained = false;
};

/// Native parameter vectors (continuous then discrete) as columns.
Eigen::MatrixXd native_matrix(const Dataset& ds, const TechnologySchema& schema);

/// Same loop as the VAE minus reconstruction and KL: plain MSE on normalized
/// KPIs with Adam, the log-linear learning-rate decay and early stopping.
/// hyper: epochs/patience/batch/lr/seed are used; latent fields are ignored.
DirectModel train_direct(const TechnologySchema& schema, const Dataset& train, const Dataset& val,
                         const VaeConfig& hyper);

KpiVector predict_direct(DirectModel& model, const MachineDesign& design);
/// raw native columns in, denormalized KPI columns out.
Eigen::MatrixXd predict_direct_batch(DirectModel& model, const Eigen::MatrixXd& native_cols);

void save_direct(const DirectModel& model, const std::string& path);
DirectModel load_direct(const std::string& path, const TechnologySchema& schema);

}  // namespace mtoo
