#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtoo/dataset.hpp"
#include "mtoo/nn.hpp"

namespace mtoo {

struct VaeConfig {
  int input_dim = 0;   // d = 1 + d_asm + d_pmsm
  int latent_dim = 0;  // l, must satisfy max(d_asm, d_pmsm) <= l <= d
  int epochs = 100;
  int patience = 20;
  int batch_size = 50;
  double lr_start = 1e-4;  // decays log-linearly to lr_end over the epoch budget
  double lr_end = 1e-5;
  // Weight of the KL regularizer relative to the two MSE terms. The unweighted
  // sum makes the KL term dominate on unit-normalized data and the latent code
  // collapses to the technology tag; 1e-5 keeps the aggregate posterior close
  // to N(0,I) while leaving reconstruction precision at the per-mille level.
  double kl_weight = 1e-5;
  std::uint64_t seed = 1;

  static VaeConfig for_profile(SchemaProfile profile, const SchemaPair& schemas);
  void validate(const SchemaPair& schemas) const;
};

struct LatentDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;  // strictly positive (exp of a half log-variance head)
};

struct TrainingCurvePoint {
  int epoch = 0;
  double lr = 0.0;
  double train_total = 0.0, train_recon = 0.0, train_kpi = 0.0, train_kl = 0.0;
  double val_total = 0.0, val_recon = 0.0, val_kpi = 0.0, val_kl = 0.0;
};

/// Encoder (trunk + two heads), decoder and KPI predictor with the
/// normalization statistics and schema fingerprints they were trained under.
struct ModelBundle {
  VaeConfig config;
  nn::Network encoder_trunk;
  nn::Network mean_head;
  nn::Network logvar_head;
  nn::Network decoder;
  nn::Network predictor;
  NormalizationStats stats;
  std::string fingerprint_asm, fingerprint_pmsm;
  std::vector<TrainingCurvePoint> curves;
  bool trained = false;
};

/// Builds the untrained three-network bundle for the given config; layer
/// shapes follow the fixed channel/width plan with lengths scaled to d.
ModelBundle build_vae(const VaeConfig& config, const SchemaPair& schemas);

/// Hidden-layer plan of the KPI predictor (the direct models reuse it).
std::vector<nn::LayerSpec> predictor_specs(int input_dim);

/// Joint training under mse(p) + mse(k) + kl_weight * KL with Adam, a
/// log-linear learning-rate decay, per-sample fresh noise, and early stopping
/// on the validation total loss (best weights restored).
void train_vae(ModelBundle& bundle, const Dataset& train, const Dataset& val,
               const SchemaPair& schemas);

/// p must already be normalized with the bundle stats.
LatentDistribution encode(ModelBundle& bundle, const CombinedVector& p_normalized);

/// Decoded, denormalized combined vector (no clamping; transformation is the
/// optimizer's job).
CombinedVector decode(ModelBundle& bundle, const Eigen::VectorXd& z);

KpiVector predict_kpis(ModelBundle& bundle, const Eigen::VectorXd& z);

// Column-batched raw-space helpers (normalization applied/inverted inside).
Eigen::MatrixXd encode_mean_batch(ModelBundle& bundle, const Eigen::MatrixXd& raw_cols);
Eigen::MatrixXd decode_batch(ModelBundle& bundle, const Eigen::MatrixXd& z_cols);
Eigen::MatrixXd predict_kpis_batch(ModelBundle& bundle, const Eigen::MatrixXd& z_cols);

void save_bundle(const ModelBundle& bundle, const std::string& path);
/// Refuses to load when the stored schema fingerprints mismatch the active
/// schemas.
ModelBundle load_bundle(const std::string& path, const SchemaPair& schemas);

void write_curves_csv(const std::vector<TrainingCurvePoint>& curves, const std::string& path);

}  // namespace mtoo
