#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtoo/machine.hpp"

namespace mtoo {

/// Combined multi-technology design encoding:
/// index 0 holds the technology tag, followed by the ASM block and the PMSM
/// block; exactly one block is non-zero.
using CombinedVector = std::vector<double>;

/// The two active schemas plus the combined-vector layout derived from them.
struct SchemaPair {
  TechnologySchema asm_schema;
  TechnologySchema pmsm_schema;

  int asm_dim() const { return asm_schema.native_dim(); }
  int pmsm_dim() const { return pmsm_schema.native_dim(); }
  int combined_dim() const { return 1 + asm_dim() + pmsm_dim(); }
  int block_offset(int technology_id) const;
  const TechnologySchema& schema(int technology_id) const;

  static SchemaPair defaults(SchemaProfile profile);
};

struct DatasetRecord {
  MachineDesign design;
  KpiVector kpis;
};

struct DatasetMeta {
  std::int64_t count_asm = 0;
  std::int64_t count_pmsm = 0;
  std::uint64_t seed = 0;
  double oversample = 0.0;
  std::string fingerprint_asm;
  std::string fingerprint_pmsm;
  std::string generated_at;  // wall-clock stamp; the only non-reproducible field
};

struct Dataset {
  std::vector<DatasetRecord> records;
  DatasetMeta meta;

  /// Re-checks count bookkeeping and the <=3% technology balance.
  void validate_counts() const;
};

/// Latin hypercube sample of n designs: each continuous parameter gets one
/// value per equal-width stratum (uniform within, shuffled across designs);
/// discrete parameters are drawn uniformly from their domains.
std::vector<MachineDesign> lhs_sample(const TechnologySchema& schema, int n, std::uint64_t seed);

/// LHS-oversample, geometry-filter, truncate to exactly n_per_tech valid
/// designs per technology, then label with the analytical oracle.
/// Throws DataError (reporting the achieved count) if the oversampled pool
/// does not contain enough valid designs.
Dataset generate_dataset(const SchemaPair& schemas, const SystemParameters& sys, int n_per_tech,
                         std::uint64_t seed, double oversample = 1.3, int threads = 1);

CombinedVector encode_combined(const MachineDesign& design, const SchemaPair& schemas);

/// Inverse of encode_combined. The tag is rounded to the nearest integer and
/// must land in {1,2}; discrete entries are rounded to the nearest domain
/// member (ties toward the smaller value); continuous entries are clamped to
/// bounds only when clamp_continuous is set.
MachineDesign decode_combined(const CombinedVector& v, const SchemaPair& schemas,
                              bool clamp_continuous = false);

/// True iff index 0 is in {1,2} and only that technology's block is non-zero.
bool has_single_active_block(const CombinedVector& v, const SchemaPair& schemas);

struct SplitResult {
  Dataset train, val, test;
};

/// Deterministic stratified split: per technology the records are shuffled by
/// seed and partitioned by the given fractions (disjoint and exhaustive).
SplitResult split(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed);

/// Min-max statistics fitted on a training split only. Degenerate columns
/// (max == min) normalize to 0 and invert back to the constant.
struct NormalizationStats {
  std::vector<double> vec_min, vec_max;
  std::array<double, 3> kpi_min{}, kpi_max{};

  std::vector<double> apply_vec(const std::vector<double>& x) const;
  std::vector<double> invert_vec(const std::vector<double>& y) const;
  std::array<double, 3> apply_kpi(const std::array<double, 3>& k) const;
  std::array<double, 3> invert_kpi(const std::array<double, 3>& k) const;

  // column-batched variants (one sample per column)
  Eigen::MatrixXd apply_vec(const Eigen::MatrixXd& cols) const;
  Eigen::MatrixXd invert_vec(const Eigen::MatrixXd& cols) const;
  Eigen::MatrixXd apply_kpi(const Eigen::MatrixXd& cols) const;
  Eigen::MatrixXd invert_kpi(const Eigen::MatrixXd& cols) const;
};

NormalizationStats fit_normalization(const Dataset& train, const SchemaPair& schemas);

/// Combined vectors of all records as columns of a d x N matrix.
Eigen::MatrixXd combined_matrix(const Dataset& ds, const SchemaPair& schemas);
/// KPI triples of all records as columns of a 3 x N matrix.
Eigen::MatrixXd kpi_matrix(const Dataset& ds);

/// CSV with header `tech,<asm params...>,<pmsm params...>,k1,k2,k3`; reals are
/// written with 17 significant digits so a read-back is value-exact. The meta
/// sidecar (JSON) lands next to it with extension `.meta.json`.
void write_dataset_csv(const Dataset& ds, const SchemaPair& schemas, const std::string& path);
Dataset read_dataset_csv(const SchemaPair& schemas, const std::string& path);

}  // namespace mtoo
