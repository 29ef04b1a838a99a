#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mtoo {

inline constexpr int kTechAsm = 1;
inline constexpr int kTechPmsm = 2;

struct ContinuousParam {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  std::string unit;
};

struct DiscreteParam {
  std::string name;
  std::vector<int> domain;  // finite, sorted ascending
};

/// Parameter schema of one machine technology. Continuous parameters come
/// first in the native vector ordering, discrete parameters after them.
struct TechnologySchema {
  int technology_id = 0;
  std::string name;
  std::vector<ContinuousParam> continuous;
  std::vector<DiscreteParam> discrete;

  int native_dim() const { return static_cast<int>(continuous.size() + discrete.size()); }

  /// Checks the schema invariants (lower < upper, non-empty domains, unique
  /// names); throws ConfigError on violation.
  void validate() const;

  /// Self-describing JSON document (name, bounds, domains, ordering).
  std::string to_json() const;

  /// FNV-1a hash of the canonical JSON, hex-encoded. Persisted files carry it
  /// so stale artifacts are rejected instead of silently misread.
  std::string fingerprint() const;
};

enum class SchemaProfile { desk, paper_shape };

SchemaProfile schema_profile_from_string(const std::string& s);

/// The two technology schemas. The desk profile uses the published bounds
/// (5 continuous + 4 discrete parameters per technology). paper_shape appends
/// generic [0,1] filler parameters so the native dimensions grow to 18 and 33.
std::pair<TechnologySchema, TechnologySchema> default_schemas(SchemaProfile profile);

struct MachineDesign {
  int technology_id = 0;
  std::vector<double> continuous_values;
  std::vector<int> discrete_values;
};

struct SystemParameters {
  double dc_voltage = 650.0;   // V
  double dc_current = 400.0;   // A
  std::vector<double> speed_grid;  // rpm, strictly increasing

  static SystemParameters defaults();
  void validate() const;
};

struct KpiVector {
  double material_cost = 0.0;  // euro
  double max_power = 0.0;      // kW
  double max_torque = 0.0;     // Nm

  std::array<double, 3> as_array() const { return {material_cost, max_power, max_torque}; }
};

struct ValidityReport {
  bool valid = true;
  std::vector<std::string> violations;  // rule ids, e.g. "G1"
};

/// Rule-based geometry check. Reports every violated rule, not just the first.
/// ASM:  G1 stator_outer >= rotor_outer + 2*air_gap + 30,
///       G2 rotor_slot_height <= 0.4*(rotor_outer/2), G3 all bounds/domains.
/// PMSM: G1 stator_outer >= rotor_outer + 2*air_gap + 30,
///       G2 tooth_height <= 0.4*((stator_outer - rotor_outer - 2*air_gap)/2),
///       G3 bounds/domains.
ValidityReport validate_geometry(const MachineDesign& design, const TechnologySchema& schema);

/// Constants of the analytical KPI evaluator, single source of truth.
struct OracleConstants {
  static constexpr double active_length_mm = 120.0;
  // prices, euro/kg
  static constexpr double price_steel = 1.0;
  static constexpr double price_copper = 8.0;
  static constexpr double price_aluminium = 2.5;
  static constexpr double price_magnet = 60.0;
  // densities, g/cm^3
  static constexpr double density_steel = 7.65;
  static constexpr double density_copper = 8.96;
  static constexpr double density_aluminium = 2.7;
  static constexpr double density_magnet = 7.5;
  // airgap shear stress scale, N/m^2
  static constexpr double shear_asm = 30e3;
  static constexpr double shear_pmsm = 45e3;
  static constexpr double magnet_height_ref_mm = 5.0;
  static constexpr double magnet_mm_per_degree = 0.2;
};

/// Deterministic closed-form KPI evaluation of a geometrically valid design.
/// Pure function: identical inputs give bit-identical outputs. Throws
/// DataError on schema mismatch and NumericError on non-finite intermediates.
KpiVector evaluate_kpis(const MachineDesign& design, const TechnologySchema& schema,
                        const SystemParameters& sys);

}  // namespace mtoo
