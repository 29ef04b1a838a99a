#include "mtoo/machine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

#include "mtoo/errors.hpp"
#include "json.hpp"

namespace mtoo {

namespace {

// Native-order indices of the geometry-relevant parameters in both desk
// schemas: p1 stator outer diameter, and per technology the rotor outer
// diameter / air gap pair (swapped between ASM and PMSM).
constexpr int kStatorOuter = 0;
constexpr int kAsmAirGap = 1;
constexpr int kAsmRotorOuter = 2;
constexpr int kAsmSlotHeight = 3;
constexpr int kAsmSlotWidth = 4;
constexpr int kPmsmRotorOuter = 1;
constexpr int kPmsmAirGap = 2;
constexpr int kPmsmToothHeight = 3;
constexpr int kPmsmMagnetAngle = 4;

TechnologySchema asm_schema() {
  TechnologySchema s;
  s.technology_id = kTechAsm;
  s.name = "asm";
  s.continuous = {
      {"stator_outer_diameter", 159.0, 232.0, "mm"},
      {"air_gap", 0.65, 1.7, "mm"},
      {"rotor_outer_diameter", 85.0, 190.0, "mm"},
      {"rotor_slot_height", 10.0, 21.0, "mm"},
      {"rotor_slot_width", 0.6, 1.5, "mm"},
  };
  s.discrete = {
      {"slots_per_pole_phase", {2, 3, 4}},
      {"pole_pairs", {2, 3, 4}},
      {"winding_connection", {0, 1}},  // 0 star, 1 delta
      {"winding_scheme", {0, 1}},      // 0 short pitch, 1 full pitch
  };
  return s;
}

TechnologySchema pmsm_schema() {
  TechnologySchema s;
  s.technology_id = kTechPmsm;
  s.name = "pmsm";
  s.continuous = {
      {"stator_outer_diameter", 159.0, 232.0, "mm"},
      {"rotor_outer_diameter", 100.0, 197.0, "mm"},
      {"air_gap", 0.8, 2.2, "mm"},
      {"stator_tooth_height", 10.0, 20.0, "mm"},
      {"magnet_layer1_angle", 17.0, 32.0, "deg"},
  };
  s.discrete = {
      {"slots_per_pole_phase", {2, 3, 4}},
      {"pole_pairs", {3, 4, 5}},
      {"winding_connection", {0, 1}},
      {"winding_scheme", {0, 1}},
  };
  return s;
}

void append_fillers(TechnologySchema& s, int target_dim) {
  int i = 0;
  while (s.native_dim() < target_dim) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "filler_%02d", i++);
    s.continuous.push_back({buf, 0.0, 1.0, "-"});
  }
}

}  // namespace

void TechnologySchema::validate() const {
  std::set<std::string> names;
  for (const auto& p : continuous) {
    if (!(p.lower < p.upper))
      throw ConfigError("schema " + name + ": parameter " + p.name + " has lower >= upper");
    if (!names.insert(p.name).second)
      throw ConfigError("schema " + name + ": duplicate parameter name " + p.name);
  }
  for (const auto& p : discrete) {
    if (p.domain.empty())
      throw ConfigError("schema " + name + ": parameter " + p.name + " has empty domain");
    if (!names.insert(p.name).second)
      throw ConfigError("schema " + name + ": duplicate parameter name " + p.name);
  }
  if (native_dim() <= 0) throw ConfigError("schema " + name + ": empty schema");
}

std::string TechnologySchema::to_json() const {
  nlohmann::json j;
  j["technology_id"] = technology_id;
  j["name"] = name;
  j["continuous"] = nlohmann::json::array();
  for (const auto& p : continuous)
    j["continuous"].push_back({{"name", p.name}, {"lower", p.lower}, {"upper", p.upper}, {"unit", p.unit}});
  j["discrete"] = nlohmann::json::array();
  for (const auto& p : discrete)
    j["discrete"].push_back({{"name", p.name}, {"domain", p.domain}});
  return j.dump();
}

std::string TechnologySchema::fingerprint() const {
  const std::string doc = to_json();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : doc) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SchemaProfile schema_profile_from_string(const std::string& s) {
  if (s == "desk") return SchemaProfile::desk;
  if (s == "paper_shape") return SchemaProfile::paper_shape;
  throw ConfigError("unknown schema profile '" + s + "' (expected desk or paper_shape)");
}

std::pair<TechnologySchema, TechnologySchema> default_schemas(SchemaProfile profile) {
  auto a = asm_schema();
  auto p = pmsm_schema();
  if (profile == SchemaProfile::paper_shape) {
    append_fillers(a, 18);
    append_fillers(p, 33);
  }
  a.validate();
  p.validate();
  return {a, p};
}

SystemParameters SystemParameters::defaults() {
  SystemParameters sys;
  sys.speed_grid.push_back(1.0);
  for (double n = 1000.0; n <= 16000.0; n += 1000.0) sys.speed_grid.push_back(n);
  return sys;
}

void SystemParameters::validate() const {
  if (dc_voltage <= 0.0 || dc_current <= 0.0)
    throw ConfigError("system parameters: voltage and current must be positive");
  if (speed_grid.empty()) throw ConfigError("system parameters: empty speed grid");
  for (std::size_t i = 0; i < speed_grid.size(); ++i) {
    if (speed_grid[i] <= 0.0) throw ConfigError("system parameters: speeds must be positive");
    if (i > 0 && speed_grid[i] <= speed_grid[i - 1])
      throw ConfigError("system parameters: speed grid must be strictly increasing");
  }
}

ValidityReport validate_geometry(const MachineDesign& design, const TechnologySchema& schema) {
  if (design.technology_id != schema.technology_id)
    throw DataError("validate_geometry: design/schema technology mismatch");
  if (design.continuous_values.size() != schema.continuous.size() ||
      design.discrete_values.size() != schema.discrete.size())
    throw DataError("validate_geometry: design size does not match schema");

  ValidityReport rep;
  const auto& c = design.continuous_values;
  if (schema.technology_id == kTechAsm) {
    if (!(c[kStatorOuter] >= c[kAsmRotorOuter] + 2.0 * c[kAsmAirGap] + 30.0))
      rep.violations.push_back("G1");
    if (!(c[kAsmSlotHeight] <= 0.4 * (c[kAsmRotorOuter] / 2.0)))
      rep.violations.push_back("G2");
  } else {
    if (!(c[kStatorOuter] >= c[kPmsmRotorOuter] + 2.0 * c[kPmsmAirGap] + 30.0))
      rep.violations.push_back("G1");
    if (!(c[kPmsmToothHeight] <=
          0.4 * ((c[kStatorOuter] - c[kPmsmRotorOuter] - 2.0 * c[kPmsmAirGap]) / 2.0)))
      rep.violations.push_back("G2");
  }
  bool bounds_ok = true;
  for (std::size_t i = 0; i < schema.continuous.size(); ++i)
    if (c[i] < schema.continuous[i].lower || c[i] > schema.continuous[i].upper) bounds_ok = false;
  for (std::size_t i = 0; i < schema.discrete.size(); ++i) {
    const auto& dom = schema.discrete[i].domain;
    if (std::find(dom.begin(), dom.end(), design.discrete_values[i]) == dom.end())
      bounds_ok = false;
  }
  if (!bounds_ok) rep.violations.push_back("G3");
  rep.valid = rep.violations.empty();
  return rep;
}

KpiVector evaluate_kpis(const MachineDesign& design, const TechnologySchema& schema,
                        const SystemParameters& sys) {
  if (design.technology_id != schema.technology_id)
    throw DataError("evaluate_kpis: design/schema technology mismatch");
  const auto& c = design.continuous_values;
  const auto& d = design.discrete_values;
  const bool is_asm = schema.technology_id == kTechAsm;

  const double rotor_outer = is_asm ? c[kAsmRotorOuter] : c[kPmsmRotorOuter];
  const double air_gap = is_asm ? c[kAsmAirGap] : c[kPmsmAirGap];
  const double gap_lo = is_asm ? 0.65 : 0.8;
  const double gap_hi = is_asm ? 1.7 : 2.2;

  const int slots = d[0];
  const int pole_pairs = d[1];
  const int pole_pairs_min = is_asm ? 2 : 3;
  const double conn_factor = d[2] == 1 ? 1.0 : 0.90;     // delta / star
  const double scheme_factor = d[3] == 1 ? 1.0 : 0.966;  // full / short pitch

  double shear = OracleConstants::shear_asm;
  double magnet_height = 0.0;
  if (!is_asm) {
    magnet_height = c[kPmsmMagnetAngle] * OracleConstants::magnet_mm_per_degree;
    shear = OracleConstants::shear_pmsm *
            (1.0 + 0.3 * magnet_height / OracleConstants::magnet_height_ref_mm);
  }
  const double flux_factor = 1.0 - 0.25 * (air_gap - gap_lo) / (gap_hi - gap_lo);

  const double rotor_radius_m = rotor_outer / 2.0 * 1e-3;
  const double length_m = OracleConstants::active_length_mm * 1e-3;
  const double torque = 2.0 * std::numbers::pi * rotor_radius_m * rotor_radius_m * length_m *
                        shear * flux_factor * conn_factor * scheme_factor *
                        (1.0 + 0.03 * (slots - 2)) * (1.0 + 0.02 * (pole_pairs - pole_pairs_min));

  const double base_speed =
      std::min(12000.0 / pole_pairs * (sys.dc_voltage / 650.0), sys.speed_grid.back());
  const double power = torque * (2.0 * std::numbers::pi * base_speed / 60.0) / 1000.0;

  // Volumes in mm^3; density g/cm^3 / 1e6 converts to kg.
  const double stator_radius = c[kStatorOuter] / 2.0;
  const double rotor_radius = rotor_outer / 2.0;
  const double annulus = std::numbers::pi *
                         (stator_radius * stator_radius -
                          (rotor_radius + air_gap) * (rotor_radius + air_gap)) *
                         OracleConstants::active_length_mm;
  double cost = annulus * 0.6 * OracleConstants::density_steel / 1e6 * OracleConstants::price_steel +
                annulus * 0.25 * OracleConstants::density_copper / 1e6 * OracleConstants::price_copper;
  if (is_asm) {
    const double v_al = 28.0 * c[kAsmSlotHeight] * c[kAsmSlotWidth] * OracleConstants::active_length_mm;
    cost += v_al * OracleConstants::density_aluminium / 1e6 * OracleConstants::price_aluminium;
  } else {
    const double v_mag = 2.0 * std::numbers::pi * rotor_radius * magnet_height *
                         OracleConstants::active_length_mm * 0.3;
    cost += v_mag * OracleConstants::density_magnet / 1e6 * OracleConstants::price_magnet;
  }

  KpiVector k{cost, power, torque};
  for (double v : k.as_array())
    if (!std::isfinite(v)) throw NumericError("evaluate_kpis: non-finite KPI");
  return k;
}

}  // namespace mtoo
