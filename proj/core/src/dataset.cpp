#include "mtoo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "mtoo/errors.hpp"
#include "mtoo/rng.hpp"
#include "json.hpp"

namespace mtoo {

namespace {

std::string iso_timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int round_discrete(double x, const std::vector<int>& domain) {
  // nearest domain member, ties toward the smaller value
  int best = domain.front();
  double best_dist = std::abs(x - best);
  for (int v : domain) {
    const double dist = std::abs(x - v);
    if (dist < best_dist - 1e-15 || (std::abs(dist - best_dist) <= 1e-15 && v < best)) {
      best = v;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace

int SchemaPair::block_offset(int technology_id) const {
  if (technology_id == kTechAsm) return 1;
  if (technology_id == kTechPmsm) return 1 + asm_dim();
  throw DataError("unknown technology id " + std::to_string(technology_id));
}

const TechnologySchema& SchemaPair::schema(int technology_id) const {
  if (technology_id == kTechAsm) return asm_schema;
  if (technology_id == kTechPmsm) return pmsm_schema;
  throw DataError("unknown technology id " + std::to_string(technology_id));
}

SchemaPair SchemaPair::defaults(SchemaProfile profile) {
  auto [a, p] = default_schemas(profile);
  return {std::move(a), std::move(p)};
}

void Dataset::validate_counts() const {
  std::int64_t n_asm = 0, n_pmsm = 0;
  for (const auto& r : records) (r.design.technology_id == kTechAsm ? n_asm : n_pmsm)++;
  if (n_asm != meta.count_asm || n_pmsm != meta.count_pmsm)
    throw DataError("dataset meta counts disagree with records");
  const double hi = static_cast<double>(std::max(n_asm, n_pmsm));
  const double lo = static_cast<double>(std::min(n_asm, n_pmsm));
  if (lo > 0 && (hi - lo) / hi > 0.03)
    throw DataError("dataset technology counts differ by more than 3%");
}

std::vector<MachineDesign> lhs_sample(const TechnologySchema& schema, int n, std::uint64_t seed) {
  if (n < 1) throw DataError("lhs_sample: n must be >= 1");
  Rng rng(seed);
  const int n_cont = static_cast<int>(schema.continuous.size());
  const int n_disc = static_cast<int>(schema.discrete.size());

  std::vector<MachineDesign> out(n);
  for (auto& d : out) {
    d.technology_id = schema.technology_id;
    d.continuous_values.resize(n_cont);
    d.discrete_values.resize(n_disc);
  }
  std::vector<int> strata(n);
  for (int j = 0; j < n_cont; ++j) {
    const auto& p = schema.continuous[j];
    for (int i = 0; i < n; ++i) strata[i] = i;
    rng.shuffle(strata);
    const double width = (p.upper - p.lower) / n;
    for (int i = 0; i < n; ++i)
      out[i].continuous_values[j] = p.lower + (strata[i] + rng.uniform()) * width;
  }
  for (int j = 0; j < n_disc; ++j) {
    const auto& dom = schema.discrete[j].domain;
    for (int i = 0; i < n; ++i)
      out[i].discrete_values[j] =
          dom[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dom.size()) - 1))];
  }
  return out;
}

namespace {

void evaluate_range(const std::vector<MachineDesign>& designs, const TechnologySchema& schema,
                    const SystemParameters& sys, std::vector<KpiVector>& out, std::size_t begin,
                    std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) out[i] = evaluate_kpis(designs[i], schema, sys);
}

std::vector<DatasetRecord> generate_for_tech(const TechnologySchema& schema,
                                             const SystemParameters& sys, int n_per_tech,
                                             std::uint64_t seed, double oversample, int threads) {
  const int pool = static_cast<int>(std::ceil(n_per_tech * oversample));
  auto designs = lhs_sample(schema, pool, seed);

  std::vector<MachineDesign> valid;
  valid.reserve(n_per_tech);
  for (auto& d : designs) {
    if (validate_geometry(d, schema).valid) {
      valid.push_back(std::move(d));
      if (static_cast<int>(valid.size()) == n_per_tech) break;
    }
  }
  if (static_cast<int>(valid.size()) < n_per_tech)
    throw DataError("generate_dataset: only " + std::to_string(valid.size()) + " of " +
                    std::to_string(n_per_tech) + " valid " + schema.name +
                    " designs after oversampling by " + std::to_string(oversample) +
                    "; raise the oversample factor");

  // KPI evaluation is pure per design; parallel chunks merge in index order.
  std::vector<KpiVector> kpis(valid.size());
  if (threads <= 1) {
    evaluate_range(valid, schema, sys, kpis, 0, valid.size());
  } else {
    std::vector<std::thread> workers;
    const std::size_t chunk = (valid.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t b = std::min(valid.size(), t * chunk);
      const std::size_t e = std::min(valid.size(), b + chunk);
      if (b < e)
        workers.emplace_back(evaluate_range, std::cref(valid), std::cref(schema), std::cref(sys),
                             std::ref(kpis), b, e);
    }
    for (auto& w : workers) w.join();
  }

  std::vector<DatasetRecord> records(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i)
    records[i] = {std::move(valid[i]), kpis[i]};
  return records;
}

}  // namespace

Dataset generate_dataset(const SchemaPair& schemas, const SystemParameters& sys, int n_per_tech,
                         std::uint64_t seed, double oversample, int threads) {
  if (n_per_tech < 1) throw DataError("generate_dataset: n_per_tech must be >= 1");
  if (oversample < 1.0) throw ConfigError("generate_dataset: oversample must be >= 1");
  sys.validate();

  Dataset ds;
  auto asm_records = generate_for_tech(schemas.asm_schema, sys, n_per_tech, seed, oversample, threads);
  auto pmsm_records =
      generate_for_tech(schemas.pmsm_schema, sys, n_per_tech, seed + 1, oversample, threads);
  ds.records.reserve(asm_records.size() + pmsm_records.size());
  std::move(asm_records.begin(), asm_records.end(), std::back_inserter(ds.records));
  std::move(pmsm_records.begin(), pmsm_records.end(), std::back_inserter(ds.records));

  ds.meta.count_asm = n_per_tech;
  ds.meta.count_pmsm = n_per_tech;
  ds.meta.seed = seed;
  ds.meta.oversample = oversample;
  ds.meta.fingerprint_asm = schemas.asm_schema.fingerprint();
  ds.meta.fingerprint_pmsm = schemas.pmsm_schema.fingerprint();
  ds.meta.generated_at = iso_timestamp();
  ds.validate_counts();
  return ds;
}

CombinedVector encode_combined(const MachineDesign& design, const SchemaPair& schemas) {
  const auto& schema = schemas.schema(design.technology_id);
  if (design.continuous_values.size() != schema.continuous.size() ||
      design.discrete_values.size() != schema.discrete.size())
    throw DataError("encode_combined: design does not match schema");

  CombinedVector v(static_cast<std::size_t>(schemas.combined_dim()), 0.0);
  v[0] = design.technology_id;
  std::size_t at = static_cast<std::size_t>(schemas.block_offset(design.technology_id));
  for (double x : design.continuous_values) v[at++] = x;
  for (int x : design.discrete_values) v[at++] = x;
  return v;
}

MachineDesign decode_combined(const CombinedVector& v, const SchemaPair& schemas,
                              bool clamp_continuous) {
  if (static_cast<int>(v.size()) != schemas.combined_dim())
    throw DataError("decode_combined: wrong vector length");
  const long tag = std::lround(v[0]);
  if (tag != kTechAsm && tag != kTechPmsm)
    throw DataError("decode_combined: technology tag rounds to " + std::to_string(tag));

  const auto& schema = schemas.schema(static_cast<int>(tag));
  MachineDesign d;
  d.technology_id = static_cast<int>(tag);
  std::size_t at = static_cast<std::size_t>(schemas.block_offset(d.technology_id));
  for (const auto& p : schema.continuous) {
    double x = v[at++];
    if (clamp_continuous) x = std::clamp(x, p.lower, p.upper);
    d.continuous_values.push_back(x);
  }
  for (const auto& p : schema.discrete) d.discrete_values.push_back(round_discrete(v[at++], p.domain));
  return d;
}

bool has_single_active_block(const CombinedVector& v, const SchemaPair& schemas) {
  if (static_cast<int>(v.size()) != schemas.combined_dim()) return false;
  if (v[0] != kTechAsm && v[0] != kTechPmsm) return false;
  const int inactive = v[0] == kTechAsm ? kTechPmsm : kTechAsm;
  const int off = schemas.block_offset(inactive);
  const int dim = inactive == kTechAsm ? schemas.asm_dim() : schemas.pmsm_dim();
  for (int i = off; i < off + dim; ++i)
    if (v[static_cast<std::size_t>(i)] != 0.0) return false;
  return true;
}

SplitResult split(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ConfigError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  SplitResult out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) part->meta = ds.meta;

  Rng rng(seed);
  for (int tech : {kTechAsm, kTechPmsm}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      if (ds.records[i].design.technology_id == tech) idx.push_back(i);
    rng.shuffle(idx);

    const std::size_t n = idx.size();
    std::array<std::size_t, 3> counts{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      counts[s] = static_cast<std::size_t>(std::floor(fractions[s] * n));
      assigned += counts[s];
    }
    for (int s = 0; assigned < n; s = (s + 1) % 3) {
      ++counts[s];
      ++assigned;
    }
    std::size_t at = 0;
    Dataset* parts[3] = {&out.train, &out.val, &out.test};
    for (int s = 0; s < 3; ++s)
      for (std::size_t i = 0; i < counts[s]; ++i) parts[s]->records.push_back(ds.records[idx[at++]]);
  }
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->meta.count_asm = 0;
    part->meta.count_pmsm = 0;
    for (const auto& r : part->records)
      (r.design.technology_id == kTechAsm ? part->meta.count_asm : part->meta.count_pmsm)++;
  }
  return out;
}

std::vector<double> NormalizationStats::apply_vec(const std::vector<double>& x) const {
  if (x.size() != vec_min.size()) throw DataError("normalization: wrong vector length");
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double range = vec_max[i] - vec_min[i];
    y[i] = range > 0.0 ? (x[i] - vec_min[i]) / range : 0.0;
  }
  return y;
}

std::vector<double> NormalizationStats::invert_vec(const std::vector<double>& y) const {
  if (y.size() != vec_min.size()) throw DataError("normalization: wrong vector length");
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double range = vec_max[i] - vec_min[i];
    x[i] = range > 0.0 ? vec_min[i] + y[i] * range : vec_min[i];
  }
  return x;
}

std::array<double, 3> NormalizationStats::apply_kpi(const std::array<double, 3>& k) const {
  std::array<double, 3> y{};
  for (int i = 0; i < 3; ++i) {
    const double range = kpi_max[i] - kpi_min[i];
    y[i] = range > 0.0 ? (k[i] - kpi_min[i]) / range : 0.0;
  }
  return y;
}

std::array<double, 3> NormalizationStats::invert_kpi(const std::array<double, 3>& k) const {
  std::array<double, 3> y{};
  for (int i = 0; i < 3; ++i) {
    const double range = kpi_max[i] - kpi_min[i];
    y[i] = range > 0.0 ? kpi_min[i] + k[i] * range : kpi_min[i];
  }
  return y;
}

Eigen::MatrixXd NormalizationStats::apply_vec(const Eigen::MatrixXd& cols) const {
  if (cols.rows() != static_cast<Eigen::Index>(vec_min.size()))
    throw DataError("normalization: wrong matrix row count");
  Eigen::MatrixXd y(cols.rows(), cols.cols());
  for (Eigen::Index i = 0; i < cols.rows(); ++i) {
    const double range = vec_max[i] - vec_min[i];
    if (range > 0.0)
      y.row(i) = (cols.row(i).array() - vec_min[i]) / range;
    else
      y.row(i).setZero();
  }
  return y;
}

Eigen::MatrixXd NormalizationStats::invert_vec(const Eigen::MatrixXd& cols) const {
  if (cols.rows() != static_cast<Eigen::Index>(vec_min.size()))
    throw DataError("normalization: wrong matrix row count");
  Eigen::MatrixXd x(cols.rows(), cols.cols());
  for (Eigen::Index i = 0; i < cols.rows(); ++i) {
    const double range = vec_max[i] - vec_min[i];
    if (range > 0.0)
      x.row(i) = cols.row(i).array() * range + vec_min[i];
    else
      x.row(i).setConstant(vec_min[i]);
  }
  return x;
}

Eigen::MatrixXd NormalizationStats::apply_kpi(const Eigen::MatrixXd& cols) const {
  if (cols.rows() != 3) throw DataError("normalization: KPI matrix must have 3 rows");
  Eigen::MatrixXd y(3, cols.cols());
  for (int i = 0; i < 3; ++i) {
    const double range = kpi_max[i] - kpi_min[i];
    if (range > 0.0)
      y.row(i) = (cols.row(i).array() - kpi_min[i]) / range;
    else
      y.row(i).setZero();
  }
  return y;
}

Eigen::MatrixXd NormalizationStats::invert_kpi(const Eigen::MatrixXd& cols) const {
  if (cols.rows() != 3) throw DataError("normalization: KPI matrix must have 3 rows");
  Eigen::MatrixXd x(3, cols.cols());
  for (int i = 0; i < 3; ++i) {
    const double range = kpi_max[i] - kpi_min[i];
    if (range > 0.0)
      x.row(i) = cols.row(i).array() * range + kpi_min[i];
    else
      x.row(i).setConstant(kpi_min[i]);
  }
  return x;
}

Eigen::MatrixXd combined_matrix(const Dataset& ds, const SchemaPair& schemas) {
  Eigen::MatrixXd m(schemas.combined_dim(), static_cast<Eigen::Index>(ds.records.size()));
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto v = encode_combined(ds.records[i].design, schemas);
    m.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return m;
}

Eigen::MatrixXd kpi_matrix(const Dataset& ds) {
  Eigen::MatrixXd m(3, static_cast<Eigen::Index>(ds.records.size()));
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto k = ds.records[i].kpis.as_array();
    m(0, static_cast<Eigen::Index>(i)) = k[0];
    m(1, static_cast<Eigen::Index>(i)) = k[1];
    m(2, static_cast<Eigen::Index>(i)) = k[2];
  }
  return m;
}

NormalizationStats fit_normalization(const Dataset& train, const SchemaPair& schemas) {
  if (train.records.empty()) throw DataError("fit_normalization: empty dataset");
  const int dim = schemas.combined_dim();
  NormalizationStats st;
  st.vec_min.assign(dim, std::numeric_limits<double>::infinity());
  st.vec_max.assign(dim, -std::numeric_limits<double>::infinity());
  st.kpi_min.fill(std::numeric_limits<double>::infinity());
  st.kpi_max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& r : train.records) {
    const auto v = encode_combined(r.design, schemas);
    for (int i = 0; i < dim; ++i) {
      st.vec_min[i] = std::min(st.vec_min[i], v[i]);
      st.vec_max[i] = std::max(st.vec_max[i], v[i]);
    }
    const auto k = r.kpis.as_array();
    for (int i = 0; i < 3; ++i) {
      st.kpi_min[i] = std::min(st.kpi_min[i], k[i]);
      st.kpi_max[i] = std::max(st.kpi_max[i], k[i]);
    }
  }
  return st;
}

void write_dataset_csv(const Dataset& ds, const SchemaPair& schemas, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << "tech";
  for (const auto& s : {schemas.asm_schema, schemas.pmsm_schema}) {
    for (const auto& p : s.continuous) f << ',' << s.name << '_' << p.name;
    for (const auto& p : s.discrete) f << ',' << s.name << '_' << p.name;
  }
  f << ",k1,k2,k3\n";
  for (const auto& r : ds.records) {
    const auto v = encode_combined(r.design, schemas);
    f << r.design.technology_id;
    for (std::size_t i = 1; i < v.size(); ++i) f << ',' << fmt17(v[i]);
    const auto k = r.kpis.as_array();
    for (double x : k) f << ',' << fmt17(x);
    f << '\n';
  }

  nlohmann::json meta;
  meta["version"] = 1;
  meta["seed"] = ds.meta.seed;
  meta["count_asm"] = ds.meta.count_asm;
  meta["count_pmsm"] = ds.meta.count_pmsm;
  meta["oversample"] = ds.meta.oversample;
  meta["schema_fingerprint_asm"] = ds.meta.fingerprint_asm;
  meta["schema_fingerprint_pmsm"] = ds.meta.fingerprint_pmsm;
  meta["generated_at"] = ds.meta.generated_at;
  std::ofstream mf(path + ".meta.json");
  if (!mf) throw DataError("cannot open " + path + ".meta.json for writing");
  mf << meta.dump(2) << '\n';
}

Dataset read_dataset_csv(const SchemaPair& schemas, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError(path + ": empty file");

  Dataset ds;
  const int dim = schemas.combined_dim();
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    CombinedVector v;
    v.reserve(dim + 3);
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (static_cast<int>(v.size()) != dim + 3)
      throw DataError(path + ": row has " + std::to_string(v.size()) + " columns, expected " +
                      std::to_string(dim + 3));
    CombinedVector body(v.begin(), v.begin() + dim);
    if (!has_single_active_block(body, schemas))
      throw DataError(path + ": row violates the single-active-block layout");
    DatasetRecord r;
    r.design = decode_combined(body, schemas);
    r.kpis = {v[dim], v[dim + 1], v[dim + 2]};
    ds.records.push_back(std::move(r));
  }

  std::ifstream mf(path + ".meta.json");
  if (mf) {
    nlohmann::json meta = nlohmann::json::parse(mf);
    ds.meta.seed = meta.value("seed", 0ull);
    ds.meta.count_asm = meta.value("count_asm", 0);
    ds.meta.count_pmsm = meta.value("count_pmsm", 0);
    ds.meta.oversample = meta.value("oversample", 0.0);
    ds.meta.fingerprint_asm = meta.value("schema_fingerprint_asm", "");
    ds.meta.fingerprint_pmsm = meta.value("schema_fingerprint_pmsm", "");
    ds.meta.generated_at = meta.value("generated_at", "");
    if (!ds.meta.fingerprint_asm.empty() &&
        (ds.meta.fingerprint_asm != schemas.asm_schema.fingerprint() ||
         ds.meta.fingerprint_pmsm != schemas.pmsm_schema.fingerprint()))
      throw DataError(path + ": schema fingerprint mismatch with active schemas");
  } else {
    for (const auto& r : ds.records)
      (r.design.technology_id == kTechAsm ? ds.meta.count_asm : ds.meta.count_pmsm)++;
  }
  return ds;
}

}  // namespace mtoo
