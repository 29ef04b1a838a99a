#include "mtoo/vae.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mtoo/errors.hpp"
#include "serialize.hpp"

namespace mtoo {

using nn::Activation;
using nn::LayerSpec;

namespace {

std::vector<LayerSpec> encoder_trunk_specs(int d) {
  return {
      LayerSpec::conv(1, 5, d, Activation::tanh),
      LayerSpec::conv(5, 10, d, Activation::tanh),
      LayerSpec::conv(10, 10, d, Activation::tanh),
      LayerSpec::conv(10, 20, d, Activation::tanh),
      LayerSpec::flatten(20, d),
      LayerSpec::dense(20 * d, 800, Activation::tanh),
  };
}

std::vector<LayerSpec> decoder_specs(int d, int l) {
  return {
      LayerSpec::dense(l, 800, Activation::tanh),
      LayerSpec::dense(800, 20 * d, Activation::tanh),
      LayerSpec::conv_transpose(20, 20, d, Activation::tanh),
      LayerSpec::conv_transpose(20, 10, d, Activation::tanh),
      LayerSpec::conv_transpose(10, 10, d, Activation::tanh),
      LayerSpec::conv_transpose(10, 5, d, Activation::tanh),
      LayerSpec::conv_transpose(5, 1, d, Activation::linear),
  };
}

}  // namespace

VaeConfig VaeConfig::for_profile(SchemaProfile profile, const SchemaPair& schemas) {
  VaeConfig c;
  c.input_dim = schemas.combined_dim();
  if (profile == SchemaProfile::desk) {
    c.latent_dim = 10;
    c.epochs = 100;
  } else {
    c.latent_dim = 34;
    c.epochs = 300;
  }
  return c;
}

void VaeConfig::validate(const SchemaPair& schemas) const {
  if (input_dim != schemas.combined_dim())
    throw ConfigError("vae config: input_dim " + std::to_string(input_dim) +
                      " does not match the schemas (" + std::to_string(schemas.combined_dim()) + ")");
  const int max_native = std::max(schemas.asm_dim(), schemas.pmsm_dim());
  if (latent_dim < max_native || latent_dim > input_dim)
    throw ConfigError("vae config: latent_dim must lie in [" + std::to_string(max_native) + ", " +
                      std::to_string(input_dim) + "], got " + std::to_string(latent_dim));
  if (batch_size < 1) throw ConfigError("vae config: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("vae config: epochs must be >= 1");
  if (patience < 1) throw ConfigError("vae config: patience must be >= 1");
  if (lr_start <= 0.0 || lr_end <= 0.0) throw ConfigError("vae config: learning rates must be positive");
  if (kl_weight < 0.0) throw ConfigError("vae config: kl_weight must be >= 0");
}

std::vector<LayerSpec> predictor_specs(int input_dim) {
  return {
      LayerSpec::dense(input_dim, 448, Activation::softplus),
      LayerSpec::dense(448, 250, Activation::softplus),
      LayerSpec::dense(250, 224, Activation::softplus),
      LayerSpec::dense(224, 224, Activation::softplus),
      LayerSpec::dense(224, 198, Activation::softplus),
      LayerSpec::dense(198, 50, Activation::softplus),
      LayerSpec::dense(50, 3, Activation::linear),
  };
}

ModelBundle build_vae(const VaeConfig& config, const SchemaPair& schemas) {
  config.validate(schemas);
  const int d = config.input_dim;
  const int l = config.latent_dim;
  Rng rng(config.seed);

  ModelBundle b;
  b.config = config;
  b.encoder_trunk = nn::Network(encoder_trunk_specs(d), rng);
  b.mean_head = nn::Network({LayerSpec::dense(800, l, Activation::linear)}, rng);
  b.logvar_head = nn::Network({LayerSpec::dense(800, l, Activation::linear)}, rng);
  b.decoder = nn::Network(decoder_specs(d, l), rng);
  b.predictor = nn::Network(predictor_specs(l), rng);
  b.fingerprint_asm = schemas.asm_schema.fingerprint();
  b.fingerprint_pmsm = schemas.pmsm_schema.fingerprint();
  return b;
}

namespace {

struct EpochEval {
  double recon = 0.0, kpi = 0.0, kl = 0.0, total = 0.0;
};

// Mean-path (eps = 0) three-term loss over a whole split, batched.
EpochEval evaluate_split(ModelBundle& b, const Eigen::MatrixXd& P, const Eigen::MatrixXd& K,
                         int batch_size) {
  EpochEval ev;
  const Eigen::Index n = P.cols();
  const double d = static_cast<double>(P.rows());
  for (Eigen::Index at = 0; at < n; at += batch_size) {
    const Eigen::Index bs = std::min<Eigen::Index>(batch_size, n - at);
    const Eigen::MatrixXd x = P.middleCols(at, bs);
    const Eigen::MatrixXd& h = b.encoder_trunk.forward(x);
    const Eigen::MatrixXd mu = b.mean_head.forward(h);
    const Eigen::MatrixXd lv = b.logvar_head.forward(h);
    const Eigen::MatrixXd sig = (0.5 * lv.array()).exp().matrix();
    const Eigen::MatrixXd& ph = b.decoder.forward(mu);
    const Eigen::MatrixXd& kh = b.predictor.forward(mu);
    ev.recon += (ph - x).squaredNorm() / d;
    ev.kpi += (kh - K.middleCols(at, bs)).squaredNorm() / 3.0;
    ev.kl += 0.5 * (sig.array().square() + mu.array().square() - 1.0 - lv.array()).sum();
  }
  ev.recon /= static_cast<double>(n);
  ev.kpi /= static_cast<double>(n);
  ev.kl /= static_cast<double>(n);
  return ev;
}

}  // namespace

void train_vae(ModelBundle& bundle, const Dataset& train, const Dataset& val,
               const SchemaPair& schemas) {
  if (train.records.empty() || val.records.empty())
    throw DataError("train_vae: empty training or validation set");
  const VaeConfig& cfg = bundle.config;
  cfg.validate(schemas);

  bundle.stats = fit_normalization(train, schemas);
  const Eigen::MatrixXd P = bundle.stats.apply_vec(combined_matrix(train, schemas));
  const Eigen::MatrixXd K = bundle.stats.apply_kpi(kpi_matrix(train));
  const Eigen::MatrixXd PV = bundle.stats.apply_vec(combined_matrix(val, schemas));
  const Eigen::MatrixXd KV = bundle.stats.apply_kpi(kpi_matrix(val));

  const Eigen::Index n = P.cols();
  const int l = cfg.latent_dim;
  const double d = static_cast<double>(P.rows());

  std::vector<nn::Layer*> all_layers;
  for (nn::Network* net :
       {&bundle.encoder_trunk, &bundle.mean_head, &bundle.logvar_head, &bundle.decoder,
        &bundle.predictor})
    for (nn::Layer* layer : net->layer_ptrs()) all_layers.push_back(layer);
  nn::Adam adam(all_layers);

  Rng rng(cfg.seed + 1);
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int bad_epochs = 0;
  std::vector<std::vector<Eigen::VectorXd>> best_snap;

  bundle.curves.clear();
  Eigen::MatrixXd x(P.rows(), cfg.batch_size), k(3, cfg.batch_size), eps(l, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double frac = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
    rng.shuffle(order);

    double ep_recon = 0.0, ep_kpi = 0.0, ep_kl = 0.0;
    for (Eigen::Index at = 0; at < n; at += cfg.batch_size) {
      const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - at);
      x.resize(P.rows(), bs);
      k.resize(3, bs);
      eps.resize(l, bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        x.col(i) = P.col(order[at + i]);
        k.col(i) = K.col(order[at + i]);
      }
      // one fresh noise draw per sample per epoch (column-major fill = per sample)
      for (Eigen::Index c = 0; c < bs; ++c)
        for (int r = 0; r < l; ++r) eps(r, c) = rng.normal();

      const Eigen::MatrixXd& h = bundle.encoder_trunk.forward(x);
      const Eigen::MatrixXd mu = bundle.mean_head.forward(h);
      const Eigen::MatrixXd lv = bundle.logvar_head.forward(h);
      const Eigen::MatrixXd sig = (0.5 * lv.array()).exp().matrix();
      const Eigen::MatrixXd z = mu + sig.cwiseProduct(eps);
      const Eigen::MatrixXd& ph = bundle.decoder.forward(z);
      const Eigen::MatrixXd& kh = bundle.predictor.forward(z);

      const double bsd = static_cast<double>(bs);
      const double recon = (ph - x).squaredNorm() / d / bsd;
      const double kpi = (kh - k).squaredNorm() / 3.0 / bsd;
      const double kl =
          0.5 * (sig.array().square() + mu.array().square() - 1.0 - lv.array()).sum() / bsd;
      if (!std::isfinite(recon)) throw NumericError("vae training: reconstruction loss is not finite");
      if (!std::isfinite(kpi)) throw NumericError("vae training: KPI loss is not finite");
      if (!std::isfinite(kl)) throw NumericError("vae training: KL loss is not finite");
      ep_recon += recon * bsd;
      ep_kpi += kpi * bsd;
      ep_kl += kl * bsd;

      for (nn::Layer* layer : all_layers) layer->grads().setZero();
      const Eigen::MatrixXd dph = 2.0 / d / bsd * (ph - x);
      const Eigen::MatrixXd dkh = 2.0 / 3.0 / bsd * (kh - k);
      Eigen::MatrixXd dz = bundle.decoder.backward(dph);
      dz += bundle.predictor.backward(dkh);
      const Eigen::MatrixXd dmu = dz + (cfg.kl_weight / bsd) * mu;
      const Eigen::MatrixXd dlv =
          (0.5 * dz.array() * eps.array() * sig.array() +
           (cfg.kl_weight / bsd) * 0.5 * (sig.array().square() - 1.0))
              .matrix();
      Eigen::MatrixXd dh = bundle.mean_head.backward(dmu);
      dh += bundle.logvar_head.backward(dlv);
      bundle.encoder_trunk.backward(dh);
      adam.step(lr);
    }

    TrainingCurvePoint pt;
    pt.epoch = epoch;
    pt.lr = lr;
    pt.train_recon = ep_recon / static_cast<double>(n);
    pt.train_kpi = ep_kpi / static_cast<double>(n);
    pt.train_kl = cfg.kl_weight * ep_kl / static_cast<double>(n);
    pt.train_total = pt.train_recon + pt.train_kpi + pt.train_kl;

    const EpochEval ev = evaluate_split(bundle, PV, KV, cfg.batch_size);
    pt.val_recon = ev.recon;
    pt.val_kpi = ev.kpi;
    pt.val_kl = cfg.kl_weight * ev.kl;
    pt.val_total = pt.val_recon + pt.val_kpi + pt.val_kl;
    if (!std::isfinite(pt.val_total)) throw NumericError("vae training: validation loss is not finite");
    bundle.curves.push_back(pt);

    if (pt.val_total < best_val) {
      best_val = pt.val_total;
      best_epoch = epoch;
      bad_epochs = 0;
      best_snap.clear();
      for (nn::Network* net :
           {&bundle.encoder_trunk, &bundle.mean_head, &bundle.logvar_head, &bundle.decoder,
            &bundle.predictor})
        best_snap.push_back(net->snapshot_params());
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }

  if (best_epoch >= 0) {
    std::size_t i = 0;
    for (nn::Network* net :
         {&bundle.encoder_trunk, &bundle.mean_head, &bundle.logvar_head, &bundle.decoder,
          &bundle.predictor})
      net->restore_params(best_snap[i++]);
  }
  bundle.trained = true;
}

LatentDistribution encode(ModelBundle& bundle, const CombinedVector& p_normalized) {
  if (static_cast<int>(p_normalized.size()) != bundle.config.input_dim)
    throw DataError("encode: wrong input dimension");
  const Eigen::Map<const Eigen::VectorXd> x(p_normalized.data(),
                                            static_cast<Eigen::Index>(p_normalized.size()));
  const Eigen::MatrixXd& h = bundle.encoder_trunk.forward(x);
  LatentDistribution out;
  out.mean = bundle.mean_head.forward(h).col(0);
  out.sigma = (0.5 * bundle.logvar_head.forward(h).array()).exp().matrix().col(0);
  return out;
}

CombinedVector decode(ModelBundle& bundle, const Eigen::VectorXd& z) {
  if (z.size() != bundle.config.latent_dim) throw DataError("decode: wrong latent dimension");
  const Eigen::MatrixXd raw = decode_batch(bundle, z);
  return CombinedVector(raw.data(), raw.data() + raw.rows());
}

KpiVector predict_kpis(ModelBundle& bundle, const Eigen::VectorXd& z) {
  if (z.size() != bundle.config.latent_dim) throw DataError("predict_kpis: wrong latent dimension");
  const Eigen::MatrixXd k = predict_kpis_batch(bundle, z);
  return {k(0, 0), k(1, 0), k(2, 0)};
}

Eigen::MatrixXd encode_mean_batch(ModelBundle& bundle, const Eigen::MatrixXd& raw_cols) {
  const Eigen::MatrixXd x = bundle.stats.apply_vec(raw_cols);
  const Eigen::MatrixXd& h = bundle.encoder_trunk.forward(x);
  return bundle.mean_head.forward(h);
}

Eigen::MatrixXd decode_batch(ModelBundle& bundle, const Eigen::MatrixXd& z_cols) {
  if (z_cols.rows() != bundle.config.latent_dim) throw DataError("decode: wrong latent dimension");
  return bundle.stats.invert_vec(bundle.decoder.forward(z_cols));
}

Eigen::MatrixXd predict_kpis_batch(ModelBundle& bundle, const Eigen::MatrixXd& z_cols) {
  if (z_cols.rows() != bundle.config.latent_dim)
    throw DataError("predict_kpis: wrong latent dimension");
  return bundle.stats.invert_kpi(bundle.predictor.forward(z_cols));
}

namespace {

nlohmann::json config_to_json(const VaeConfig& c) {
  return {{"input_dim", c.input_dim}, {"latent_dim", c.latent_dim}, {"epochs", c.epochs},
          {"patience", c.patience},   {"batch_size", c.batch_size}, {"lr_start", c.lr_start},
          {"lr_end", c.lr_end},       {"kl_weight", c.kl_weight},   {"seed", c.seed}};
}

VaeConfig config_from_json(const nlohmann::json& j) {
  VaeConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr_start = j.at("lr_start").get<double>();
  c.lr_end = j.at("lr_end").get<double>();
  c.kl_weight = j.at("kl_weight").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  nlohmann::json j;
  j["format"] = "mtoo-bundle";
  j["version"] = 1;
  j["type"] = "vae";
  j["trained"] = bundle.trained;
  j["config"] = config_to_json(bundle.config);
  j["stats"] = detail::stats_to_json(bundle.stats);
  j["fingerprint_asm"] = bundle.fingerprint_asm;
  j["fingerprint_pmsm"] = bundle.fingerprint_pmsm;
  j["networks"]["encoder_trunk"] = detail::network_to_json(bundle.encoder_trunk);
  j["networks"]["mean_head"] = detail::network_to_json(bundle.mean_head);
  j["networks"]["logvar_head"] = detail::network_to_json(bundle.logvar_head);
  j["networks"]["decoder"] = detail::network_to_json(bundle.decoder);
  j["networks"]["predictor"] = detail::network_to_json(bundle.predictor);
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& p : bundle.curves)
    curves.push_back({p.epoch, p.lr, p.train_total, p.train_recon, p.train_kpi, p.train_kl,
                      p.val_total, p.val_recon, p.val_kpi, p.val_kl});
  j["curves"] = std::move(curves);

  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << j.dump() << '\n';
}

ModelBundle load_bundle(const std::string& path, const SchemaPair& schemas) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  if (j.value("format", "") != "mtoo-bundle" || j.value("type", "") != "vae")
    throw DataError(path + ": not a vae model bundle");

  ModelBundle b;
  b.config = config_from_json(j.at("config"));
  b.stats = detail::stats_from_json(j.at("stats"));
  b.fingerprint_asm = j.at("fingerprint_asm").get<std::string>();
  b.fingerprint_pmsm = j.at("fingerprint_pmsm").get<std::string>();
  if (b.fingerprint_asm != schemas.asm_schema.fingerprint() ||
      b.fingerprint_pmsm != schemas.pmsm_schema.fingerprint())
    throw DataError(path + ": schema fingerprint mismatch with active schemas");
  b.trained = j.value("trained", false);
  b.encoder_trunk = detail::network_from_json(j.at("networks").at("encoder_trunk"));
  b.mean_head = detail::network_from_json(j.at("networks").at("mean_head"));
  b.logvar_head = detail::network_from_json(j.at("networks").at("logvar_head"));
  b.decoder = detail::network_from_json(j.at("networks").at("decoder"));
  b.predictor = detail::network_from_json(j.at("networks").at("predictor"));
  for (const auto& c : j.at("curves")) {
    TrainingCurvePoint p;
    p.epoch = c.at(0).get<int>();
    p.lr = c.at(1).get<double>();
    p.train_total = c.at(2).get<double>();
    p.train_recon = c.at(3).get<double>();
    p.train_kpi = c.at(4).get<double>();
    p.train_kl = c.at(5).get<double>();
    p.val_total = c.at(6).get<double>();
    p.val_recon = c.at(7).get<double>();
    p.val_kpi = c.at(8).get<double>();
    p.val_kl = c.at(9).get<double>();
    b.curves.push_back(p);
  }
  b.config.validate(schemas);
  return b;
}

void write_curves_csv(const std::vector<TrainingCurvePoint>& curves, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << "epoch,lr,train_total,train_recon,train_kpi,train_kl,val_total,val_recon,val_kpi,val_kl\n";
  char buf[256];
  for (const auto& p : curves) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.epoch, p.lr,
                  p.train_total, p.train_recon, p.train_kpi, p.train_kl, p.val_total, p.val_recon,
                  p.val_kpi, p.val_kl);
    f << buf;
  }
}

}  // namespace mtoo
