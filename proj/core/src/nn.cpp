#include "mtoo/nn.hpp"

#include <cmath>
#include <string>

#include "mtoo/errors.hpp"

namespace mtoo::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  return "?";
}

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv1d_transpose: return "conv1d_transpose";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  throw DataError("unknown activation '" + s + "'");
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "conv1d") return LayerKind::conv1d;
  if (s == "conv1d_transpose") return LayerKind::conv1d_transpose;
  if (s == "flatten") return LayerKind::flatten;
  throw DataError("unknown layer kind '" + s + "'");
}

LayerSpec LayerSpec::dense(int in, int out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.activation = act;
  s.in_size = in;
  s.out_size = out;
  return s;
}

LayerSpec LayerSpec::conv(int in_ch, int out_ch, int length, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.activation = act;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.length = length;
  return s;
}

LayerSpec LayerSpec::conv_transpose(int in_ch, int out_ch, int length, Activation act) {
  LayerSpec s = conv(in_ch, out_ch, length, act);
  s.kind = LayerKind::conv1d_transpose;
  return s;
}

LayerSpec LayerSpec::flatten(int channels, int length) {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  s.activation = Activation::linear;
  s.in_channels = channels;
  s.length = length;
  s.in_size = channels * length;
  s.out_size = channels * length;
  return s;
}

int LayerSpec::input_dim() const {
  switch (kind) {
    case LayerKind::dense: return in_size;
    case LayerKind::flatten: return in_size;
    default: return in_channels * length;
  }
}

int LayerSpec::output_dim() const {
  switch (kind) {
    case LayerKind::dense: return out_size;
    case LayerKind::flatten: return out_size;
    default: return out_channels * length;
  }
}

bool LayerSpec::same_shape(const LayerSpec& other) const {
  return kind == other.kind && activation == other.activation && in_size == other.in_size &&
         out_size == other.out_size && in_channels == other.in_channels &&
         out_channels == other.out_channels && kernel == other.kernel && length == other.length;
}

namespace {

void apply_activation(Activation act, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::linear:
      out = z;
      break;
    case Activation::tanh:
      out = z.array().tanh().matrix();
      break;
    case Activation::softplus:
      // log(1 + e^z), overflow-stable form max(z,0) + log1p(e^{-|z|})
      out = (z.array().max(0.0) + (-z.array().abs()).exp().log1p()).matrix();
      break;
  }
}

Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& grad_out,
                                const Eigen::MatrixXd& pre, const Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::linear:
      return grad_out;
    case Activation::tanh:
      return (grad_out.array() * (1.0 - out.array().square())).matrix();
    case Activation::softplus:
      return (grad_out.array() / (1.0 + (-pre.array()).exp())).matrix();
  }
  return grad_out;
}

class DenseLayer final : public Layer {
 public:
  explicit DenseLayer(LayerSpec spec) : Layer(std::move(spec)) {
    const int n = spec_.out_size * spec_.in_size + spec_.out_size;
    params_.setZero(n);
    grads_.setZero(n);
  }

  void init_params(Rng& rng) override {
    const double limit = std::sqrt(6.0 / (spec_.in_size + spec_.out_size));
    for (int i = 0; i < spec_.out_size * spec_.in_size; ++i)
      params_[i] = rng.uniform(-limit, limit);
    params_.tail(spec_.out_size).setZero();
  }

 protected:
  void linear_forward(const Eigen::MatrixXd& x, Eigen::MatrixXd& z) override {
    auto w = weight();
    z.noalias() = w * x;
    z.colwise() += params_.tail(spec_.out_size);
  }

  Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& dz) override {
    Eigen::Map<Eigen::MatrixXd> dw(grads_.data(), spec_.out_size, spec_.in_size);
    dw.noalias() += dz * input_.transpose();
    grads_.tail(spec_.out_size) += dz.rowwise().sum();
    return weight().transpose() * dz;
  }

 private:
  Eigen::Map<const Eigen::MatrixXd> weight() const {
    return {params_.data(), spec_.out_size, spec_.in_size};
  }
};

// Shift bookkeeping shared by both conv variants (kernel tap t, shift
// s = t - padding): valid output range and матching input range.
struct TapRange {
  int out_begin, in_begin, count;
};

TapRange tap_range(int t, int padding, int length) {
  const int s = t - padding;
  TapRange r;
  r.out_begin = std::max(0, -s);
  r.in_begin = std::max(0, s);
  r.count = length - std::abs(s);
  return r;
}

class Conv1dLayer final : public Layer {
 public:
  explicit Conv1dLayer(LayerSpec spec) : Layer(std::move(spec)) {
    const int n = spec_.out_channels * spec_.in_channels * spec_.kernel + spec_.out_channels;
    params_.setZero(n);
    grads_.setZero(n);
  }

  void init_params(Rng& rng) override {
    const double limit =
        std::sqrt(6.0 / (spec_.in_channels * spec_.kernel + spec_.out_channels * spec_.kernel));
    const int nw = spec_.out_channels * spec_.in_channels * spec_.kernel;
    for (int i = 0; i < nw; ++i) params_[i] = rng.uniform(-limit, limit);
    params_.tail(spec_.out_channels).setZero();
  }

 protected:
  // weight layout: w[out][in][tap]
  double w(int o, int c, int t) const {
    return params_[(o * spec_.in_channels + c) * spec_.kernel + t];
  }
  double& dw(int o, int c, int t) {
    return grads_[(o * spec_.in_channels + c) * spec_.kernel + t];
  }

  void linear_forward(const Eigen::MatrixXd& x, Eigen::MatrixXd& z) override {
    const int L = spec_.length;
    z.setZero(spec_.out_channels * L, x.cols());
    for (int o = 0; o < spec_.out_channels; ++o) {
      z.middleRows(o * L, L).array() +=
          params_[spec_.out_channels * spec_.in_channels * spec_.kernel + o];
      for (int c = 0; c < spec_.in_channels; ++c)
        for (int t = 0; t < spec_.kernel; ++t) {
          const auto r = tap_range(t, spec_.padding, L);
          if (r.count <= 0) continue;
          z.middleRows(o * L + r.out_begin, r.count).noalias() +=
              w(o, c, t) * x.middleRows(c * L + r.in_begin, r.count);
        }
    }
  }

  Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& dz) override {
    const int L = spec_.length;
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(spec_.in_channels * L, dz.cols());
    const int bias_at = spec_.out_channels * spec_.in_channels * spec_.kernel;
    for (int o = 0; o < spec_.out_channels; ++o) {
      grads_[bias_at + o] += dz.middleRows(o * L, L).sum();
      for (int c = 0; c < spec_.in_channels; ++c)
        for (int t = 0; t < spec_.kernel; ++t) {
          const auto r = tap_range(t, spec_.padding, L);
          if (r.count <= 0) continue;
          dw(o, c, t) += dz.middleRows(o * L + r.out_begin, r.count)
                             .cwiseProduct(input_.middleRows(c * L + r.in_begin, r.count))
                             .sum();
          dx.middleRows(c * L + r.in_begin, r.count).noalias() +=
              w(o, c, t) * dz.middleRows(o * L + r.out_begin, r.count);
        }
    }
    return dx;
  }
};

// Transposed 1-d convolution, the exact adjoint of Conv1dLayer with the same
// kernel tensor: weight layout w[in][out][tap].
class Conv1dTransposeLayer final : public Layer {
 public:
  explicit Conv1dTransposeLayer(LayerSpec spec) : Layer(std::move(spec)) {
    const int n = spec_.in_channels * spec_.out_channels * spec_.kernel + spec_.out_channels;
    params_.setZero(n);
    grads_.setZero(n);
  }

  void init_params(Rng& rng) override {
    const double limit =
        std::sqrt(6.0 / (spec_.in_channels * spec_.kernel + spec_.out_channels * spec_.kernel));
    const int nw = spec_.in_channels * spec_.out_channels * spec_.kernel;
    for (int i = 0; i < nw; ++i) params_[i] = rng.uniform(-limit, limit);
    params_.tail(spec_.out_channels).setZero();
  }

 protected:
  double w(int c, int o, int t) const {
    return params_[(c * spec_.out_channels + o) * spec_.kernel + t];
  }
  double& dw(int c, int o, int t) {
    return grads_[(c * spec_.out_channels + o) * spec_.kernel + t];
  }

  void linear_forward(const Eigen::MatrixXd& x, Eigen::MatrixXd& z) override {
    const int L = spec_.length;
    z.setZero(spec_.out_channels * L, x.cols());
    const int bias_at = spec_.in_channels * spec_.out_channels * spec_.kernel;
    for (int o = 0; o < spec_.out_channels; ++o)
      z.middleRows(o * L, L).array() += params_[bias_at + o];
    for (int c = 0; c < spec_.in_channels; ++c)
      for (int o = 0; o < spec_.out_channels; ++o)
        for (int t = 0; t < spec_.kernel; ++t) {
          const auto r = tap_range(t, spec_.padding, L);
          if (r.count <= 0) continue;
          z.middleRows(o * L + r.in_begin, r.count).noalias() +=
              w(c, o, t) * x.middleRows(c * L + r.out_begin, r.count);
        }
  }

  Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& dz) override {
    const int L = spec_.length;
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(spec_.in_channels * L, dz.cols());
    const int bias_at = spec_.in_channels * spec_.out_channels * spec_.kernel;
    for (int o = 0; o < spec_.out_channels; ++o)
      grads_[bias_at + o] += dz.middleRows(o * L, L).sum();
    for (int c = 0; c < spec_.in_channels; ++c)
      for (int o = 0; o < spec_.out_channels; ++o)
        for (int t = 0; t < spec_.kernel; ++t) {
          const auto r = tap_range(t, spec_.padding, L);
          if (r.count <= 0) continue;
          dw(c, o, t) += dz.middleRows(o * L + r.in_begin, r.count)
                             .cwiseProduct(input_.middleRows(c * L + r.out_begin, r.count))
                             .sum();
          dx.middleRows(c * L + r.out_begin, r.count).noalias() +=
              w(c, o, t) * dz.middleRows(o * L + r.in_begin, r.count);
        }
    return dx;
  }
};

class FlattenLayer final : public Layer {
 public:
  explicit FlattenLayer(LayerSpec spec) : Layer(std::move(spec)) {}

 protected:
  void linear_forward(const Eigen::MatrixXd& x, Eigen::MatrixXd& z) override { z = x; }
  Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& dz) override { return dz; }
};

}  // namespace

void Layer::init_params(Rng&) {}

const Eigen::MatrixXd& Layer::forward(const Eigen::MatrixXd& x) {
  if (x.rows() != spec_.input_dim())
    throw DataError(std::string("layer ") + to_string(spec_.kind) + ": input has " +
                    std::to_string(x.rows()) + " rows, expected " +
                    std::to_string(spec_.input_dim()));
  input_ = x;
  linear_forward(x, pre_);
  apply_activation(spec_.activation, pre_, out_);
  has_cache_ = true;
  return out_;
}

Eigen::MatrixXd Layer::backward(const Eigen::MatrixXd& grad_out) {
  if (!has_cache_) throw DataError("layer backward called without a forward cache");
  if (grad_out.rows() != spec_.output_dim() || grad_out.cols() != input_.cols())
    throw DataError("layer backward: gradient shape mismatch");
  const Eigen::MatrixXd dz = activation_grad(spec_.activation, grad_out, pre_, out_);
  return linear_backward(dz);
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::dense: return std::make_unique<DenseLayer>(spec);
    case LayerKind::conv1d: return std::make_unique<Conv1dLayer>(spec);
    case LayerKind::conv1d_transpose: return std::make_unique<Conv1dTransposeLayer>(spec);
    case LayerKind::flatten: return std::make_unique<FlattenLayer>(spec);
  }
  throw DataError("unknown layer kind");
}

namespace {
void check_chain(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t i = 1; i < specs.size(); ++i)
    if (specs[i].input_dim() != specs[i - 1].output_dim())
      throw ConfigError("network layer " + std::to_string(i) + " input dim " +
                        std::to_string(specs[i].input_dim()) + " != previous output dim " +
                        std::to_string(specs[i - 1].output_dim()));
}
}  // namespace

Network::Network(std::vector<LayerSpec> specs, Rng& rng) {
  check_chain(specs);
  for (const auto& s : specs) {
    layers_.push_back(make_layer(s));
    layers_.back()->init_params(rng);
  }
}

Network::Network(std::vector<LayerSpec> specs) {
  check_chain(specs);
  for (const auto& s : specs) layers_.push_back(make_layer(s));
}

const Eigen::MatrixXd& Network::forward(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd* cur = &x;
  for (auto& layer : layers_) cur = &layer->forward(*cur);
  return *cur;
}

Eigen::MatrixXd Network::backward(const Eigen::MatrixXd& grad_out) {
  Eigen::MatrixXd g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Network::zero_grads() {
  for (auto& layer : layers_) layer->grads().setZero();
}

int Network::input_dim() const { return layers_.front()->spec().input_dim(); }
int Network::output_dim() const { return layers_.back()->spec().output_dim(); }

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer->params().size());
  return n;
}

std::vector<Layer*> Network::layer_ptrs() {
  std::vector<Layer*> out;
  for (auto& layer : layers_) out.push_back(layer.get());
  return out;
}

std::vector<Eigen::VectorXd> Network::snapshot_params() const {
  std::vector<Eigen::VectorXd> snap;
  for (const auto& layer : layers_) snap.push_back(layer->params());
  return snap;
}

void Network::restore_params(const std::vector<Eigen::VectorXd>& snap) {
  if (snap.size() != layers_.size()) throw DataError("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < snap.size(); ++i) {
    if (snap[i].size() != layers_[i]->params().size())
      throw DataError("parameter snapshot layer size mismatch");
    layers_[i]->params() = snap[i];
  }
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size()) throw DataError("mse: length mismatch");
  if (pred.size() == 0) throw DataError("mse: empty vectors");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double kl_standard_normal(const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma) {
  if (mean.size() != sigma.size()) throw DataError("kl: length mismatch");
  if ((sigma.array() <= 0.0).any()) throw DataError("kl: sigma must be positive");
  const auto s2 = sigma.array().square();
  return 0.5 * (s2 + mean.array().square() - 1.0 - s2.log()).sum();
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma,
                               const Eigen::VectorXd& eps) {
  if (mean.size() != sigma.size() || mean.size() != eps.size())
    throw DataError("reparameterize: length mismatch");
  return mean.array() + sigma.array() * eps.array();
}

Adam::Adam(std::vector<Layer*> layers, AdamConfig cfg) : layers_(std::move(layers)), cfg_(cfg) {
  for (Layer* l : layers_) {
    m_.push_back(Eigen::VectorXd::Zero(l->params().size()));
    v_.push_back(Eigen::VectorXd::Zero(l->params().size()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Eigen::VectorXd& g = layers_[i]->grads();
    if (g.size() != m_[i].size()) throw DataError("adam: gradient shape mismatch");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i].array().matrix() + (1.0 - cfg_.beta2) * g.array().square().matrix();
    layers_[i]->params().array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.epsilon);
  }
}

}  // namespace mtoo::nn
