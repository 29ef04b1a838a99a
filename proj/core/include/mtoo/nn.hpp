#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "mtoo/rng.hpp"

namespace mtoo::nn {

// Batch convention throughout: Eigen::MatrixXd with rows = features and
// cols = samples. Conv layers interpret the feature axis channel-major,
// i.e. row c*length + i is position i of channel c.

enum class Activation { linear, tanh, softplus };
enum class LayerKind { dense, conv1d, conv1d_transpose, flatten };

const char* to_string(Activation a);
const char* to_string(LayerKind k);
Activation activation_from_string(const std::string& s);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Activation activation = Activation::linear;
  int in_size = 0, out_size = 0;                     // dense / flatten
  int in_channels = 0, out_channels = 0;             // conv variants
  int kernel = 3, stride = 1, padding = 1;           // stride 1, length-preserving
  int length = 0;

  static LayerSpec dense(int in, int out, Activation act);
  static LayerSpec conv(int in_ch, int out_ch, int length, Activation act);
  static LayerSpec conv_transpose(int in_ch, int out_ch, int length, Activation act);
  static LayerSpec flatten(int channels, int length);

  int input_dim() const;
  int output_dim() const;
  bool same_shape(const LayerSpec& other) const;
};

class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& grads() { return grads_; }

  virtual void init_params(Rng& rng);

  /// Linear op + activation; caches what backward needs.
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  /// Gradient w.r.t. the input; accumulates parameter gradients.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out);

 protected:
  virtual void linear_forward(const Eigen::MatrixXd& x, Eigen::MatrixXd& z) = 0;
  virtual Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& dz) = 0;

  LayerSpec spec_;
  Eigen::VectorXd params_, grads_;
  Eigen::MatrixXd input_, pre_, out_;
  bool has_cache_ = false;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

/// Plain sequential network. Single writer during training; a frozen copy of
/// the parameters is safe to evaluate from many threads.
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> specs, Rng& rng);
  /// Zero-initialized variant for deserialization.
  explicit Network(std::vector<LayerSpec> specs);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out);
  void zero_grads();

  int input_dim() const;
  int output_dim() const;
  std::size_t param_count() const;
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  std::vector<Layer*> layer_ptrs();

  std::vector<Eigen::VectorXd> snapshot_params() const;
  void restore_params(const std::vector<Eigen::VectorXd>& snap);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Mean squared error: sum of squared differences divided by length.
double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

/// KL divergence of N(mean, diag(sigma^2)) from N(0, I):
/// 0.5 * sum(sigma^2 + mean^2 - 1 - log sigma^2). Requires sigma > 0.
double kl_standard_normal(const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma);

/// z = mean + sigma (.) eps
Eigen::VectorXd reparameterize(const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma,
                               const Eigen::VectorXd& eps);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over the parameters of one or more networks.
class Adam {
 public:
  explicit Adam(std::vector<Layer*> layers, AdamConfig cfg = {});
  void step(double lr);
  long step_count() const { return t_; }

 private:
  std::vector<Layer*> layers_;
  std::vector<Eigen::VectorXd> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace mtoo::nn
