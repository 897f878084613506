#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace akhcfs {

enum class Activation { identity, tanh };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
  RowMatrix weights;       // out x in
  Eigen::VectorXd biases;  // out
};

// Same shapes as the network's layers.
struct MlpGradients {
  std::vector<DenseLayer> layers;
};

// Fully connected network. Hidden layers share one activation; the output
// layer has its own activation followed by a constant scale, so an actor is
// `a_bound * tanh(.)` and a critic is plain identity.
class Mlp {
 public:
  // Activations of every layer for one batch (columns are samples).
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> outputs; // post-activation output of each layer (before scale)
  };

  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation hidden, Activation output, double output_scale = 1.0);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(std::mt19937_64& rng);
  void set_zero();

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;
  // Allocation-light single-sample path.
  double forward_scalar(std::span<const double> input) const;

  // Reverse-mode pass for d(loss)/d(output) given per sample (rows = outputs).
  // Optionally returns d(loss)/d(input).
  MlpGradients backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                        Eigen::MatrixXd* grad_input = nullptr) const;

  MlpGradients zero_gradients() const;

  void apply_sgd(const MlpGradients& grads, double learning_rate);
  // target <- rate * online + (1 - rate) * target
  void soft_update_from(const Mlp& online, double rate);

  std::size_t parameter_count() const;
  // Row-major weights then biases, layer by layer.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  static std::vector<double> flatten(const MlpGradients& grads);

  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  double output_scale() const { return output_scale_; }

  bool same_shape(const Mlp& other) const { return sizes_ == other.sizes_; }

 private:
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == layers_.size() ? output_ : hidden_;
  }

  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
  Activation hidden_ = Activation::tanh;
  Activation output_ = Activation::identity;
  double output_scale_ = 1.0;
};

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace akhcfs
