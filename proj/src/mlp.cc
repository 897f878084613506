#include "akhcfs/mlp.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace akhcfs {

namespace {

void activate(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::tanh) z = z.array().tanh().matrix();
}

// d(act)/dz expressed through the activation output y.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& y, Activation act) {
  if (act == Activation::tanh) return (1.0 - y.array().square()).matrix();
  return Eigen::MatrixXd::Ones(y.rows(), y.cols());
}

const char* activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Activation output, double output_scale)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output), output_scale_(output_scale) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw std::invalid_argument("layer size must be > 0");
    layers_.push_back(DenseLayer{RowMatrix::Zero(sizes_[l + 1], sizes_[l]),
                                 Eigen::VectorXd::Zero(sizes_[l + 1])});
  }
}

void Mlp::init_uniform(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    }
    for (Eigen::Index r = 0; r < layer.biases.size(); ++r) layer.biases(r) = dist(rng);
  }
}

void Mlp::set_zero() {
  for (auto& layer : layers_) {
    layer.weights.setZero();
    layer.biases.setZero();
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
  Cache cache;
  return forward(input, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache& cache) const {
  if (input.rows() != sizes_.front()) throw std::invalid_argument("mlp input size mismatch");
  cache.inputs.clear();
  cache.outputs.clear();
  Eigen::MatrixXd x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs.push_back(x);
    Eigen::MatrixXd z = layers_[l].weights * x;
    z.colwise() += layers_[l].biases;
    activate(z, activation_of(l));
    cache.outputs.push_back(z);
    x = std::move(z);
  }
  return x * output_scale_;
}

double Mlp::forward_scalar(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != sizes_.front() || sizes_.back() != 1) {
    throw std::invalid_argument("forward_scalar needs matching input and a single output");
  }
  constexpr int kStack = 128;
  const int widest = *std::max_element(sizes_.begin(), sizes_.end());
  if (widest > kStack) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
    for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = input[i];
    return forward(x)(0, 0);
  }
  double buf_a[kStack];
  double buf_b[kStack];
  double* a = buf_a;
  double* b = buf_b;
  std::copy(input.begin(), input.end(), a);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& W = layers_[l].weights;
    const auto rows = W.rows();
    const auto cols = W.cols();
    const double* bias = layers_[l].biases.data();
    const bool squash = activation_of(l) == Activation::tanh;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double* w = W.data() + r * cols;
      double sum = bias[r];
      for (Eigen::Index c = 0; c < cols; ++c) sum += w[c] * a[c];
      b[r] = squash ? std::tanh(sum) : sum;
    }
    std::swap(a, b);
  }
  return a[0] * output_scale_;
}

MlpGradients Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                           Eigen::MatrixXd* grad_input) const {
  if (cache.outputs.size() != layers_.size()) throw std::logic_error("mlp cache is empty");
  MlpGradients grads;
  grads.layers.resize(layers_.size());
  // Gradient w.r.t. the current layer's activation output.
  Eigen::MatrixXd upstream = grad_output * output_scale_;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd delta =
        upstream.cwiseProduct(activation_slope(cache.outputs[l], activation_of(l)));
    grads.layers[l].weights = delta * cache.inputs[l].transpose();
    grads.layers[l].biases = delta.rowwise().sum();
    if (l > 0 || grad_input != nullptr) upstream = layers_[l].weights.transpose() * delta;
  }
  if (grad_input != nullptr) *grad_input = upstream;
  return grads;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& layer : layers_) {
    g.layers.push_back(DenseLayer{RowMatrix::Zero(layer.weights.rows(), layer.weights.cols()),
                                  Eigen::VectorXd::Zero(layer.biases.size())});
  }
  return g;
}

void Mlp::apply_sgd(const MlpGradients& grads, double learning_rate) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weights -= learning_rate * grads.layers[l].weights;
    layers_[l].biases -= learning_rate * grads.layers[l].biases;
  }
}

void Mlp::soft_update_from(const Mlp& online, double rate) {
  if (!same_shape(online)) throw std::invalid_argument("soft update shape mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weights = rate * online.layers_[l].weights + (1.0 - rate) * layers_[l].weights;
    layers_[l].biases = rate * online.layers_[l].biases + (1.0 - rate) * layers_[l].biases;
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
  }
  return n;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) {
    out.insert(out.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    out.insert(out.end(), layer.biases.data(), layer.biases.data() + layer.biases.size());
  }
  return out;
}

void Mlp::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) throw std::invalid_argument("parameter count mismatch");
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = values[k++];
    for (Eigen::Index i = 0; i < layer.biases.size(); ++i) layer.biases.data()[i] = values[k++];
  }
}

std::vector<double> Mlp::flatten(const MlpGradients& grads) {
  std::vector<double> out;
  for (const auto& layer : grads.layers) {
    out.insert(out.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    out.insert(out.end(), layer.biases.data(), layer.biases.data() + layer.biases.size());
  }
  return out;
}

nlohmann::json mlp_to_json(const Mlp& net) {
  return nlohmann::json{{"sizes", net.sizes()},
                        {"hidden_activation", activation_name(net.hidden_activation())},
                        {"output_activation", activation_name(net.output_activation())},
                        {"output_scale", net.output_scale()},
                        {"parameters", net.flat_parameters()}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net(j.at("sizes").get<std::vector<int>>(),
          activation_from(j.at("hidden_activation").get<std::string>()),
          activation_from(j.at("output_activation").get<std::string>()),
          j.at("output_scale").get<double>());
  net.set_flat_parameters(j.at("parameters").get<std::vector<double>>());
  return net;
}

}  // namespace akhcfs
