#pragma once
// mlp.hpp - small dense regression network: ReLU hidden layers, linear
// output, mean-squared-error loss, full-batch Adadelta updates.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace propdiag {

struct MlpTrainConfig {
  int epochs = 200;
  double learning_rate = 0.1;
  double rho = 0.95;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
};

struct Mlp {
  std::vector<int> layer_sizes;         // e.g. {232, 32, 8, 4, 2}
  std::vector<Eigen::MatrixXd> weights; // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  std::string schema_id;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
      total += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
    return total;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_id"] = schema_id;
    j["model"] = "mlp-relu-linear";
    j["layer_sizes"] = layer_sizes;
    nlohmann::json layers = nlohmann::json::array();
    for (int l = 0; l < n_layers(); ++l) {
      nlohmann::json lw;
      std::vector<double> wv(weights[l].size());
      // row-major dump for readability
      for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[l].cols(); ++c)
          wv[static_cast<std::size_t>(r) * weights[l].cols() + c] = weights[l](r, c);
      lw["w"] = wv;
      lw["b"] = std::vector<double>(biases[l].data(), biases[l].data() + biases[l].size());
      layers.push_back(lw);
    }
    j["layers"] = layers;
    return j;
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp m;
    m.schema_id = j.at("schema_id").get<std::string>();
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
      int rows = m.layer_sizes[l + 1];
      int cols = m.layer_sizes[l];
      auto wv = layers.at(l).at("w").get<std::vector<double>>();
      auto bv = layers.at(l).at("b").get<std::vector<double>>();
      if (static_cast<int>(wv.size()) != rows * cols || static_cast<int>(bv.size()) != rows)
        throw std::invalid_argument("mlp: malformed model json");
      Eigen::MatrixXd w(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = wv[static_cast<std::size_t>(r) * cols + c];
      m.weights.push_back(std::move(w));
      m.biases.push_back(
          Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size())));
    }
    return m;
  }
};

// He-normal weights, zero biases.
inline Mlp mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed,
                    const std::string& schema_id = "") {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp: need at least input and output");
  for (int s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("mlp: layer sizes must be positive");
  Mlp m;
  m.layer_sizes = layer_sizes;
  m.schema_id = schema_id;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double scale = std::sqrt(2.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = scale * normal(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

// Batch forward pass; rows are samples.
inline Eigen::MatrixXd mlp_forward(const Mlp& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.input_dim()) throw std::invalid_argument("mlp: input width mismatch");
  Eigen::MatrixXd a = x;
  for (int l = 0; l < m.n_layers(); ++l) {
    Eigen::MatrixXd z = a * m.weights[l].transpose();
    z.rowwise() += m.biases[l].transpose();
    if (l + 1 < m.n_layers()) z = z.cwiseMax(0.0);  // ReLU on hidden layers
    a = std::move(z);
  }
  return a;
}

// MSE averaged over batch rows and output dimensions.
inline double mlp_loss(const Mlp& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd pred = mlp_forward(m, x);
  return (pred - y).squaredNorm() / static_cast<double>(pred.rows() * pred.cols());
}

struct MlpGradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  double loss = 0.0;
};

inline MlpGradients mlp_grad(const Mlp& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.cols() != m.input_dim()) throw std::invalid_argument("mlp: input width mismatch");
  if (y.cols() != m.output_dim() || y.rows() != x.rows())
    throw std::invalid_argument("mlp: target shape mismatch");

  const int layers = m.n_layers();
  std::vector<Eigen::MatrixXd> act(layers + 1);
  act[0] = x;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = act[l] * m.weights[l].transpose();
    z.rowwise() += m.biases[l].transpose();
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    act[l + 1] = std::move(z);
  }

  MlpGradients g;
  g.dw.resize(layers);
  g.db.resize(layers);
  const double denom = static_cast<double>(x.rows() * m.output_dim());
  Eigen::MatrixXd delta = 2.0 * (act[layers] - y) / denom;
  g.loss = (act[layers] - y).squaredNorm() / denom;

  for (int l = layers - 1; l >= 0; --l) {
    g.dw[l] = delta.transpose() * act[l];
    g.db[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = delta * m.weights[l];
      // ReLU mask: act[l] holds the post-activation values of layer l.
      delta = delta.cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

struct MlpTrainResult {
  std::vector<double> loss_history;  // loss after each epoch's update
};

// Full-batch Adadelta: per-parameter step from running RMS of gradients and
// updates, scaled by learning_rate.
inline MlpTrainResult mlp_train(Mlp& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                const MlpTrainConfig& cfg) {
  if (x.rows() == 0) throw std::invalid_argument("mlp: no training rows");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("mlp: non-finite inputs");

  const int layers = m.n_layers();
  std::vector<Eigen::MatrixXd> eg2_w(layers), ed2_w(layers);
  std::vector<Eigen::VectorXd> eg2_b(layers), ed2_b(layers);
  for (int l = 0; l < layers; ++l) {
    eg2_w[l] = Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols());
    ed2_w[l] = eg2_w[l];
    eg2_b[l] = Eigen::VectorXd::Zero(m.biases[l].size());
    ed2_b[l] = eg2_b[l];
  }

  auto adadelta = [&](auto& param, auto& grad, auto& eg2, auto& ed2) {
    eg2 = cfg.rho * eg2.array() + (1.0 - cfg.rho) * grad.array().square();
    auto step = -((ed2.array() + cfg.epsilon).sqrt() / (eg2.array() + cfg.epsilon).sqrt()) *
                grad.array();
    ed2 = cfg.rho * ed2.array() + (1.0 - cfg.rho) * step.square();
    param.array() += cfg.learning_rate * step;
  };

  MlpTrainResult res;
  res.loss_history.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    MlpGradients g = mlp_grad(m, x, y);
    if (!std::isfinite(g.loss)) throw std::runtime_error("mlp: loss diverged");
    for (int l = 0; l < layers; ++l) {
      adadelta(m.weights[l], g.dw[l], eg2_w[l], ed2_w[l]);
      adadelta(m.biases[l], g.db[l], eg2_b[l], ed2_b[l]);
    }
    res.loss_history.push_back(mlp_loss(m, x, y));
  }
  return res;
}

}  // namespace propdiag
