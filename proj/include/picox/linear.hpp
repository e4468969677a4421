/* Copyright 2026 The PICOX Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// K-way linear scoring head shared by the boundary and span-type models,
// plus the mini-batch optimizer loop both heads train with.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "picox/errors.hpp"

namespace picox {

template <std::size_t K>
struct LinearHead {
  std::size_t dim = 0;
  std::vector<double> weights;  // K x dim, row-major
  std::array<double, K> bias{};

  static LinearHead zeros(std::size_t dim) { return {dim, std::vector<double>(K * dim, 0.0), {}}; }

  std::span<double> row(std::size_t k) { return {weights.data() + k * dim, dim}; }
  std::span<const double> row(std::size_t k) const { return {weights.data() + k * dim, dim}; }

  std::array<double, K> logits(std::span<const double> x) const {
    if (x.size() != dim)
      throw ValidationError("dimension mismatch: input " + std::to_string(x.size()) + ", model " + std::to_string(dim));
    std::array<double, K> z = bias;
    for (std::size_t k = 0; k < K; ++k) {
      auto w = row(k);
      z[k] += std::inner_product(w.begin(), w.end(), x.begin(), 0.0);
    }
    return z;
  }

  /// this += scale * delta x^T (weights) and scale * delta (bias).
  void accumulate(const std::array<double, K>& delta, std::span<const double> x, double scale = 1.0) {
    for (std::size_t k = 0; k < K; ++k) {
      const double g = scale * delta[k];
      bias[k] += g;
      if (g == 0.0) continue;
      auto w = row(k);
      for (std::size_t j = 0; j < dim; ++j) w[j] += g * x[j];
    }
  }

  bool finite() const {
    return std::all_of(weights.begin(), weights.end(), [](double v) { return std::isfinite(v); }) &&
           std::all_of(bias.begin(), bias.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double lr = 5e-5;
  std::size_t batch_size = 8;
  std::size_t epochs = 3;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  const std::string opt = j.value("optimizer", std::string(c.optimizer == OptimizerKind::adam ? "adam" : "sgd"));
  if (opt == "sgd") c.optimizer = OptimizerKind::sgd;
  else if (opt == "adam") c.optimizer = OptimizerKind::adam;
  else throw ValidationError("unknown optimizer \"" + opt + "\"");
  return c;
}

struct TrainLog {
  /// Mean loss over the whole training set after each epoch.
  std::vector<double> epoch_loss;
};

namespace detail {

template <std::size_t K>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::size_t dim) : cfg_(cfg) {
    if (cfg_.optimizer == OptimizerKind::adam) {
      m_ = LinearHead<K>::zeros(dim);
      v_ = LinearHead<K>::zeros(dim);
    }
  }

  void step(LinearHead<K>& head, const LinearHead<K>& grad) {
    if (cfg_.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < head.weights.size(); ++i) head.weights[i] -= cfg_.lr * grad.weights[i];
      for (std::size_t k = 0; k < K; ++k) head.bias[k] -= cfg_.lr * grad.bias[k];
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto update = [&](double& p, double g, double& m, double& v) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      p -= cfg_.lr * (m / c1) / (std::sqrt(v / c2) + cfg_.epsilon);
    };
    for (std::size_t i = 0; i < head.weights.size(); ++i)
      update(head.weights[i], grad.weights[i], m_.weights[i], v_.weights[i]);
    for (std::size_t k = 0; k < K; ++k) update(head.bias[k], grad.bias[k], m_.bias[k], v_.bias[k]);
  }

 private:
  TrainConfig cfg_;
  LinearHead<K> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace detail

/// Mini-batch training over `n` examples. `add_gradient(i, head, grad)` adds
/// example i's gradient into grad; `example_loss(i, head)` returns
/// (loss, weight) used for the per-epoch report sum(loss) / sum(weight).
/// The batch update uses the mean gradient over the batch's examples.
template <std::size_t K, typename AddGradient, typename ExampleLoss>
TrainLog train_head(LinearHead<K>& head, std::size_t n, const TrainConfig& cfg, AddGradient&& add_gradient,
                    ExampleLoss&& example_loss) {
  if (n == 0) throw ValidationError("empty training set");
  if (cfg.batch_size == 0) throw ValidationError("batch size must be positive");
  if (!(cfg.lr > 0.0)) throw ValidationError("learning rate must be positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  detail::Optimizer<K> opt(cfg, head.dim);
  LinearHead<K> grad = LinearHead<K>::zeros(head.dim);
  TrainLog log;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      std::fill(grad.weights.begin(), grad.weights.end(), 0.0);
      grad.bias.fill(0.0);
      for (std::size_t k = b; k < e; ++k) add_gradient(order[k], head, grad);
      const double inv = 1.0 / static_cast<double>(e - b);
      for (double& g : grad.weights) g *= inv;
      for (double& g : grad.bias) g *= inv;
      opt.step(head, grad);
    }
    double total = 0.0, weight = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto [l, w] = example_loss(i, head);
      total += l;
      weight += w;
    }
    log.epoch_loss.push_back(weight > 0.0 ? total / weight : 0.0);
  }
  if (!head.finite()) throw ValidationError("training diverged (non-finite parameters)");
  return log;
}

// ---------------------------------------------------------------------------
// Model files

template <std::size_t K>
nlohmann::json head_to_json(const LinearHead<K>& head, std::string_view kind, const std::vector<std::string>& categories,
                            const nlohmann::json& config) {
  nlohmann::json w = nlohmann::json::array();
  for (std::size_t k = 0; k < K; ++k) {
    auto r = head.row(k);
    w.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"kind", kind},
          {"dim", head.dim},
          {"categories", categories},
          {"W", std::move(w)},
          {"b", std::vector<double>(head.bias.begin(), head.bias.end())},
          {"config", config}};
}

template <std::size_t K>
LinearHead<K> head_from_json(const nlohmann::json& j, std::string_view kind, const std::vector<std::string>& categories) {
  try {
    if (j.at("kind").get<std::string>() != kind) throw ValidationError("expected a " + std::string(kind) + " model");
    if (j.at("categories").get<std::vector<std::string>>() != categories)
      throw ValidationError("model category order does not match");
    auto head = LinearHead<K>::zeros(j.at("dim").get<std::size_t>());
    const auto& w = j.at("W");
    const auto b = j.at("b").get<std::vector<double>>();
    if (w.size() != K || b.size() != K) throw ValidationError("model has wrong number of rows");
    for (std::size_t k = 0; k < K; ++k) {
      const auto r = w[k].get<std::vector<double>>();
      if (r.size() != head.dim) throw ValidationError("model row has wrong dimension");
      std::copy(r.begin(), r.end(), head.row(k).begin());
      head.bias[k] = b[k];
    }
    if (!head.finite()) throw ValidationError("model has non-finite parameters");
    return head;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace picox
