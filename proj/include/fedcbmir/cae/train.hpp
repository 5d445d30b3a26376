#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedcbmir/cae/model.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/numerics/optimizer.hpp"
#include "fedcbmir/random.hpp"

namespace fedcbmir {

template <class T>
struct TrainResult {
  CaeModel<T> model;
  std::vector<double> loss_trace;  // mean reconstruction MSE per epoch
};

// Minibatch training on reconstruction MSE. Each epoch visits the dataset in
// an order drawn from one shuffle stream seeded by `shuffle_seed`.
template <class T>
TrainResult<T> train(CaeModel<T> model, std::span<const Tensor<T>> dataset, std::size_t epochs,
                     OptimizerState<T>& optimizer, std::size_t batch_size,
                     std::uint64_t shuffle_seed) {
  if (dataset.empty()) throw TrainingError("train: empty dataset");
  if (batch_size == 0) throw ConfigError("train: batch size must be positive");
  for (const auto& img : dataset) check_image(model.config(), img);

  TrainResult<T> result{std::move(model), {}};
  auto& m = result.model;
  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t n = std::min(batch_size, order.size() - start);
      // A batch is a set; summing in index order keeps full-batch steps
      // independent of the shuffle.
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + start + n);
      std::sort(batch.begin(), batch.end());
      auto lg = batch_loss_and_gradient<T>(m, dataset, std::span<const std::size_t>(batch));
      if (!std::isfinite(lg.loss)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch));
      }
      loss_sum += lg.loss * static_cast<double>(n);
      optimizer_step<T>(optimizer, m.params(), lg.gradient, &m.layout());
    }
    result.loss_trace.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return result;
}

// Mean reconstruction MSE of the model over a dataset, without updating it.
template <class T>
double evaluate_loss(const CaeModel<T>& model, std::span<const Tensor<T>> dataset) {
  if (dataset.empty()) throw ContractError("evaluate_loss: empty dataset");
  double acc = 0.0;
  for (const auto& img : dataset) acc += static_cast<double>(mse(forward(model, img), img));
  return acc / static_cast<double>(dataset.size());
}

}  // namespace fedcbmir
