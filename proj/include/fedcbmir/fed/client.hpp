#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedcbmir/cae/train.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/fed/aggregate.hpp"
#include "fedcbmir/fed/server.hpp"
#include "fedcbmir/random.hpp"

namespace fedcbmir {

// Shuffle stream for one client's local epochs in one round. Independent of
// transport and of the other clients.
inline std::uint64_t local_shuffle_seed(std::uint64_t run_seed, const std::string& client_id,
                                        std::uint64_t round) {
  return derive_seed(run_seed, "local/" + client_id, round);
}

// Loads omega_r, trains locally, and reports omega^k_{r+1} with n_k.
// The optimizer state starts fresh every round.
template <class T>
BasicClientUpdate<T> client_local_train(const BasicWeights<T>& global,
                                        const std::vector<Tensor<T>>& dataset,
                                        const CaeConfig& model_cfg, const LocalTrainingSpec& spec,
                                        const std::string& client_id, std::uint64_t round,
                                        std::uint64_t run_seed) {
  if (dataset.empty()) throw TrainingError("client " + client_id + " has no training data");
  auto model = CaeModel<T>::from_weights(model_cfg, global);
  OptimizerState<T> opt{spec.optimizer, spec.learning_rate};
  auto result = train<T>(std::move(model), dataset, spec.epochs, opt, spec.batch_size,
                         local_shuffle_seed(run_seed, client_id, round));
  BasicClientUpdate<T> u;
  u.client_id = client_id;
  u.round = round;
  u.n_k = dataset.size();
  u.weights = result.model.template weights_as<T>();
  u.mean_loss = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  return u;
}

// A participant holding its private data. Only weights leave this object.
template <class T>
class LocalClient {
 public:
  LocalClient(std::string id, std::vector<Tensor<T>> data, CaeConfig model_cfg,
              LocalTrainingSpec spec, std::uint64_t run_seed)
      : id_(std::move(id)),
        data_(std::move(data)),
        model_cfg_(std::move(model_cfg)),
        spec_(spec),
        run_seed_(run_seed) {}

  const std::string& id() const { return id_; }
  std::size_t sample_count() const { return data_.size(); }
  const CaeConfig& model_config() const { return model_cfg_; }

  BasicClientUpdate<T> handle(std::uint64_t round, const BasicWeights<T>& global) const {
    return client_local_train<T>(global, data_, model_cfg_, spec_, id_, round, run_seed_);
  }

 private:
  std::string id_;
  std::vector<Tensor<T>> data_;
  CaeConfig model_cfg_;
  LocalTrainingSpec spec_;
  std::uint64_t run_seed_;
};

}  // namespace fedcbmir
