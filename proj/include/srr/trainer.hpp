#pragma once

#include "srr/dataset.hpp"
#include "srr/ranker.hpp"
#include "srr/rng.hpp"
#include "srr/tape.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace srr {

struct TrainConfig {
  double learning_rate = 0.001;
  double weight_decay = 0.0001;
  // Classic SGD momentum. 1.0 is accepted but never decays the velocity.
  double momentum = 0.9;
  std::uint32_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct TargetDistribution {
  std::vector<double> p_star;
  std::size_t k = 0;
};

// 1/k on each safe index, 0 elsewhere. NoSafeCandidate if no label is 1.
TargetDistribution build_target(std::span<const std::uint8_t> labels);

// KL(target || softmax(scores / tau)) recorded on `tape`; `scores`
// receives the 1 x m score row.
template <class T>
Var list_loss_on_tape(Tape<T>& tape, std::span<const Var> params, const Tensor2<T>& embeddings,
                      std::span<const std::uint8_t> labels, const RankerConfig& config, Mode mode, Rng* rng,
                      Var* scores = nullptr);

template <class T>
struct LossAndGrad {
  T loss = 0;
  std::vector<double> scores;
  RankerParameters<T> grads;
};

template <class T>
LossAndGrad<T> list_loss(const Tensor2<T>& embeddings, std::span<const std::uint8_t> labels,
                         const RankerParameters<T>& params, const RankerConfig& config, Mode mode = Mode::Infer,
                         Rng* rng = nullptr);

// v <- momentum * v + g + weight_decay * theta; theta <- theta - lr * v.
// NonFiniteGradient (naming the block) leaves params and velocity untouched.
template <class T>
void sgd_step(RankerParameters<T>& params, const RankerParameters<T>& grads, RankerParameters<T>& velocity,
              const TrainConfig& config);

struct EpochRecord {
  std::uint32_t epoch = 0;
  double mean_loss = 0.0;
  // Fraction of (safe, unsafe) pairs inside a list where the safe response
  // scores strictly higher, in infer mode.
  double train_pairwise_accuracy = 0.0;
};

struct FitResult {
  RankerParameters<float> params;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fraction in [0, 1] of correctly ordered safe/unsafe pairs over all lists.
double list_pair_accuracy(const Dataset& dataset, const RankerParameters<float>& params, const RankerConfig& config);

// One candidate list per optimizer step, seeded shuffle per epoch. All
// randomness (init, shuffle, dropout) comes from one generator seeded with
// train.seed. DivergedTraining if an epoch's mean loss is non-finite.
FitResult fit(const Dataset& dataset, const TrainConfig& train, const RankerConfig& ranker,
              const EpochCallback& on_epoch = {});

}  // namespace srr
