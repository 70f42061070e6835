#include "srr/trainer.hpp"

#include "srr/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace srr {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be non-negative");
  if (!(momentum >= 0.0 && momentum <= 1.0)) fail("momentum must lie in [0, 1]");
}

TargetDistribution build_target(std::span<const std::uint8_t> labels) {
  TargetDistribution out;
  for (std::uint8_t y : labels) out.k += y == 1 ? 1 : 0;
  if (out.k == 0) throw Error(ErrorCode::NoSafeCandidate, "list has no safe response");
  const double share = 1.0 / static_cast<double>(out.k);
  out.p_star.reserve(labels.size());
  for (std::uint8_t y : labels) out.p_star.push_back(y == 1 ? share : 0.0);
  return out;
}

template <class T>
Var list_loss_on_tape(Tape<T>& tape, std::span<const Var> params, const Tensor2<T>& embeddings,
                      std::span<const std::uint8_t> labels, const RankerConfig& config, Mode mode, Rng* rng,
                      Var* scores_out) {
  if (embeddings.rows() != static_cast<Eigen::Index>(labels.size() + 1)) {
    throw Error(ErrorCode::DimensionMismatch, "label count does not match response count");
  }
  const TargetDistribution target = build_target(labels);
  std::vector<T> p_star(target.p_star.begin(), target.p_star.end());
  const Var scores = score_on_tape(tape, params, embeddings, config, mode, rng);
  if (scores_out) *scores_out = scores;
  return tape.listwise_kl(scores, std::span<const T>(p_star), static_cast<T>(config.temperature));
}

template <class T>
LossAndGrad<T> list_loss(const Tensor2<T>& embeddings, std::span<const std::uint8_t> labels,
                         const RankerParameters<T>& params, const RankerConfig& config, Mode mode, Rng* rng) {
  Tape<T> tape;
  const std::vector<Var> vars = register_parameters(tape, params);
  Var scores;
  const Var loss = list_loss_on_tape(tape, vars, embeddings, labels, config, mode, rng, &scores);
  tape.backward(loss);

  LossAndGrad<T> out;
  out.loss = tape.value(loss)(0, 0);
  const auto& s = tape.value(scores);
  out.scores.assign(s.data(), s.data() + s.size());
  std::size_t i = 0;
  out.grads.for_each_block([&](std::string_view, Tensor2<T>& g) { g = tape.take_grad(vars[i++]); });
  return out;
}

template <class T>
void sgd_step(RankerParameters<T>& params, const RankerParameters<T>& grads, RankerParameters<T>& velocity,
              const TrainConfig& config) {
  const auto g = grads.blocks_const();
  const auto v = velocity.blocks_const();
  std::size_t i = 0;
  params.for_each_block([&](std::string_view name, const Tensor2<T>& p) {
    if (g[i]->rows() != p.rows() || g[i]->cols() != p.cols() || v[i]->rows() != p.rows() ||
        v[i]->cols() != p.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient or velocity shape differs for block " + std::string(name));
    }
    // x * 0 is NaN exactly when x is not finite; the sum vectorizes.
    if (!((g[i]->array() * T(0)).sum() == T(0))) {
      throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient in block " + std::string(name));
    }
    ++i;
  });

  const T momentum = static_cast<T>(config.momentum);
  const T decay = static_cast<T>(config.weight_decay);
  const T lr = static_cast<T>(config.learning_rate);
  i = 0;
  std::vector<Tensor2<T>*> vel;
  velocity.for_each_block([&](std::string_view, Tensor2<T>& t) { vel.push_back(&t); });
  params.for_each_block([&](std::string_view, Tensor2<T>& p) {
    auto theta = p.array();
    auto v = vel[i]->array();
    v = momentum * v + g[i]->array() + decay * theta;
    theta -= lr * v;
    ++i;
  });
}

double list_pair_accuracy(const Dataset& dataset, const RankerParameters<float>& params, const RankerConfig& config) {
  std::size_t correct = 0;
  std::size_t pairs = 0;
  for (const CandidateList& list : dataset.lists()) {
    const ScoredList scored = score_list(list.embeddings, params, config, Mode::Infer);
    const auto& s = scored.scores.scores;
    for (std::size_t a = 0; a < list.size(); ++a) {
      if (list.labels[a] != 1) continue;
      for (std::size_t b = 0; b < list.size(); ++b) {
        if (list.labels[b] != 0) continue;
        ++pairs;
        correct += s[a] > s[b] ? 1 : 0;
      }
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(pairs);
}

FitResult fit(const Dataset& dataset, const TrainConfig& train, const RankerConfig& ranker,
              const EpochCallback& on_epoch) {
  train.validate();
  ranker.validate();
  if (ranker.input_dim != dataset.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "ranker input_dim " + std::to_string(ranker.input_dim) +
                                                  " differs from dataset d=" + std::to_string(dataset.dim()));
  }
  const ValidationReport report = validate(dataset, ValidationMode::Train);
  if (!report.ok()) throw Error(ErrorCode::DomainError, "dataset fails training validation:\n" + report.summary());
  if (dataset.size() == 0) throw Error(ErrorCode::DomainError, "dataset has no candidate lists");

  Rng rng(train.seed);
  FitResult result;
  result.params = RankerParameters<float>::initialize(ranker, rng);
  RankerParameters<float> velocity = RankerParameters<float>::zeros(ranker);

  std::vector<std::size_t> order(dataset.size());
  for (std::uint32_t epoch = 1; epoch <= train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t idx : order) {
      const CandidateList& list = dataset[idx];
      const LossAndGrad<float> step = list_loss(list.embeddings, list.labels, result.params, ranker, Mode::Train, &rng);
      total += static_cast<double>(step.loss);
      sgd_step(result.params, step.grads, velocity, train);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = total / static_cast<double>(dataset.size());
    if (!std::isfinite(record.mean_loss)) {
      throw Error(ErrorCode::DivergedTraining, "mean loss became non-finite in epoch " + std::to_string(epoch));
    }
    record.train_pairwise_accuracy = list_pair_accuracy(dataset, result.params, ranker);
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

#define SRR_INSTANTIATE(T)                                                                                     \
  template Var list_loss_on_tape(Tape<T>&, std::span<const Var>, const Tensor2<T>&,                           \
                                 std::span<const std::uint8_t>, const RankerConfig&, Mode, Rng*, Var*);       \
  template LossAndGrad<T> list_loss(const Tensor2<T>&, std::span<const std::uint8_t>,                         \
                                    const RankerParameters<T>&, const RankerConfig&, Mode, Rng*);             \
  template void sgd_step(RankerParameters<T>&, const RankerParameters<T>&, RankerParameters<T>&,              \
                         const TrainConfig&);

SRR_INSTANTIATE(float)
SRR_INSTANTIATE(double)

#undef SRR_INSTANTIATE

}  // namespace srr
