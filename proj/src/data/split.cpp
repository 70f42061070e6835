#include "srr/dataset.hpp"
#include "srr/error.hpp"
#include "srr/rng.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

namespace srr {

SplitResult split_train_test(std::span<const std::uint64_t> prompt_ids, std::size_t train_count, std::uint64_t seed) {
  std::vector<std::uint64_t> unique;
  std::unordered_set<std::uint64_t> seen;
  for (std::uint64_t id : prompt_ids) {
    if (seen.insert(id).second) unique.push_back(id);
  }
  if (train_count >= unique.size() && !(train_count == 0 && unique.empty())) {
    throw Error(ErrorCode::InsufficientPrompts, "cannot take " + std::to_string(train_count) +
                                                    " training prompts from " + std::to_string(unique.size()));
  }

  // Partial Fisher-Yates over positions.
  std::vector<std::size_t> positions(unique.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < train_count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(positions.size() - i));
    std::swap(positions[i], positions[j]);
  }
  std::vector<bool> is_train(unique.size(), false);
  for (std::size_t i = 0; i < train_count; ++i) is_train[positions[i]] = true;

  SplitResult out;
  for (std::size_t i = 0; i < unique.size(); ++i) (is_train[i] ? out.train : out.test).push_back(unique[i]);
  return out;
}

DatasetSplit split_dataset(const Dataset& dataset, std::size_t train_prompts, std::uint64_t seed,
                           const PromptKey& prompt_of) {
  auto key = [&](const CandidateList& l) { return prompt_of ? prompt_of(l) : l.list_id; };
  std::vector<std::uint64_t> prompts;
  prompts.reserve(dataset.size());
  for (const CandidateList& l : dataset.lists()) prompts.push_back(key(l));
  const SplitResult split = split_train_test(prompts, train_prompts, seed);
  const std::unordered_set<std::uint64_t> train(split.train.begin(), split.train.end());

  DatasetSplit out{Dataset(dataset.dim(), dataset.source_tag()), Dataset(dataset.dim(), dataset.source_tag())};
  for (const CandidateList& l : dataset.lists()) (train.contains(key(l)) ? out.train : out.test).add(l);
  return out;
}

}  // namespace srr
