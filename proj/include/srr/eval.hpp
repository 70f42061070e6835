#pragma once

#include "srr/dataset.hpp"
#include "srr/model_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace srr {

// Anything that assigns one score per response of a list.
using ListScorer = std::function<std::vector<double>(const CandidateList&)>;

// Infer-mode ranker scores. The model is shared, not copied per call.
ListScorer make_scorer(std::shared_ptr<const RankerModel> model);

// Percentage of lists where the safe response scores strictly higher than
// the unsafe one. Every list must have m = 2 with exactly one safe label,
// otherwise MetricPreconditionFailed names the offending lists.
double pairwise_accuracy(const ListScorer& scorer, const Dataset& dataset);

// Percentage of lists whose top-ranked response is safe. Lists need m >= 1
// and finite vectors.
double top1_safe_rate(const ListScorer& scorer, const Dataset& dataset);

struct NamedScorer {
  std::string name;
  ListScorer scorer;
};

struct NamedDataset {
  std::string name;
  const Dataset* dataset = nullptr;
};

struct CrossMatrix {
  std::vector<std::string> sources;  // rows: training dataset of each model
  std::vector<std::string> targets;  // columns: evaluation datasets
  std::vector<std::vector<double>> values;

  // Plain-text table, percentages with two decimals.
  std::string render() const;
};

// Entry (i, j) = pairwise_accuracy(model trained on source i, target j).
CrossMatrix cross_matrix(const std::vector<NamedScorer>& models, const std::vector<NamedDataset>& datasets);

std::string format_percent(double value);

struct EvalReport {
  std::string metric;
  std::string model_id;
  std::vector<std::pair<std::string, double>> values;  // dataset id -> percentage
  std::uint64_t seed = 0;
  std::optional<std::string> timestamp;

  nlohmann::ordered_json to_json() const;
};

// Appends one JSON line; existing records are never rewritten.
void append_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace srr
