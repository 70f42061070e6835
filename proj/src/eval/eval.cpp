#include "srr/eval.hpp"

#include "srr/error.hpp"
#include "srr/ranker.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace srr {

ListScorer make_scorer(std::shared_ptr<const RankerModel> model) {
  return [model = std::move(model)](const CandidateList& list) {
    return score_list(list.embeddings, model->params, model->config, Mode::Infer).scores.scores;
  };
}

namespace {

void fail_precondition(const std::string& metric, const std::vector<std::string>& offenders) {
  std::string msg = metric + " precondition failed for " + std::to_string(offenders.size()) + " list(s):";
  const std::size_t shown = std::min<std::size_t>(offenders.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + offenders[i];
  if (shown < offenders.size()) msg += "\n  ...";
  throw Error(ErrorCode::MetricPreconditionFailed, msg);
}

std::vector<double> checked_scores(const ListScorer& scorer, const CandidateList& list) {
  std::vector<double> s = scorer(list);
  if (s.size() != list.size()) {
    throw Error(ErrorCode::DimensionMismatch, "scorer returned " + std::to_string(s.size()) + " scores for list " +
                                                  std::to_string(list.list_id) + " of size " +
                                                  std::to_string(list.size()));
  }
  return s;
}

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

double pairwise_accuracy(const ListScorer& scorer, const Dataset& dataset) {
  std::vector<std::string> offenders;
  for (const CandidateList& list : dataset.lists()) {
    if (list.size() != 2 || list.safe_count() != 1) {
      offenders.push_back("list " + std::to_string(list.list_id) + ": m=" + std::to_string(list.size()) +
                          ", safe=" + std::to_string(list.safe_count()));
    } else if (!list.embeddings.allFinite()) {
      offenders.push_back("list " + std::to_string(list.list_id) + ": non-finite vector");
    }
  }
  if (!offenders.empty()) fail_precondition("pairwise_accuracy", offenders);

  std::size_t hits = 0;
  for (const CandidateList& list : dataset.lists()) {
    const std::vector<double> s = checked_scores(scorer, list);
    const std::size_t safe = list.labels[0] == 1 ? 0 : 1;
    hits += s[safe] > s[1 - safe] ? 1 : 0;
  }
  return percent(hits, dataset.size());
}

double top1_safe_rate(const ListScorer& scorer, const Dataset& dataset) {
  const ValidationReport report = validate(dataset, ValidationMode::Eval);
  if (!report.ok()) {
    std::vector<std::string> offenders;
    for (const ListVerdict& v : report.failures()) {
      std::string line = "list " + std::to_string(v.list_id) + ":";
      for (ListIssue issue : v.issues) line += " " + std::string(to_string(issue));
      offenders.push_back(line);
    }
    fail_precondition("top1_safe_rate", offenders);
  }
  std::size_t hits = 0;
  for (const CandidateList& list : dataset.lists()) {
    const std::vector<double> s = checked_scores(scorer, list);
    hits += list.labels[rank(s).front()] == 1 ? 1 : 0;
  }
  return percent(hits, dataset.size());
}

CrossMatrix cross_matrix(const std::vector<NamedScorer>& models, const std::vector<NamedDataset>& datasets) {
  CrossMatrix out;
  for (const auto& m : models) out.sources.push_back(m.name);
  for (const auto& d : datasets) out.targets.push_back(d.name);
  out.values.assign(models.size(), std::vector<double>(datasets.size(), 0.0));
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < datasets.size(); ++j) {
      out.values[i][j] = pairwise_accuracy(models[i].scorer, *datasets[j].dataset);
    }
  }
  return out;
}

std::string format_percent(double value) { return fmt::format("{:.2f}", value); }

std::string CrossMatrix::render() const {
  std::size_t first = std::string("source \\ target").size();
  for (const auto& s : sources) first = std::max(first, s.size());
  std::vector<std::size_t> widths;
  for (const auto& t : targets) widths.push_back(std::max<std::size_t>(t.size(), 6));

  std::string out = fmt::format("{:<{}}", "source \\ target", first);
  for (std::size_t j = 0; j < targets.size(); ++j) out += fmt::format("  {:>{}}", targets[j], widths[j]);
  out += '\n';
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out += fmt::format("{:<{}}", sources[i], first);
    for (std::size_t j = 0; j < targets.size(); ++j) out += fmt::format("  {:>{}}", format_percent(values[i][j]), widths[j]);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["model"] = model_id;
  nlohmann::ordered_json vals = nlohmann::ordered_json::object();
  for (const auto& [name, value] : values) vals[name] = std::round(value * 100.0) / 100.0;
  j["values"] = vals;
  j["seed"] = seed;
  if (timestamp) j["timestamp"] = *timestamp;
  return j;
}

void append_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open report " + path.string());
  out << report.to_json().dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for report " + path.string());
}

}  // namespace srr
