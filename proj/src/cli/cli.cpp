#include "srr/cli.hpp"

#include "srr/binary_io.hpp"
#include "srr/dataset.hpp"
#include "srr/eval.hpp"
#include "srr/model_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>

namespace srr {

ExitCode exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return ExitCode::Io;
    case ErrorCode::DivergedTraining:
    case ErrorCode::NonFiniteGradient: return ExitCode::Diverged;
    case ErrorCode::ConfigError: return ExitCode::Usage;
    default: return ExitCode::BadData;
  }
}

namespace {

namespace fs = std::filesystem;
using Logger = std::shared_ptr<spdlog::logger>;

Logger make_logger(std::ostream& err) {
  auto logger = std::make_shared<spdlog::logger>("srr", std::make_shared<spdlog::sinks::ostream_sink_st>(err));
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("SRR_LOG"); env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
  }
  logger->set_level(level);
  return logger;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
  }
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) { write_file(path, doc.dump(2) + "\n"); }

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a, std::ostream& out, const Logger& log) {
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (!a.data.empty()) rc.data = a.data;
  if (!a.out.empty()) rc.out = a.out;
  if (a.seed) rc.train.seed = *a.seed;
  if (!rc.data) throw Error(ErrorCode::ConfigError, "no dataset given (--data or \"data\" in the config)");
  if (!rc.out) throw Error(ErrorCode::ConfigError, "no output directory given (--out or \"out\" in the config)");

  const Dataset data = read_dataset(*rc.data);
  if (!rc.input_dim_given) rc.ranker.input_dim = data.dim();
  rc.ranker.validate();
  log->info("training on {} lists, d={}, {} epochs, seed {}", data.size(), data.dim(), rc.train.epochs,
            rc.train.seed);

  ensure_directory(*rc.out);
  write_json(*rc.out / "config.json", to_json(rc));

  const fs::path log_path = *rc.out / "train_log.jsonl";
  std::ofstream log_file(log_path, std::ios::binary | std::ios::trunc);
  if (!log_file) throw Error(ErrorCode::IoError, "cannot open " + log_path.string());
  const FitResult fitted = fit(data, rc.train, rc.ranker, [&](const EpochRecord& r) {
    nlohmann::ordered_json line = {
        {"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"train_pairwise_accuracy", r.train_pairwise_accuracy}};
    log_file << line.dump() << '\n' << std::flush;
    log->info("epoch {:>3}  loss {:.6f}  train acc {:.4f}", r.epoch, r.mean_loss, r.train_pairwise_accuracy);
  });
  if (!log_file) throw Error(ErrorCode::IoError, "write failed for " + log_path.string());

  const fs::path model_path = *rc.out / "model.srrm";
  save_model(RankerModel{rc.ranker, fitted.params}, model_path);
  out << "model: " << model_path.string() << '\n';
  if (!fitted.log.empty()) {
    out << "final train accuracy: " << format_percent(100.0 * fitted.log.back().train_pairwise_accuracy) << "%\n";
  }
}

struct EvalArgs {
  std::string model, data, metric = "pairwise", report;
  std::uint64_t seed = 0;
};

void cmd_eval(const EvalArgs& a, std::ostream& out, const Logger& log) {
  const std::string model_bytes = read_file(a.model);
  auto model = std::make_shared<const RankerModel>(decode_model(model_bytes));
  const Dataset data = read_dataset(a.data);
  if (model->config.input_dim != data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects d=" + std::to_string(model->config.input_dim) +
                                                  ", dataset has d=" + std::to_string(data.dim()));
  }
  const ListScorer scorer = make_scorer(model);
  const bool pairwise = a.metric == "pairwise";
  const double value = pairwise ? pairwise_accuracy(scorer, data) : top1_safe_rate(scorer, data);

  EvalReport report;
  report.metric = pairwise ? "pairwise_accuracy" : "top1_safe_rate";
  report.model_id = content_id(model_bytes);
  report.values.emplace_back(fs::path(a.data).filename().string(), value);
  report.seed = a.seed;
  out << report.metric << " " << format_percent(value) << '\n';
  if (!a.report.empty()) {
    append_report(report, a.report);
    log->info("appended report to {}", a.report);
  }
}

std::vector<float> json_vector(const nlohmann::json& v, const std::string& what) {
  if (!v.is_array()) throw Error(ErrorCode::FormatError, what + " must be an array of numbers");
  std::vector<float> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorCode::FormatError, what + " must be an array of numbers");
    out.push_back(x.get<float>());
  }
  return out;
}

// One list, either an SRRF file holding exactly one list or a JSON object
// {"instruction": [...], "responses": [[...], ...]}.
Tensor2<float> read_features(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind(std::string(kDatasetMagic), 0) == 0) {
    const Dataset d = decode_dataset(bytes);
    if (d.size() != 1) {
      throw Error(ErrorCode::FormatError, "features file holds " + std::to_string(d.size()) + " lists, expected 1");
    }
    return d[0].embeddings;
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::FormatError, "features file is neither SRRF nor JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || !doc.contains("instruction") || !doc.contains("responses") ||
      !doc.at("responses").is_array()) {
    throw Error(ErrorCode::FormatError, "features JSON needs \"instruction\" and \"responses\"");
  }
  const std::vector<float> inst = json_vector(doc.at("instruction"), "instruction");
  std::vector<std::vector<float>> resps;
  for (const auto& r : doc.at("responses")) resps.push_back(json_vector(r, "response"));
  if (inst.empty() || resps.empty()) throw Error(ErrorCode::FormatError, "features list is empty");
  Tensor2<float> e(static_cast<Eigen::Index>(resps.size() + 1), static_cast<Eigen::Index>(inst.size()));
  std::copy(inst.begin(), inst.end(), e.row(0).begin());
  for (std::size_t i = 0; i < resps.size(); ++i) {
    if (resps[i].size() != inst.size()) {
      throw Error(ErrorCode::FormatError, "response " + std::to_string(i) + " has length " +
                                              std::to_string(resps[i].size()) + ", instruction has " +
                                              std::to_string(inst.size()));
    }
    std::copy(resps[i].begin(), resps[i].end(), e.row(static_cast<Eigen::Index>(i + 1)).begin());
  }
  return e;
}

void cmd_rank(const std::string& model_path, const std::string& features, std::ostream& out) {
  const RankerModel model = load_model(model_path);
  const Tensor2<float> e = read_features(features);
  if (!e.allFinite()) throw Error(ErrorCode::FormatError, "features contain non-finite values");
  const ScoredList s = score_list(e, model.params, model.config, Mode::Infer);
  for (std::size_t idx : s.scores.ranking) out << fmt::format("{} {:.6f}\n", idx, s.scores.scores[idx]);
}

struct SynthArgs {
  std::string spec, out, direction_out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> train_lists;
};

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_filename(p.stem().string() + suffix + p.extension().string());
  return out;
}

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  if (!a.spec.empty()) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(a.spec));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ConfigError, "cannot parse " + a.spec + ": " + e.what());
    }
    spec = parse_synthetic_spec(doc);
  }
  if (a.seed) spec.seed = *a.seed;
  const SyntheticData data = generate(spec);
  write_dataset(data.dataset, a.out);
  out << fmt::format("wrote {} lists (d={}) to {}\n", data.dataset.size(), data.dataset.dim(), a.out);
  out << "oracle accuracy: " << format_percent(100.0 * oracle_accuracy(data.dataset, data.direction)) << "%\n";
  if (a.train_lists) {
    const DatasetSplit split = split_dataset(data.dataset, *a.train_lists, spec.seed);
    const fs::path train = sibling(a.out, ".train");
    const fs::path test = sibling(a.out, ".test");
    write_dataset(split.train, train);
    write_dataset(split.test, test);
    out << fmt::format("train: {} lists -> {}\ntest: {} lists -> {}\n", split.train.size(), train.string(),
                       split.test.size(), test.string());
  }
  if (!a.direction_out.empty()) {
    nlohmann::ordered_json doc = {{"spec", to_json(spec)}, {"direction", data.direction}};
    write_json(a.direction_out, doc);
  }
}

void cmd_inspect(const std::string& path, std::ostream& out) {
  const Dataset d = read_dataset(path);
  const DatasetHeader h = d.header();
  std::size_t responses = 0, safe = 0, min_m = 0, max_m = 0;
  bool finite = true;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const CandidateList& list = d[i];
    responses += list.size();
    safe += list.safe_count();
    min_m = i == 0 ? list.size() : std::min(min_m, list.size());
    max_m = std::max(max_m, list.size());
    finite = finite && list.embeddings.allFinite();
  }
  const auto pct = [&](std::size_t n) {
    return format_percent(responses == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(responses));
  };
  out << fmt::format("format: SRRF v{}\n", h.format_version);
  out << fmt::format("source: {}\n", source_tag_string(h.source_tag));
  out << fmt::format("d: {}\n", h.dim);
  out << fmt::format("lists: {}\n", h.list_count);
  out << fmt::format("responses: {} (m from {} to {})\n", responses, min_m, max_m);
  out << fmt::format("labels: safe {} ({}%), unsafe {} ({}%)\n", safe, pct(safe), responses - safe,
                     pct(responses - safe));
  out << "finite: " << (finite ? "yes" : "no") << '\n';
  const ValidationReport train = validate(d, ValidationMode::Train);
  const auto bad = train.failures();
  if (bad.empty()) {
    out << "train validation: ok\n";
  } else {
    out << "train validation: " << bad.size() << " failing list(s)\n" << train.summary();
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safety-aware response ranker: train, evaluate, rank, synthesize and inspect"};
  app.name("srr");
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a ranker on an SRRF dataset");
  train_cmd->add_option("--data", train.data, "Training dataset (SRRF)");
  train_cmd->add_option("--config", train.config, "Run config (JSON)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Output directory for model.srrm, train_log.jsonl, config.json");
  train_cmd->add_option("--seed", train.seed, "Overrides train.seed");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a dataset with a trained model");
  eval_cmd->add_option("--model", eval.model, "Model file (SRRM)")->required();
  eval_cmd->add_option("--data", eval.data, "Evaluation dataset (SRRF)")->required();
  eval_cmd->add_option("--metric", eval.metric, "pairwise or top1")
      ->check(CLI::IsMember({"pairwise", "top1"}))
      ->capture_default_str();
  eval_cmd->add_option("--report", eval.report, "Append a JSON line record to this file");
  eval_cmd->add_option("--seed", eval.seed, "Recorded in the report")->capture_default_str();

  std::string rank_model, rank_features;
  CLI::App* rank_cmd = app.add_subcommand("rank", "Rank the responses of a single list");
  rank_cmd->add_option("--model", rank_model, "Model file (SRRM)")->required();
  rank_cmd->add_option("--features", rank_features, "One list: SRRF with a single list, or JSON")->required();

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic SRRF dataset");
  synth_cmd->add_option("--spec", synth.spec, "Synthetic spec (JSON)")->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output SRRF path")->required();
  synth_cmd->add_option("--seed", synth.seed, "Overrides the spec seed");
  synth_cmd->add_option("--train-lists", synth.train_lists,
                        "Also write <out>.train and <out>.test with this many training lists");
  synth_cmd->add_option("--direction-out", synth.direction_out, "Write the spec and safety direction (JSON)");

  std::string inspect_file;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Summarize an SRRF dataset");
  inspect_cmd->add_option("--file", inspect_file, "SRRF file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  const Logger log = make_logger(err);
  try {
    if (*train_cmd) cmd_train(train, out, log);
    if (*eval_cmd) cmd_eval(eval, out, log);
    if (*rank_cmd) cmd_rank(rank_model, rank_features, out);
    if (*synth_cmd) cmd_synth(synth, out);
    if (*inspect_cmd) cmd_inspect(inspect_file, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(exit_code_for(e.code()));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::BadData);
  }
  return 0;
}

}  // namespace srr
