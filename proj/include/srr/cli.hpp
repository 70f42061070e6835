#pragma once

#include "srr/error.hpp"
#include "srr/ranker.hpp"
#include "srr/synth.hpp"
#include "srr/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace srr {

// Process exit codes. Anything not listed maps to BadData.
enum class ExitCode : int { Ok = 0, Usage = 1, BadData = 2, Diverged = 3, Io = 4 };

ExitCode exit_code_for(ErrorCode code);

// Document layout:
//   { "data": path, "out": path,
//     "ranker": { RankerConfig fields },
//     "train":  { TrainConfig fields } }
// Every key is optional. Unknown keys and wrongly typed values raise
// ConfigError naming the key.
struct RunConfig {
  RankerConfig ranker;
  TrainConfig train;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> out;
  // input_dim is taken from the dataset unless the document sets it.
  bool input_dim_given = false;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
// Effective config with every default spelled out.
nlohmann::ordered_json to_json(const RunConfig& config);

SyntheticSpec parse_synthetic_spec(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const SyntheticSpec& spec);

// 16 hex digits of FNV-1a over the bytes.
std::string content_id(std::string_view bytes);

// Runs one invocation; args excludes the program name. Logging verbosity
// comes from SRR_LOG (trace, debug, info, warn, error, off; default warn).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srr
