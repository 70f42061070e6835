#include "srr/cli.hpp"

#include "srr/binary_io.hpp"

#include <fmt/format.h>

#include <cstdint>
#include <limits>
#include <set>

namespace srr {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

const json& object_at(const json& doc, const std::string& where) {
  if (!doc.is_object()) config_fail(where + " must be an object");
  return doc;
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) config_fail("unknown key '" + where + key + "'");
  }
}

template <class U>
void read_uint(const json& obj, const char* key, U& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() > std::numeric_limits<U>::max()) {
    config_fail("'" + where + key + "' must be a non-negative integer");
  }
  dst = static_cast<U>(v.get<std::uint64_t>());
}

void read_real(const json& obj, const char* key, double& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) config_fail("'" + where + key + "' must be a number");
  dst = v.get<double>();
}

void read_path(const json& obj, const char* key, std::optional<std::filesystem::path>& dst) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_string()) config_fail(std::string("'") + key + "' must be a string");
  dst = v.get<std::string>();
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig out;
  object_at(doc, "config");
  reject_unknown(doc, {"data", "out", "ranker", "train"}, "");
  read_path(doc, "data", out.data);
  read_path(doc, "out", out.out);

  if (doc.contains("ranker")) {
    const json& r = object_at(doc.at("ranker"), "'ranker'");
    const std::string w = "ranker.";
    reject_unknown(r,
                   {"input_dim", "proj_dim", "num_heads", "ffn_dim", "max_list_size", "dropout", "temperature",
                    "layer_fraction"},
                   w);
    out.input_dim_given = r.contains("input_dim");
    read_uint(r, "input_dim", out.ranker.input_dim, w);
    read_uint(r, "proj_dim", out.ranker.proj_dim, w);
    read_uint(r, "num_heads", out.ranker.num_heads, w);
    read_uint(r, "ffn_dim", out.ranker.ffn_dim, w);
    read_uint(r, "max_list_size", out.ranker.max_list_size, w);
    read_real(r, "dropout", out.ranker.dropout, w);
    read_real(r, "temperature", out.ranker.temperature, w);
    read_real(r, "layer_fraction", out.ranker.layer_fraction, w);
  }
  if (doc.contains("train")) {
    const json& t = object_at(doc.at("train"), "'train'");
    const std::string w = "train.";
    reject_unknown(t, {"learning_rate", "weight_decay", "momentum", "epochs", "seed"}, w);
    read_real(t, "learning_rate", out.train.learning_rate, w);
    read_real(t, "weight_decay", out.train.weight_decay, w);
    read_real(t, "momentum", out.train.momentum, w);
    read_uint(t, "epochs", out.train.epochs, w);
    read_uint(t, "seed", out.train.seed, w);
  }
  out.train.validate();
  return out;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    config_fail("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  if (config.data) j["data"] = config.data->string();
  if (config.out) j["out"] = config.out->string();
  const RankerConfig& r = config.ranker;
  j["ranker"] = {{"input_dim", r.input_dim},         {"proj_dim", r.proj_dim},
                 {"num_heads", r.num_heads},         {"ffn_dim", r.ffn_dim},
                 {"max_list_size", r.max_list_size}, {"dropout", r.dropout},
                 {"temperature", r.temperature},     {"layer_fraction", r.layer_fraction}};
  const TrainConfig& t = config.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"weight_decay", t.weight_decay},
                {"momentum", t.momentum},
                {"epochs", t.epochs},
                {"seed", t.seed}};
  return j;
}

SyntheticSpec parse_synthetic_spec(const json& doc) {
  SyntheticSpec out;
  object_at(doc, "spec");
  reject_unknown(doc,
                 {"dim", "num_lists", "list_size", "safe_per_list", "separation", "noise", "instruction_coupling",
                  "seed", "direction_seed"},
                 "");
  read_uint(doc, "dim", out.dim, "");
  read_uint(doc, "num_lists", out.num_lists, "");
  read_uint(doc, "list_size", out.list_size, "");
  read_uint(doc, "safe_per_list", out.safe_per_list, "");
  read_real(doc, "separation", out.separation, "");
  read_real(doc, "noise", out.noise, "");
  read_real(doc, "instruction_coupling", out.instruction_coupling, "");
  read_uint(doc, "seed", out.seed, "");
  if (doc.contains("direction_seed")) {
    std::uint64_t s = 0;
    read_uint(doc, "direction_seed", s, "");
    out.direction_seed = s;
  }
  out.validate();
  return out;
}

nlohmann::ordered_json to_json(const SyntheticSpec& spec) {
  nlohmann::ordered_json j = {{"dim", spec.dim},
                              {"num_lists", spec.num_lists},
                              {"list_size", spec.list_size},
                              {"safe_per_list", spec.safe_per_list},
                              {"separation", spec.separation},
                              {"noise", spec.noise},
                              {"instruction_coupling", spec.instruction_coupling},
                              {"seed", spec.seed}};
  if (spec.direction_seed) j["direction_seed"] = *spec.direction_seed;
  return j;
}

std::string content_id(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace srr
