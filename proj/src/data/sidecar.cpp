#include "srr/binary_io.hpp"
#include "srr/dataset.hpp"
#include "srr/error.hpp"

#include <json.hpp>

#include <sstream>

namespace srr {

void write_sidecar(std::span<const SidecarRecord> records, const std::filesystem::path& path) {
  std::string out;
  for (const SidecarRecord& r : records) {
    nlohmann::json j = {{"list_id", r.list_id}, {"instruction", r.instruction}, {"responses", r.responses}};
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<SidecarRecord> read_sidecar(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<SidecarRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SidecarRecord r;
      r.list_id = j.at("list_id").get<std::uint64_t>();
      r.instruction = j.value("instruction", std::string());
      r.responses = j.value("responses", std::vector<std::string>{});
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace srr
