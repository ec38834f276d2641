#include "hardmetric/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "hardmetric/errors.hpp"

namespace hm {

void RunManifest::write(const std::string& path) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  if (!config_json.empty()) {
    j["config"] = nlohmann::json::parse(config_json);
  } else {
    j["config"] = nullptr;
  }
  if (!dataset_path.empty())
    j["inputs"] = {{"dataset", {{"path", dataset_path}, {"digest", dataset_digest}}}};
  j["artifacts"] = artifacts;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["git_describe"] = git_describe;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::string git_describe_string() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[256];
  std::string out;
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

}  // namespace hm
