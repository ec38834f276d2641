#ifndef HARDMETRIC_MANIFEST_HPP_
#define HARDMETRIC_MANIFEST_HPP_

#include <string>
#include <vector>

namespace hm {

/// Provenance record written by every CLI command: the effective config,
/// input digests, every produced file, wall-clock time and the source
/// revision.
struct RunManifest {
  std::string command;
  std::string config_json;  // effective configuration, JSON text ("" if none)
  std::string dataset_path;
  std::string dataset_digest;
  std::vector<std::string> artifacts;
  double wall_clock_seconds = 0.0;
  std::string git_describe;

  void write(const std::string& path) const;
};

/// `git describe --always --dirty`, or "unknown" outside a repository.
std::string git_describe_string();

}  // namespace hm

#endif  // HARDMETRIC_MANIFEST_HPP_
