#pragma once

#include <string>

#include "fmdd/config.hpp"

namespace fmdd {

struct RunResult {
  int exit_code = 0;
  std::string manifest_path;
};

/// Executes a validated RunConfig and writes its artifacts (CSV tables,
/// manifest.json, optional VTK exports) into config.output_dir.
RunResult run(const RunConfig& config);

}  // namespace fmdd
