#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace hrv::cli {

inline constexpr const char* kConfigEnv = "HRV_CONFIG";

// Built-in defaults for every configurable value, nested by module.
nlohmann::json default_config();

// Runs one command. `args` excludes the program name. Returns 0 on success,
// 1 on a stage error (a JSON error record is written to `err`), 2 on a usage
// error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hrv::cli
