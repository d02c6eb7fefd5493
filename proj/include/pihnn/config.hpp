#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "pihnn/loss.hpp"
#include "pihnn/problem.hpp"

namespace pihnn {

/// Schema or parse error in a configuration or checkpoint file. Messages carry
/// the JSON pointer of the offending value, or the line and column for syntax
/// errors.
class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

ProblemSpec problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemSpec& spec);

/// Reads, validates and returns a problem file.
ProblemSpec load_config(const std::filesystem::path& path);
std::string write_config(const ProblemSpec& spec);

nlohmann::json checkpoint_to_json(const Networks& nets, const std::string& problem_name);
Networks checkpoint_from_json(const nlohmann::json& j);
Networks load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError when the networks do not fit the problem's subdomain
/// count, widths, activation or mode.
void check_architecture(const Networks& nets, const ProblemSpec& problem);

/// Writes through a temporary file in the same directory and renames it into
/// place. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace pihnn
