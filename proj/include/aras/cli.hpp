#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aras
{

/// Environment variable naming the default accelerator config file.
inline constexpr const char* config_env_var = "ARAS_CONFIG";

/// Entry point of the `aras` tool; args excludes the program name.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aras
