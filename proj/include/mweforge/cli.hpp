#ifndef MWEFORGE_CLI_HPP
#define MWEFORGE_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

#include "mweforge/training.hpp"

namespace mweforge {

enum ExitCode { kExitOk = 0, kExitRuntime = 1, kExitFormat = 2 };

/// The five training variants.
const std::vector<std::string>& method_names();

/// Sets li_enabled / adv_enabled for a method name; throws std::invalid_argument for unknown names.
void apply_method(const std::string& method, TrainConfig& config);

/// Runs one `mweforge` invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mweforge

#endif  // MWEFORGE_CLI_HPP
