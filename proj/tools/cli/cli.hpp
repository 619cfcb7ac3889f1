#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lol::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;

// Runs one `lol` invocation. `args[0]` is the program name. Normal output
// goes to `out`; diagnostics and the one-line `error[<category>]: ...`
// failure message go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lol::cli
