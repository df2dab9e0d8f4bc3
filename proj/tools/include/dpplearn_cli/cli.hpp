#ifndef DPPLEARN_CLI_CLI_HPP
#define DPPLEARN_CLI_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dpplearn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUnresolved = 4;

inline constexpr int kSchemaVersion = 1;

/// Version string captured at configure time (git describe when available).
std::string version();

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns one of the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpplearn::cli

#endif
