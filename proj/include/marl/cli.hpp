#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace marl::cli {

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kConfigFailure = 2;

// Store root: the explicit flag, else $MARL_STORE_ROOT, else "results".
std::string resolve_store_root(const std::string& flag_value);

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace marl::cli
