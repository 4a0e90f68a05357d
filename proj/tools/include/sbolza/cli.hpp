#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sbolza::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kVerdictFail = 1;
inline constexpr int kInputError = 2;

// args excludes the program name. Reports go to `out` unless --out names a
// directory; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbolza::cli
