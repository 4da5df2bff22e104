#pragma once

#include <string>
#include <vector>

namespace lth {

// Exit codes: 0 success, 1 user error, 2 numeric failure, 3 missing
// prerequisite artifact.
int dispatch(std::vector<std::string> args);

}  // namespace lth
