#pragma once

#include <string>
#include <vector>

namespace steadytube::cli {

// Exit codes: 0 success, 2 validation error, 3 numerical failure (diagnostic.json written).
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace steadytube::cli
