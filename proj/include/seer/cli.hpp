#pragma once

namespace seer::cli {

// Entry point shared by the seer binary and tests. Exit codes: 0 ok,
// 2 usage/config, 3 data/format, 4 runtime.
int run(int argc, const char* const* argv);

}  // namespace seer::cli
