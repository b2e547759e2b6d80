#pragma once

#include <iosfwd>

namespace xmusim::cli {

/// Entry point of the xmusim command. Returns the process exit code: 0 on success,
/// 1 usage, 2 data, 3 numeric failure, 4 external service failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xmusim::cli
