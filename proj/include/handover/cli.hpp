#pragma once

#include <iosfwd>

namespace handover::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kEpisodeFailure = 3 };

/// Entry point of the `handover` tool (gen-data, train, simulate, compare).
/// Console output goes to `out`/`err`; files go under the output directory
/// (--out, else $HANDOVER_OUT_DIR, else ./out).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace handover::cli
