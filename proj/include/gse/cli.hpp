#pragma once

namespace gse {

/// Entry point of the `gse` command-line tool. Returns the process exit status:
/// 0 on success, 1 on runtime errors, 2 on usage errors.
int run_cli(int argc, const char* const* argv);

}  // namespace gse
