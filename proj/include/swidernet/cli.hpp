#pragma once

namespace swidernet {

// Entry point behind the command-line binary; exposed so tests can drive the
// verbs in-process. Returns the process exit code: 0 success, 1 usage error,
// 2 data error.
int run_cli(int argc, const char* const* argv);

}  // namespace swidernet
