#pragma once

#include <stdexcept>
#include <string>

namespace nlsid::cli {

/// Violated stage contract (bad config, missing or mismatched stage inputs).
/// Mapped to exit code 2; anything else escaping a command maps to 1.
struct ContractViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_hash(const std::string& path);

/// Entry point shared by the binary and the tests. Subcommands: excite, vdp,
/// lockin, bla, fit-linear, train, simulate, validate. Returns the process
/// exit code (0 ok, 2 contract violation, 1 internal error).
int cli_run(int argc, const char* const* argv);

}  // namespace nlsid::cli
