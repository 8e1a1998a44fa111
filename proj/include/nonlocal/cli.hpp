#pragma once

namespace nonlocal {

// Entry point behind the `nonlocal` binary.
//
//   nonlocal run <config.json> [--out DIR] [--threads N] [--emit-curves]
//                [--s LIST] [--delta LIST] [--h H]
//   nonlocal verify
//   nonlocal info [--s LIST]
//
// `run` exit codes: 0 success, 2 config error, 3 numerical failure (the
// message names the offending (s, delta) cell). `verify` returns 1 when any
// check of the invariant battery fails. Exposed as a function so tests can
// drive the full command path in-process.
int cli_main(int argc, const char* const* argv);

struct VerifyOptions {
    // Test hook: multiplies the measured kernel moment before the
    // normalization check, so a value != 1 must turn that check red.
    double scaling_corruption = 1.0;
};

// The fast invariant battery behind `nonlocal verify`: prints one row per
// check (name, metric, tolerance, verdict) and returns 0 only if all pass.
int run_verify_battery(const VerifyOptions& opts = {});

}  // namespace nonlocal
