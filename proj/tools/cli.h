#pragma once

// The zerosweep command line, callable in-process for tests.
//
//   train       one self-play run
//   sweep       a plan of runs (table1, correlation, loss_targets or a JSON file)
//   arena       n games between two checkpoints (or "random")
//   tournament  round robin over checkpoints, MLE Elo
//   report      plot-ready CSV tables from runs and sweeps
//
// Exit status: 0 success, 2 bad input or configuration, 130 interrupted,
// 1 anything else. Output roots default to $ZEROSWEEP_OUTPUT.

#include <atomic>
#include <iosfwd>

namespace zs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInterrupted = 130;

inline constexpr const char* kOutputEnv = "ZEROSWEEP_OUTPUT";

// `stop` is polled by long-running commands; SIGINT handlers raise it.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* stop = nullptr);

}  // namespace zs::cli
