#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include "rlbd/cli/config.hpp"

namespace rlbd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitArtifact = 3;
inline constexpr int kExitVerification = 4;

// Each command validates its whole configuration before producing any file,
// then writes its outputs and manifest under output_dir. They throw on
// errors; exit_code_for maps exceptions to process exit codes.
int run_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_inject(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream& err);
int run_eval(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream& err);
int run_bound_check(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_ablate(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream& err);

int exit_code_for(const std::exception& e);

// Full command line without the program name, e.g. {"train", "--config", "run.cfg"}.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace rlbd::cli
