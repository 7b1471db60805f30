#pragma once

// Subcommands: synth-data, train, generate, separate, evaluate.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dpss::cli {

struct CommonOptions {
  std::filesystem::path config;
  std::uint64_t seed = 0;
  int precision = 64;
  std::filesystem::path output = ".";
};

void cmd_synth_data(const CommonOptions& o);
void cmd_train(const CommonOptions& o);
void cmd_generate(const CommonOptions& o);
void cmd_separate(const CommonOptions& o);
void cmd_evaluate(const CommonOptions& o);

// Full entry point: parses argv, runs the command, and on failure writes a
// single JSON object {"error": {...}} to stderr. Returns the exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run(int argc, char** argv);

}  // namespace dpss::cli
