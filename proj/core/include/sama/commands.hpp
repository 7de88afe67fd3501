#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sama/run_config.hpp"

namespace sama {

// Command bodies shared by the CLI binary and the test suites; all paths in
// the config resolve relative to `workdir`. Errors surface as the exception
// types in errors.hpp, which the binary maps to exit codes.

// Generates the configured corpus (pairs, clips, manifest) deterministically
// and returns the manifest path. Prints one count line per kind.
std::filesystem::path cmd_synth(const RunConfig& cfg, const std::filesystem::path& workdir);

// Runs the configured stage; writes the training log and checkpoints.
// Returns the final checkpoint directory.
std::filesystem::path cmd_train(const RunConfig& cfg, const std::filesystem::path& workdir);

// Edits one clip with the given instruction; writes the output container and
// optional PPM frames. Returns the output path.
std::filesystem::path cmd_edit(const RunConfig& cfg, const std::filesystem::path& workdir,
                               const std::filesystem::path& checkpoint,
                               const std::filesystem::path& source_clip,
                               const std::string& instruction);

// Evaluates a checkpoint over a manifest: edit metrics for edit pairs,
// restoration error on tube-shuffled t2v clips. Writes JSON + CSV reports.
std::filesystem::path cmd_eval(const RunConfig& cfg, const std::filesystem::path& workdir,
                               const std::filesystem::path& checkpoint,
                               const std::filesystem::path& manifest);

// Overlays smoothed loss curves from one or more training logs into an SVG
// plus a per-run summary CSV. `column` is fm_loss, sem_loss or total.
std::filesystem::path cmd_plot(const std::vector<std::filesystem::path>& logs,
                               const std::filesystem::path& out_svg, const std::string& column,
                               const std::filesystem::path& summary_csv);

// Exit-code mapping: 0 success, 2 configuration, 3 i/o, 4 numeric/training.
int exit_code_for_current_exception();

}  // namespace sama
