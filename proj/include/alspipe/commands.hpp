#pragma once

#include "alspipe/config.hpp"

#include <iosfwd>

namespace alspipe::commands {

// Exit codes: 0 success, 1 total failure, 2 partial failure. Each command
// writes a run_log.jsonl next to its outputs and a human summary to `out`.
int run_plan(const config::PipelineConfig& cfg, std::ostream& out);
int run_fetch(const config::PipelineConfig& cfg, std::ostream& out);
int run_stats(const config::PipelineConfig& cfg, std::ostream& out);
int run_prep(const config::PipelineConfig& cfg, std::ostream& out);
int run_tile(const config::PipelineConfig& cfg, std::ostream& out);
int run_eval(const config::PipelineConfig& cfg, std::ostream& out);

}  // namespace alspipe::commands
