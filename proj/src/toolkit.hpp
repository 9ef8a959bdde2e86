#ifndef MTC_TOOLKIT_HPP
#define MTC_TOOLKIT_HPP

#include <string>

#include "testkit.hpp"

namespace mtc {

// Process-level exit statuses shared by the C API and the CLI.
enum class ToolStatus {
    Ok = 0,
    TestFailures = 1,
    UsageError = 2,    // bad invocation, parse or mode errors
    InternalError = 3  // uncaught exceptions, inconsistent inputs
};

struct RunConfig {
    std::string program_path;
    std::string suite_path;
    ExecMode exec_mode = ExecMode::Multi;
    ExceptionPolicy policy = ExceptionPolicy::CatchAll;
    std::string renaming_path;  // empty: none
    std::string output_dir = ".";
    std::optional<size_t> default_limit;
    std::string meta_path;      // empty: derived from program_path
    std::string labelled_path;  // empty: derived from program_path
};

struct CommandResult {
    ToolStatus status = ToolStatus::Ok;
    std::string output;  // report text for stdout
    std::string error;   // diagnostics for stderr
};

// parse -> analyze -> (rename) -> run -> report
CommandResult cmd_test(const RunConfig &config);

// parse -> analyze -> instrument; writes <stem>.inst/.rename/.meta/.labelled
CommandResult cmd_instrument(const RunConfig &config);

// run suite against an instrumented program, collect and replay the log,
// write <stem>.log, coverage.html and coverage.txt
CommandResult cmd_cover(const RunConfig &config);

}  // namespace mtc

#endif
