// mtc command line front end; uses only the C API of libmtc.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "mtc.h"

namespace {

struct CommonArgs {
    std::string mode = "multi";
    bool debug_exceptions = false;
    long limit = 0;
    std::string renaming;
    std::string out_dir;
};

void add_common(CLI::App *cmd, CommonArgs &args) {
    cmd->add_option("--mode", args.mode, "Execution mode: multi or io")
        ->check(CLI::IsMember({"multi", "io"}))
        ->capture_default_str();
    cmd->add_flag("--debug-exceptions", args.debug_exceptions,
                  "Do not catch exceptions; abort with the exception term");
    cmd->add_option("--limit", args.limit, "Default solution limit for test cases");
    cmd->add_option("--renaming", args.renaming, "Renaming information file");
    cmd->add_option("--out", args.out_dir, "Output directory");
}

mtc_options make_options(const CommonArgs &args, const std::string &meta,
                         const std::string &labelled) {
    mtc_options opts;
    mtc_options_init(&opts);
    opts.exec_mode = args.mode == "io" ? MTC_EXEC_IO : MTC_EXEC_MULTI;
    opts.debug_exceptions = args.debug_exceptions ? 1 : 0;
    opts.default_limit = args.limit;
    if (!args.renaming.empty()) opts.renaming_path = args.renaming.c_str();
    if (!args.out_dir.empty()) opts.output_dir = args.out_dir.c_str();
    if (!meta.empty()) opts.meta_path = meta.c_str();
    if (!labelled.empty()) opts.labelled_path = labelled.c_str();
    return opts;
}

int emit(mtc_context *ctx, mtc_status status, char *report) {
    if (report) {
        std::fputs(report, stdout);
        mtc_string_free(report);
    }
    const char *err = mtc_context_error(ctx);
    if (err && *err) std::fputs(err, stderr);
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"mtc - test runner and coverage tool for a small logic language"};
    app.require_subcommand(1);

    CommonArgs test_args, inst_args, cover_args;
    std::string program, suite, meta, labelled;

    CLI::App *test = app.add_subcommand("test", "Run a test suite against a program");
    test->add_option("program", program, "Program file")->required();
    test->add_option("suite", suite, "Test suite file")->required();
    add_common(test, test_args);

    CLI::App *inst = app.add_subcommand("instrument", "Instrument a program for coverage");
    inst->add_option("program", program, "Program file")->required();
    add_common(inst, inst_args);

    CLI::App *cover =
        app.add_subcommand("cover", "Run a suite against an instrumented program");
    cover->add_option("program", program, "Instrumented program file (.inst)")->required();
    cover->add_option("suite", suite, "Test suite file")->required();
    cover->add_option("--meta", meta, "Counter meta file (default: <program>.meta)");
    cover->add_option("--labelled", labelled,
                      "Labelled source file (default: <program>.labelled)");
    add_common(cover, cover_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(MTC_USAGE_ERROR);
    }

    mtc_context *ctx = mtc_context_new();
    int rc = static_cast<int>(MTC_INTERNAL_ERROR);
    char *report = nullptr;
    if (test->parsed()) {
        mtc_options opts = make_options(test_args, "", "");
        mtc_status st = mtc_cmd_test(ctx, program.c_str(), suite.c_str(), &opts, &report);
        rc = emit(ctx, st, report);
    } else if (inst->parsed()) {
        mtc_options opts = make_options(inst_args, "", "");
        mtc_status st = mtc_cmd_instrument(ctx, program.c_str(), &opts, &report);
        rc = emit(ctx, st, report);
    } else if (cover->parsed()) {
        mtc_options opts = make_options(cover_args, meta, labelled);
        mtc_status st = mtc_cmd_cover(ctx, program.c_str(), suite.c_str(), &opts, &report);
        rc = emit(ctx, st, report);
    }
    mtc_context_free(ctx);
    return rc;
}
