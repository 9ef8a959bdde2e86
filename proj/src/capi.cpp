#include "mtc.h"

#include <cstdlib>
#include <cstring>

#include "toolkit.hpp"

struct mtc_context {
    std::string last_error;
};

namespace {

constexpr const char *kVersion = "0.1.0";

char *dup_string(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

mtc::RunConfig make_config(const char *program_path, const char *suite_path,
                           const mtc_options *opts) {
    mtc::RunConfig config;
    if (program_path) config.program_path = program_path;
    if (suite_path) config.suite_path = suite_path;
    if (opts) {
        config.exec_mode =
            opts->exec_mode == MTC_EXEC_IO ? mtc::ExecMode::Io : mtc::ExecMode::Multi;
        config.policy = opts->debug_exceptions ? mtc::ExceptionPolicy::Propagate
                                               : mtc::ExceptionPolicy::CatchAll;
        if (opts->default_limit > 0)
            config.default_limit = static_cast<size_t>(opts->default_limit);
        if (opts->renaming_path) config.renaming_path = opts->renaming_path;
        if (opts->output_dir) config.output_dir = opts->output_dir;
        if (opts->meta_path) config.meta_path = opts->meta_path;
        if (opts->labelled_path) config.labelled_path = opts->labelled_path;
    }
    return config;
}

mtc_status finish(mtc_context *ctx, const mtc::CommandResult &r, char **text_out) {
    if (ctx) ctx->last_error = r.error;
    if (text_out) *text_out = dup_string(r.output);
    return static_cast<mtc_status>(r.status);
}

}  // namespace

extern "C" {

const char *mtc_version(void) { return kVersion; }

mtc_context *mtc_context_new(void) { return new (std::nothrow) mtc_context(); }

void mtc_context_free(mtc_context *ctx) { delete ctx; }

const char *mtc_context_error(const mtc_context *ctx) {
    return ctx ? ctx->last_error.c_str() : "";
}

void mtc_options_init(mtc_options *opts) {
    if (!opts) return;
    opts->exec_mode = MTC_EXEC_MULTI;
    opts->debug_exceptions = 0;
    opts->default_limit = 0;
    opts->renaming_path = nullptr;
    opts->output_dir = nullptr;
    opts->meta_path = nullptr;
    opts->labelled_path = nullptr;
}

mtc_status mtc_cmd_test(mtc_context *ctx, const char *program_path, const char *suite_path,
                        const mtc_options *opts, char **report_out) {
    if (!program_path || !suite_path) {
        if (ctx) ctx->last_error = "program and suite paths are required";
        return MTC_USAGE_ERROR;
    }
    return finish(ctx, mtc::cmd_test(make_config(program_path, suite_path, opts)), report_out);
}

mtc_status mtc_cmd_instrument(mtc_context *ctx, const char *program_path,
                              const mtc_options *opts, char **summary_out) {
    if (!program_path) {
        if (ctx) ctx->last_error = "program path is required";
        return MTC_USAGE_ERROR;
    }
    return finish(ctx, mtc::cmd_instrument(make_config(program_path, nullptr, opts)),
                  summary_out);
}

mtc_status mtc_cmd_cover(mtc_context *ctx, const char *inst_path, const char *suite_path,
                         const mtc_options *opts, char **report_out) {
    if (!inst_path || !suite_path) {
        if (ctx) ctx->last_error = "program and suite paths are required";
        return MTC_USAGE_ERROR;
    }
    return finish(ctx, mtc::cmd_cover(make_config(inst_path, suite_path, opts)), report_out);
}

void mtc_string_free(char *s) { std::free(s); }

}  // extern "C"
