/* mtc - test automation and coverage toolkit for a small Mercury-style
 * logic language. C API of the shared library; see README.md for the file
 * formats and the CLI built on top of it. */
#ifndef MTC_H
#define MTC_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mtc_context mtc_context;

typedef enum mtc_status {
    MTC_OK = 0,
    MTC_TEST_FAILURES = 1,
    MTC_USAGE_ERROR = 2, /* bad invocation, parse or mode errors */
    MTC_INTERNAL_ERROR = 3
} mtc_status;

typedef enum mtc_exec_mode { MTC_EXEC_MULTI = 0, MTC_EXEC_IO = 1 } mtc_exec_mode;

typedef struct mtc_options {
    mtc_exec_mode exec_mode;
    int debug_exceptions;      /* nonzero: exceptions are not caught; the run
                                  aborts with the exception term reported */
    long default_limit;        /* <= 0: no default solution limit */
    const char *renaming_path; /* NULL: none */
    const char *output_dir;    /* NULL: current directory */
    const char *meta_path;     /* NULL: derived from the program path */
    const char *labelled_path; /* NULL: derived from the program path */
} mtc_options;

const char *mtc_version(void);

mtc_context *mtc_context_new(void);
void mtc_context_free(mtc_context *ctx);

/* Diagnostics of the last failed command on this context ("" when none). */
const char *mtc_context_error(const mtc_context *ctx);

/* Fills an options struct with defaults. */
void mtc_options_init(mtc_options *opts);

/* Runs a test suite against a program. On MTC_OK or MTC_TEST_FAILURES,
 * *report_out (may be NULL) receives the text report; free it with
 * mtc_string_free. */
mtc_status mtc_cmd_test(mtc_context *ctx, const char *program_path,
                        const char *suite_path, const mtc_options *opts,
                        char **report_out);

/* Instruments a program for coverage: writes <stem>.inst, <stem>.rename,
 * <stem>.meta and <stem>.labelled into the output directory. *summary_out
 * (may be NULL) lists the files written, one per line. */
mtc_status mtc_cmd_instrument(mtc_context *ctx, const char *program_path,
                              const mtc_options *opts, char **summary_out);

/* Runs a suite against an instrumented program, collects the label log and
 * writes <stem>.log, coverage.html and coverage.txt into the output
 * directory. */
mtc_status mtc_cmd_cover(mtc_context *ctx, const char *inst_path,
                         const char *suite_path, const mtc_options *opts,
                         char **report_out);

void mtc_string_free(char *s);

#ifdef __cplusplus
}
#endif

#endif /* MTC_H */
