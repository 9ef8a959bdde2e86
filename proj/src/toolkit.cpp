#include "toolkit.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "parser.hpp"

namespace fs = std::filesystem;

namespace mtc {

namespace {

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CompileError(Diagnostic{"cannot read " + path, {}});
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CompileError(Diagnostic{"cannot write " + path, {}});
    out << content;
}

std::string stem_of(const std::string &path) {
    return fs::path(path).stem().string();
}

std::string derive_sibling(const std::string &program_path, const char *ext) {
    fs::path p(program_path);
    p.replace_extension(ext);
    return p.string();
}

struct AnalyzedSetup {
    AnalyzedProgram analyzed;
    ProcTable procs;
    std::vector<TypeDef> type_defs;
    RenamingTable effective_table;
};

// parse + normalize + split; merges the renaming file (when given) with the
// program's own renaming so suites written against original names resolve.
AnalyzedSetup analyze_program(const std::string &program_text, const std::string &renaming_path) {
    AnalyzedSetup s;
    Program parsed = parse_program(program_text);
    Program shf = to_superhomogeneous(parsed);
    s.analyzed = reorder_and_split(shf);
    s.procs = s.analyzed.proc_table();
    s.type_defs = s.analyzed.type_defs;
    if (!renaming_path.empty())
        s.effective_table = renaming_table_from_text(read_file(renaming_path));
    for (const auto &e : s.analyzed.renaming.entries)
        if (!s.effective_table.find(e.orig_name, e.arity, e.mode_index))
            s.effective_table.entries.push_back(e);
    return s;
}

CommandResult run_guarded(const std::function<CommandResult()> &body) {
    try {
        return body();
    } catch (const CompileError &e) {
        return {ToolStatus::UsageError, "", std::string(e.what()) + "\n"};
    } catch (const EngineError &e) {
        return {ToolStatus::InternalError, "",
                "uncaught exception: " + term_to_text(e.payload) + "\n"};
    } catch (const InternalError &e) {
        return {ToolStatus::InternalError, "", std::string("internal error: ") + e.what() + "\n"};
    }
}

}  // namespace

CommandResult cmd_test(const RunConfig &config) {
    return run_guarded([&]() -> CommandResult {
        AnalyzedSetup s = analyze_program(read_file(config.program_path), config.renaming_path);
        auto diags = check_determinism(s.analyzed.procedures);
        if (!diags.empty()) {
            std::string msg;
            for (const auto &d : diags) msg += d.render() + "\n";
            return {ToolStatus::UsageError, "", msg};
        }
        std::vector<TestCase> cases = parse_testsuite(read_file(config.suite_path));
        cases = apply_renaming(cases, s.effective_table, s.procs);
        EvalContext ctx;
        ctx.procs = &s.procs;
        ctx.mode = config.exec_mode;
        ctx.policy = config.policy;
        ctx.default_limit = config.default_limit;
        ctx.print_out = nullptr;  // filled by the CLI layer via report text
        ctx.type_defs = &s.type_defs;

        std::ostringstream prints;
        ctx.print_out = &prints;
        std::vector<TestOutcome> outcomes = run_suite(cases, ctx);
        CommandResult r;
        r.output = prints.str() + render_text_report(outcomes);
        r.status = all_passed(outcomes) ? ToolStatus::Ok : ToolStatus::TestFailures;
        return r;
    });
}

CommandResult cmd_instrument(const RunConfig &config) {
    return run_guarded([&]() -> CommandResult {
        Program parsed = parse_program(read_file(config.program_path));
        if (program_is_instrumented(parsed))
            return {ToolStatus::UsageError, "",
                    config.program_path + ": program is already instrumented\n"};
        Program shf = to_superhomogeneous(parsed);
        AnalyzedProgram analyzed = reorder_and_split(shf);
        auto diags = check_determinism(analyzed.procedures);
        if (!diags.empty()) {
            std::string msg;
            for (const auto &d : diags) msg += d.render() + "\n";
            return {ToolStatus::UsageError, "", msg};
        }
        InstrumentedProgram inst = instrument(analyzed);

        fs::create_directories(config.output_dir);
        std::string stem = stem_of(config.program_path);
        fs::path dir(config.output_dir);
        std::string inst_path = (dir / (stem + ".inst")).string();
        std::string rename_path = (dir / (stem + ".rename")).string();
        std::string meta_path = (dir / (stem + ".meta")).string();
        std::string labelled_path = (dir / (stem + ".labelled")).string();
        write_file(inst_path, inst.text);
        write_file(rename_path, renaming_table_to_text(analyzed.renaming));
        write_file(meta_path, counter_meta_to_text(inst.meta));
        write_file(labelled_path, inst.listing);

        CommandResult r;
        r.output = inst_path + "\n" + rename_path + "\n" + meta_path + "\n" + labelled_path +
                   "\n";
        return r;
    });
}

CommandResult cmd_cover(const RunConfig &config) {
    return run_guarded([&]() -> CommandResult {
        std::string program_text = read_file(config.program_path);
        {
            Program parsed = parse_program(program_text);
            if (!program_is_instrumented(parsed))
                return {ToolStatus::UsageError, "",
                        config.program_path + ": program is not instrumented (run the "
                        "instrument command first)\n"};
        }
        AnalyzedSetup s = analyze_program(program_text, config.renaming_path);

        std::string meta_path = !config.meta_path.empty()
                                    ? config.meta_path
                                    : derive_sibling(config.program_path, ".meta");
        std::string labelled_path = !config.labelled_path.empty()
                                        ? config.labelled_path
                                        : derive_sibling(config.program_path, ".labelled");
        CounterMeta meta = counter_meta_from_text(read_file(meta_path));
        std::string labelled_text = read_file(labelled_path);

        std::vector<TestCase> cases = parse_testsuite(read_file(config.suite_path));
        cases = apply_renaming(cases, s.effective_table, s.procs);

        CoverageLog log;
        std::ostringstream prints;
        EvalContext ctx;
        ctx.procs = &s.procs;
        ctx.mode = config.exec_mode;
        ctx.policy = config.policy;
        ctx.default_limit = config.default_limit;
        ctx.coverage = &log;
        ctx.print_out = &prints;
        ctx.type_defs = &s.type_defs;
        std::vector<TestOutcome> outcomes = run_suite(cases, ctx);

        fs::create_directories(config.output_dir);
        fs::path dir(config.output_dir);
        std::string stem = stem_of(config.program_path);
        std::string log_path = (dir / (stem + ".log")).string();
        write_file(log_path, log_events_to_text(log.events()));

        // replay from the file contents so the on-disk format is what counts
        std::vector<LogEvent> events = log_events_from_text(read_file(log_path));
        std::map<LabelId, long long> counts;
        try {
            counts = replay_log(events, meta);
        } catch (const CompileError &e) {
            return {ToolStatus::InternalError, "", std::string(e.what()) + "\n"};
        }
        CoverageReport report = classify(counts, meta);

        std::string html_path = (dir / "coverage.html").string();
        std::string detail_path = (dir / "coverage.txt").string();
        write_file(html_path, emit_html(report, labelled_text));
        write_file(detail_path, emit_detail_report(report));

        CommandResult r;
        r.output = prints.str() + render_text_report(outcomes) + log_path + "\n" + html_path +
                   "\n" + detail_path + "\n";
        r.status = all_passed(outcomes) ? ToolStatus::Ok : ToolStatus::TestFailures;
        return r;
    });
}

}  // namespace mtc
