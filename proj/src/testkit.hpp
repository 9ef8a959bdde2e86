#ifndef MTC_TESTKIT_HPP
#define MTC_TESTKIT_HPP

#include "engine.hpp"

namespace mtc {

enum class AssertionKind {
    ExpectSucceed,
    ExpectFail,
    ExpectException,
    True,      // condition on the first solution
    SomeTrue,  // holds for at least one solution
    AllTrue,   // holds for all solutions
    TrueNth,   // holds for the Nth solution
    SolutionsCardinality,
    TypeDecl,
    Limit,
};

struct Assertion {
    AssertionKind kind = AssertionKind::True;
    Goal cond;              // True/SomeTrue/AllTrue/TrueNth
    long long n = 0;        // TrueNth index or Limit count
    Term card;              // SolutionsCardinality argument (variable or integer)
    std::string type_var;   // TypeDecl
    TypeExpr type_expr;
    std::string text;       // source form, used in failure details
    SourceSpan span;
};

struct TestCase {
    std::string name;
    std::vector<Goal> code;
    std::vector<Assertion> assertions;
    SourceSpan span;
};

// Parses test(Name, [Goal,...], [Assertion,...]). terms.
std::vector<TestCase> parse_testsuite(std::string_view text);

enum class TestStatus {
    Succeeded,
    ConditionFailed,
    FailedFailure,
    FailedException,
    FailedUnexpectedSuccess,
};

struct TestOutcome {
    std::string name;
    TestStatus status = TestStatus::Succeeded;
    std::string detail;  // text after "name: " in the report

    std::string line() const { return name + ": " + detail; }
};

enum class ExecMode { Multi, Io };

// Rewrites calls whose (name, arity, inferred mode) appear in the table to
// the renamed procedure; unmatched calls are left unchanged. Mode inference
// follows the instantiation of variables through the code, using the same
// selection rule as the mode analysis. `procs` supplies the argument modes
// of the renamed procedures.
std::vector<TestCase> apply_renaming(const std::vector<TestCase> &cases,
                                     const RenamingTable &table, const ProcTable &procs);

struct EvalContext {
    const ProcTable *procs = nullptr;
    ExecMode mode = ExecMode::Multi;
    ExceptionPolicy policy = ExceptionPolicy::CatchAll;
    std::optional<size_t> default_limit;
    CoverageLog *coverage = nullptr;
    std::ostream *print_out = nullptr;
    const std::vector<TypeDef> *type_defs = nullptr;  // for type assertions
};

// Runs one test case through the engine and applies the assertion algebra.
// Suite-level problems (mode errors, print/1 under multi mode, non-det code
// under io mode) throw CompileError.
TestOutcome evaluate_testcase(const TestCase &c, const EvalContext &ctx);

// Validates every case first, then evaluates them in order.
std::vector<TestOutcome> run_suite(const std::vector<TestCase> &cases, const EvalContext &ctx);

// One line per test case plus a trailing "passed/total" summary.
std::string render_text_report(const std::vector<TestOutcome> &outcomes);
bool all_passed(const std::vector<TestOutcome> &outcomes);

}  // namespace mtc

#endif
