#include "testkit.hpp"

#include <algorithm>
#include <sstream>

#include "parser.hpp"

namespace mtc {

namespace {

[[noreturn]] void fail(const std::string &msg, SourceSpan span = {}) {
    throw CompileError(Diagnostic{msg, span});
}

void ordered_vars_term(const Term &t, std::vector<std::string> &out,
                       std::set<std::string> &seen) {
    if (t.is_var()) {
        if (seen.insert(t.name).second) out.push_back(t.name);
        return;
    }
    for (const auto &a : t.args) ordered_vars_term(a, out, seen);
}

void ordered_vars_goal(const Goal &g, std::vector<std::string> &out,
                       std::set<std::string> &seen) {
    switch (g.kind) {
        case GoalKind::Unify:
            ordered_vars_term(g.lhs, out, seen);
            ordered_vars_term(g.rhs, out, seen);
            return;
        case GoalKind::Call:
            for (const auto &a : g.args) ordered_vars_term(a, out, seen);
            return;
        default:
            for (const auto &c : g.children) ordered_vars_goal(c, out, seen);
            return;
    }
}

bool is_condition_kind(AssertionKind k) {
    return k == AssertionKind::True || k == AssertionKind::SomeTrue ||
           k == AssertionKind::AllTrue || k == AssertionKind::TrueNth;
}

bool needs_full_enumeration(AssertionKind k) {
    return k == AssertionKind::SomeTrue || k == AssertionKind::AllTrue ||
           k == AssertionKind::TrueNth || k == AssertionKind::SolutionsCardinality;
}

}  // namespace

// ---------------------------------------------------------------------------
// Suite parsing
// ---------------------------------------------------------------------------

namespace {

Assertion parse_assertion(const Term &t) {
    Assertion a;
    a.text = term_to_text(t);
    a.span = t.span;
    if (t.is_atom()) {
        if (t.name == "succeed") {
            a.kind = AssertionKind::ExpectSucceed;
            return a;
        }
        if (t.name == "fail") {
            a.kind = AssertionKind::ExpectFail;
            return a;
        }
        if (t.name == "exception") {
            a.kind = AssertionKind::ExpectException;
            return a;
        }
    }
    if (t.is_compound() && t.name == "true" && t.args.size() == 1) {
        a.kind = AssertionKind::True;
        a.cond = term_to_goal(t.args[0]);
        return a;
    }
    if (t.is_compound() && t.name == "true" && t.args.size() == 2) {
        if (!t.args[0].is_int() || t.args[0].value < 1)
            fail("true/2 expects a positive solution index", t.span);
        a.kind = AssertionKind::TrueNth;
        a.n = t.args[0].value;
        a.cond = term_to_goal(t.args[1]);
        return a;
    }
    if (t.is_compound() && t.name == "some_true" && t.args.size() == 1) {
        a.kind = AssertionKind::SomeTrue;
        a.cond = term_to_goal(t.args[0]);
        return a;
    }
    if (t.is_compound() && t.name == "all_true" && t.args.size() == 1) {
        a.kind = AssertionKind::AllTrue;
        a.cond = term_to_goal(t.args[0]);
        return a;
    }
    if (t.is_compound() && t.name == "solutions_cardinality" && t.args.size() == 1) {
        if (!t.args[0].is_var() && !t.args[0].is_int())
            fail("solutions_cardinality expects a variable or an integer", t.span);
        a.kind = AssertionKind::SolutionsCardinality;
        a.card = t.args[0];
        return a;
    }
    if (t.is_compound() && t.name == "type" && t.args.size() == 2) {
        if (!t.args[0].is_var()) fail("type/2 expects a variable", t.span);
        a.kind = AssertionKind::TypeDecl;
        a.type_var = t.args[0].name;
        a.type_expr = term_to_type_expr(t.args[1]);
        return a;
    }
    if (t.is_compound() && t.name == "limit" && t.args.size() == 1) {
        if (!t.args[0].is_int() || t.args[0].value < 1)
            fail("limit expects a positive integer", t.span);
        a.kind = AssertionKind::Limit;
        a.n = t.args[0].value;
        return a;
    }
    std::string what = t.is_compound()
                           ? t.name + "/" + std::to_string(t.args.size())
                           : term_to_text(t);
    fail("unknown assertion " + what, t.span);
}

std::vector<Term> list_elements(const Term &t, const char *what) {
    std::vector<Term> out;
    const Term *cur = &t;
    while (cur->is_cons()) {
        out.push_back(cur->args[0]);
        cur = &cur->args[1];
    }
    if (!cur->is_nil()) fail(std::string("expected a list of ") + what, t.span);
    return out;
}

}  // namespace

std::vector<TestCase> parse_testsuite(std::string_view text) {
    std::vector<TestCase> cases;
    std::set<std::string> names;
    for (const Term &t : parse_suite_terms(text)) {
        if (!t.is_compound() || t.name != "test" || t.args.size() != 3)
            fail("expected test(Name, Code, Assertions)", t.span);
        TestCase c;
        c.span = t.span;
        if (!t.args[0].is_atom()) fail("test name must be an atom", t.args[0].span);
        c.name = t.args[0].name;
        if (!names.insert(c.name).second) fail("duplicate test name " + c.name, t.span);
        for (const Term &g : list_elements(t.args[1], "goals")) c.code.push_back(term_to_goal(g));
        if (c.code.empty()) fail("empty test code in " + c.name, t.span);

        bool have_expect = false, have_limit = false;
        for (const Term &at : list_elements(t.args[2], "assertions")) {
            Assertion a = parse_assertion(at);
            if (a.kind == AssertionKind::ExpectSucceed || a.kind == AssertionKind::ExpectFail ||
                a.kind == AssertionKind::ExpectException) {
                if (have_expect)
                    fail("conflicting expected-behaviour assertions in " + c.name, at.span);
                have_expect = true;
            }
            if (a.kind == AssertionKind::Limit) {
                if (have_limit) fail("duplicate limit in " + c.name, at.span);
                have_limit = true;
            }
            c.assertions.push_back(std::move(a));
        }

        std::vector<std::string> code_vars;
        std::set<std::string> seen;
        for (const auto &g : c.code) ordered_vars_goal(g, code_vars, seen);
        for (const auto &a : c.assertions)
            if (a.kind == AssertionKind::SolutionsCardinality && a.card.is_var() &&
                seen.count(a.card.name))
                fail("solutions_cardinality variable " + a.card.name +
                         " also occurs in the test code",
                     a.span);
        cases.push_back(std::move(c));
    }
    return cases;
}

// ---------------------------------------------------------------------------
// Renaming
// ---------------------------------------------------------------------------

std::vector<TestCase> apply_renaming(const std::vector<TestCase> &cases,
                                     const RenamingTable &table, const ProcTable &procs) {
    CallResolver resolver = [&](const std::string &name,
                                int arity) -> std::optional<std::vector<ModeOption>> {
        std::vector<ModeOption> opts;
        for (const RenamingEntry *row : table.candidates(name, arity)) {
            auto it = procs.find(row->new_name);
            if (it == procs.end())
                fail("renaming entry for " + name + "/" + std::to_string(arity) +
                     " refers to unknown procedure " + row->new_name);
            opts.push_back({row->mode_index, it->second.arg_modes, it->second.determinism,
                            row->new_name});
        }
        if (!opts.empty()) return opts;
        auto it = procs.find(name);
        if (it != procs.end() && it->second.arity == arity) {
            opts.push_back({0, it->second.arg_modes, it->second.determinism, name});
            return opts;
        }
        return std::nullopt;  // unknown: left unchanged
    };

    std::vector<TestCase> out;
    for (const TestCase &c : cases) {
        TestCase renamed = c;
        GoalScheduler sched(resolver, "test " + c.name);
        sched.set_lenient(true);
        BoundSet bound;
        renamed.code = sched.reorder(c.code, bound, {});

        BoundSet cond_base;
        for (const auto &g : c.code) collect_goal_vars(g, cond_base);
        for (auto &a : renamed.assertions) {
            if (is_condition_kind(a.kind)) {
                GoalScheduler cs(resolver, "test " + c.name);
                cs.set_lenient(true);
                BoundSet b = cond_base;
                std::vector<Goal> items = a.cond.kind == GoalKind::Conjunction
                                              ? a.cond.children
                                              : std::vector<Goal>{a.cond};
                std::vector<Goal> ordered = cs.reorder(items, b, {});
                Goal conj = Goal::conj(std::move(ordered));
                conj.span = a.cond.span;
                a.cond = std::move(conj);
            }
            if (a.kind == AssertionKind::SolutionsCardinality && a.card.is_var())
                cond_base.insert(a.card.name);
        }
        out.push_back(std::move(renamed));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Type checking for type/2 assertions
// ---------------------------------------------------------------------------

namespace {

TypeExpr substitute(const TypeExpr &t, const std::map<std::string, TypeExpr> &subst) {
    if (t.is_type_var()) {
        auto it = subst.find(t.name);
        if (it != subst.end()) return it->second;
        return t;
    }
    TypeExpr out = t;
    for (auto &p : out.params) p = substitute(p, subst);
    return out;
}

// Returns an error description, or nullopt when the term conforms.
std::optional<std::string> type_check(const Term &value, const TypeExpr &texpr,
                                      const std::vector<TypeDef> &defs) {
    if (texpr.is_type_var()) return std::nullopt;
    if (texpr.name == "int" && texpr.params.empty()) {
        if (value.is_int()) return std::nullopt;
        return term_to_text(value) + " is not an int";
    }
    const TypeDef *def = nullptr;
    for (const auto &d : defs)
        if (d.name == texpr.name) def = &d;
    if (!def) return "unknown type " + texpr.name;
    if (def->params.size() != texpr.params.size())
        return "wrong number of type parameters for " + texpr.name;
    if (!value.is_compound())
        return term_to_text(value) + " is not of type " + type_expr_to_text(texpr);
    std::map<std::string, TypeExpr> subst;
    for (size_t i = 0; i < def->params.size(); ++i)
        subst.emplace(def->params[i], texpr.params[i]);
    for (const auto &ctor : def->ctors) {
        if (ctor.name != value.name || ctor.args.size() != value.args.size()) continue;
        for (size_t i = 0; i < ctor.args.size(); ++i) {
            auto sub = type_check(value.args[i], substitute(ctor.args[i], subst), defs);
            if (sub) return sub;
        }
        return std::nullopt;
    }
    return term_to_text(value) + " is not of type " + type_expr_to_text(texpr);
}

void scan_calls(const Goal &g, const std::function<void(const Goal &)> &cb) {
    if (g.kind == GoalKind::Call) {
        cb(g);
        return;
    }
    for (const auto &c : g.children) scan_calls(c, cb);
}

}  // namespace

// ---------------------------------------------------------------------------
// Test case evaluation
// ---------------------------------------------------------------------------

namespace {

struct PreparedCase {
    const TestCase *src = nullptr;
    AssertionKind expected = AssertionKind::ExpectSucceed;
    std::optional<size_t> limit;
    std::vector<std::string> out_vars;
    Goal code_goal;
    std::vector<Goal> scheduled_conds;  // aligned with src->assertions
};

// Validation and mode-correct preparation; throws CompileError on
// suite-level problems without executing anything.
PreparedCase prepare_testcase(const TestCase &c, const EvalContext &ctx) {
    const ProcTable &procs = *ctx.procs;
    PreparedCase p;
    p.src = &c;

    std::optional<size_t> explicit_limit;
    bool needs_all = false;
    for (const auto &a : c.assertions) {
        if (a.kind == AssertionKind::ExpectFail || a.kind == AssertionKind::ExpectException ||
            a.kind == AssertionKind::ExpectSucceed)
            p.expected = a.kind;
        if (a.kind == AssertionKind::Limit) explicit_limit = static_cast<size_t>(a.n);
        if (needs_full_enumeration(a.kind)) needs_all = true;
    }
    if (explicit_limit)
        p.limit = explicit_limit;
    else if (!needs_all)
        p.limit = 1;  // only the first solution matters
    else
        p.limit = ctx.default_limit;

    // output variables in declaration order
    std::set<std::string> seen;
    for (const auto &g : c.code) ordered_vars_goal(g, p.out_vars, seen);

    // mode-correct order, call sites resolved
    GoalScheduler sched(resolver_for(procs), "test " + c.name);
    BoundSet bound;
    p.code_goal = Goal::conj(sched.reorder(c.code, bound, {}));

    // conditions run with the solution variables bound
    BoundSet cond_base = seen;
    p.scheduled_conds.resize(c.assertions.size());
    for (size_t i = 0; i < c.assertions.size(); ++i) {
        const Assertion &a = c.assertions[i];
        if (is_condition_kind(a.kind)) {
            GoalScheduler cs(resolver_for(procs), "test " + c.name);
            BoundSet b = cond_base;
            std::vector<Goal> items = a.cond.kind == GoalKind::Conjunction
                                          ? a.cond.children
                                          : std::vector<Goal>{a.cond};
            p.scheduled_conds[i] = Goal::conj(cs.reorder(items, b, {}));
        }
        if (a.kind == AssertionKind::SolutionsCardinality && a.card.is_var())
            cond_base.insert(a.card.name);
    }

    // execution mode restrictions
    scan_calls(p.code_goal, [&](const Goal &g) {
        if (g.callee == "print" && g.args.size() == 1 && ctx.mode == ExecMode::Multi)
            fail("print/1 is not allowed under multi execution mode (test " + c.name + ")",
                 g.span);
        if (ctx.mode == ExecMode::Io && !is_builtin(g.callee, static_cast<int>(g.args.size())) &&
            !is_coverage_builtin(g.callee, static_cast<int>(g.args.size()))) {
            auto it = procs.find(g.callee);
            if (it != procs.end() && it->second.determinism != Determinism::Det)
                fail("io execution mode requires deterministic test code, but " + g.callee +
                         " is " + to_string(it->second.determinism) + " (test " + c.name + ")",
                     g.span);
        }
    });
    for (const auto &cond : p.scheduled_conds)
        scan_calls(cond, [&](const Goal &g) {
            if (g.callee == "print" && g.args.size() == 1)
                fail("print/1 is not allowed in assertions (test " + c.name + ")", g.span);
        });
    return p;
}

TestOutcome evaluate_prepared(const PreparedCase &p, const EvalContext &ctx) {
    const ProcTable &procs = *ctx.procs;
    const TestCase &c = *p.src;
    const AssertionKind expected = p.expected;
    TestOutcome out;
    out.name = c.name;

    SolveOptions opts;
    opts.limit = p.limit;
    opts.policy = ctx.policy;
    opts.coverage = ctx.coverage;
    opts.print_out = ctx.print_out;
    EngineOutcome result = solve(Query{p.code_goal, p.out_vars}, procs, opts);

    if (result.is_exception) {
        if (expected == AssertionKind::ExpectException) {
            out.status = TestStatus::Succeeded;
            out.detail = "succeeded";
        } else {
            out.status = TestStatus::FailedException;
            out.detail =
                "failed because of an exception (" + term_to_text(result.exception) + ")";
        }
        return out;
    }

    if (result.solutions.empty()) {
        if (expected == AssertionKind::ExpectFail) {
            out.status = TestStatus::Succeeded;
            out.detail = "succeeded";
        } else if (expected == AssertionKind::ExpectException) {
            out.status = TestStatus::FailedFailure;
            out.detail = "failed because of failure (instead of exception)";
        } else {
            out.status = TestStatus::FailedFailure;
            out.detail = "failed because of failure (instead of success)";
        }
        return out;
    }

    if (expected == AssertionKind::ExpectFail || expected == AssertionKind::ExpectException) {
        out.status = TestStatus::FailedUnexpectedSuccess;
        out.detail = std::string("failed because of unexpected success (expected ") +
                     (expected == AssertionKind::ExpectFail ? "failure" : "exception") + ")";
        return out;
    }

    // expected success with solutions: evaluate condition assertions in order
    Bindings extra;
    auto eval_condition = [&](const Goal &cond, const Solution &sol) -> bool {
        SolveOptions co;
        co.limit = 1;
        co.policy = ctx.policy;
        co.coverage = ctx.coverage;
        co.initial = sol.as_bindings();
        for (const auto &kv : extra) co.initial.emplace(kv.first, kv.second);
        EngineOutcome r = solve(Query{cond, {}}, procs, co);
        if (r.is_exception) throw EngineError{r.exception};
        return !r.solutions.empty();
    };

    try {
        for (size_t i = 0; i < c.assertions.size(); ++i) {
            const Assertion &a = c.assertions[i];
            bool ok = true;
            switch (a.kind) {
                case AssertionKind::True:
                    ok = eval_condition(p.scheduled_conds[i], result.solutions.front());
                    break;
                case AssertionKind::SomeTrue: {
                    ok = false;
                    for (const auto &sol : result.solutions)
                        if (eval_condition(p.scheduled_conds[i], sol)) {
                            ok = true;
                            break;
                        }
                    break;
                }
                case AssertionKind::AllTrue: {
                    for (const auto &sol : result.solutions)
                        if (!eval_condition(p.scheduled_conds[i], sol)) {
                            ok = false;
                            break;
                        }
                    break;
                }
                case AssertionKind::TrueNth: {
                    if (result.solutions.size() < static_cast<size_t>(a.n))
                        ok = false;
                    else
                        ok = eval_condition(p.scheduled_conds[i],
                                            result.solutions[static_cast<size_t>(a.n) - 1]);
                    break;
                }
                case AssertionKind::SolutionsCardinality: {
                    long long count = static_cast<long long>(result.solutions.size());
                    if (a.card.is_int())
                        ok = a.card.value == count;
                    else
                        extra[a.card.name] = Term::integer(count);
                    break;
                }
                case AssertionKind::TypeDecl: {
                    for (const auto &sol : result.solutions) {
                        const Term *value = sol.value_of(a.type_var);
                        if (!value) {
                            ok = false;
                            break;
                        }
                        static const std::vector<TypeDef> no_defs;
                        const auto &defs = ctx.type_defs ? *ctx.type_defs : no_defs;
                        if (type_check(*value, a.type_expr, defs)) {
                            ok = false;
                            break;
                        }
                    }
                    break;
                }
                case AssertionKind::ExpectSucceed:
                case AssertionKind::ExpectFail:
                case AssertionKind::ExpectException:
                case AssertionKind::Limit:
                    break;
            }
            if (!ok) {
                out.status = TestStatus::ConditionFailed;
                out.detail = "condition failed (" + a.text + ")";
                return out;
            }
        }
    } catch (const EngineError &e) {
        // an exception from an assertion is handled like one from the code
        if (expected == AssertionKind::ExpectException) {
            out.status = TestStatus::Succeeded;
            out.detail = "succeeded";
        } else {
            out.status = TestStatus::FailedException;
            out.detail = "failed because of an exception (" + term_to_text(e.payload) + ")";
        }
        return out;
    }

    out.status = TestStatus::Succeeded;
    out.detail = "succeeded";
    return out;
}

}  // namespace

TestOutcome evaluate_testcase(const TestCase &c, const EvalContext &ctx) {
    return evaluate_prepared(prepare_testcase(c, ctx), ctx);
}

std::vector<TestOutcome> run_suite(const std::vector<TestCase> &cases, const EvalContext &ctx) {
    std::vector<PreparedCase> prepared;
    prepared.reserve(cases.size());
    for (const auto &c : cases) prepared.push_back(prepare_testcase(c, ctx));
    std::vector<TestOutcome> outcomes;
    outcomes.reserve(cases.size());
    for (const auto &p : prepared) outcomes.push_back(evaluate_prepared(p, ctx));
    return outcomes;
}

std::string render_text_report(const std::vector<TestOutcome> &outcomes) {
    std::ostringstream os;
    size_t passed = 0;
    for (const auto &o : outcomes) {
        os << o.line() << "\n";
        if (o.status == TestStatus::Succeeded) ++passed;
    }
    os << passed << "/" << outcomes.size() << " passed\n";
    return os.str();
}

bool all_passed(const std::vector<TestOutcome> &outcomes) {
    for (const auto &o : outcomes)
        if (o.status != TestStatus::Succeeded) return false;
    return true;
}

}  // namespace mtc
