// Shared fixtures, the random program generator and the independent
// reference resolver used as a semantic oracle by the tests.
#ifndef MTC_TESTS_SUPPORT_HPP
#define MTC_TESTS_SUPPORT_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ast.hpp"
#include "coverage.hpp"
#include "engine.hpp"
#include "modeanalysis.hpp"
#include "parser.hpp"
#include "testkit.hpp"

namespace mtc_tests {

using namespace mtc;

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

// Standard list library used by the paper-style suites.
inline const char *kListLibrary = R"(
:- type list(T) ---> [] ; [T|list(T)].

:- pred append(list(T), list(T), list(T)).
:- mode append(in, in, out) is det.
:- mode append(out, out, in) is multi.

append([], Y, Y).
append([E|Es], Y, [E|Zs]) :- append(Es, Y, Zs).

:- pred member(T, list(T)).
:- mode member(in, in) is semidet.
:- mode member(out, in) is nondet.

member(X, [X|_]).
member(X, [Y|T]) :- not (X=Y), member(X, T).

:- pred reverse(list(T), list(T)).
:- mode reverse(in, out) is det.

reverse([], []).
reverse([H|T], R) :- reverse(T, RT), append(RT, [H], R).
)";

// Same library with reverse's recursive clause dropped; the mutant can fail,
// so it is declared semidet.
inline const char *kListLibraryMutant = R"(
:- type list(T) ---> [] ; [T|list(T)].

:- pred append(list(T), list(T), list(T)).
:- mode append(in, in, out) is det.
:- mode append(out, out, in) is multi.

append([], Y, Y).
append([E|Es], Y, [E|Zs]) :- append(Es, Y, Zs).

:- pred member(T, list(T)).
:- mode member(in, in) is semidet.
:- mode member(out, in) is nondet.

member(X, [X|_]).
member(X, [Y|T]) :- not (X=Y), member(X, T).

:- pred reverse(list(T), list(T)).
:- mode reverse(in, out) is semidet.

reverse([], []).
)";

// The suite of the paper's worked examples.
inline const char *kPaperSuite = R"(
test(t1, [reverse([1,2],L)], [true(L=[2,1])]).
test(t2, [member(X,[1,3,4,2])], [limit(2),some_true(X>1)]).
test(t3, [member(X,[1,2,3,4])], [solutions_cardinality(N),true(N>3),all_true(X<5)]).
test(t4, [append(L1,L2,[1,2,3])], [type(L2,list(int)), some_true((L1=[1,2],length(L2,1)))]).
test(t5, [append(L1,L2,[1,2,3])], [some_true((L1=[1,2],L2=[3]))]).
)";

// Switch example: a deterministic predicate whose body is the disjunction
// testing X against f, g and h(_), with a nested aliased disjunction.
inline const char *kSwitchProgram = R"(
:- type sym ---> f ; g ; h(int).
:- type wrap ---> w(int).

:- pred p(wrap).
:- mode p(out) is det.
p(w(0)).

:- pred q(int, int).
:- mode q(in, out) is det.
q(A, A).

:- pred r(int, wrap).
:- mode r(in, out) is det.
r(I, w(I)).

:- pred fig(sym, wrap).
:- mode fig(in, out) is det.
fig(X, Out) :-
  ( X = f,
    p(Out)
  ; Y = X,
    ( Y = g,
      Intermediate = 42
    ; Z = Y,
      Z = h(Arg),
      q(Arg, Intermediate)
    ),
    r(Intermediate, Out)
  ).
)";

// The bare switch disjunction, used for fragment labelling.
inline const char *kSwitchFragment = R"(
( X = f,
  p(Out)
; Y = X,
  ( Y = g,
    Intermediate = 42
  ; Z = Y,
    Z = h(Arg),
    q(Arg, Intermediate)
  ),
  r(Intermediate, Out)
)
)";

// ---------------------------------------------------------------------------
// Pipeline helpers
// ---------------------------------------------------------------------------

inline AnalyzedProgram analyze_text(const std::string &text) {
    return reorder_and_split(to_superhomogeneous(parse_program(text)));
}

inline ProcTable table_of(const std::vector<Procedure> &procs) {
    ProcTable t;
    for (const auto &p : procs) t.emplace(p.name, p);
    return t;
}

inline std::string solution_text(const Solution &s) {
    std::string out;
    for (size_t i = 0; i < s.vars.size(); ++i) {
        if (i) out += ", ";
        out += s.vars[i] + " = " + term_to_text(s.values[i]);
    }
    return out;
}

inline std::vector<std::string> solution_texts(const EngineOutcome &o) {
    std::vector<std::string> out;
    for (const auto &s : o.solutions) out.push_back(solution_text(s));
    return out;
}

inline std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// ---------------------------------------------------------------------------
// Reference resolver: an independent depth-bounded SLD enumerator over the
// original (unnormalized) program. No modes, no reordering; its own
// substitution-based unifier.
// ---------------------------------------------------------------------------

class RefOracle {
   public:
    explicit RefOracle(const Program &prog, int max_depth = 128)
        : prog_(prog), max_depth_(max_depth) {}

    // Enumerates the ground instantiations of `vars` under `goal`.
    std::vector<std::string> solutions(const Goal &goal,
                                       const std::vector<std::string> &vars) {
        std::vector<std::string> out;
        Env env;
        run(goal, env, 0, [&](const Env &e) {
            std::string s;
            for (size_t i = 0; i < vars.size(); ++i) {
                if (i) s += ", ";
                s += vars[i] + " = " + term_to_text(deep(Term::var(vars[i]), e));
            }
            out.push_back(s);
        });
        return out;
    }

    bool hit_depth_limit() const { return depth_hit_; }

   private:
    using Env = std::map<std::string, Term>;

    const Term *shallow(const Term *t, const Env &e) const {
        while (t->is_var()) {
            auto it = e.find(t->name);
            if (it == e.end()) return t;
            t = &it->second;
        }
        return t;
    }

    Term deep(const Term &t, const Env &e) const {
        const Term *w = shallow(&t, e);
        Term out = *w;
        for (auto &a : out.args) a = deep(a, e);
        return out;
    }

    bool unify_ref(const Term &a, const Term &b, Env &e) const {
        const Term *x = shallow(&a, e);
        const Term *y = shallow(&b, e);
        if (x->is_var() && y->is_var() && x->name == y->name) return true;
        if (x->is_var()) {
            e.emplace(x->name, *y);
            return true;
        }
        if (y->is_var()) {
            e.emplace(y->name, *x);
            return true;
        }
        if (x->is_int() || y->is_int())
            return x->is_int() && y->is_int() && x->value == y->value;
        if (x->name != y->name || x->args.size() != y->args.size()) return false;
        for (size_t i = 0; i < x->args.size(); ++i)
            if (!unify_ref(x->args[i], y->args[i], e)) return false;
        return true;
    }

    Term freshen(const Term &t, const std::string &sfx) const {
        if (t.is_var()) return Term::var(t.name + sfx);
        Term out = t;
        for (auto &a : out.args) a = freshen(a, sfx);
        return out;
    }

    Goal freshen_goal(const Goal &g, const std::string &sfx) const {
        Goal out = g;
        switch (g.kind) {
            case GoalKind::Unify:
                out.lhs = freshen(g.lhs, sfx);
                out.rhs = freshen(g.rhs, sfx);
                return out;
            case GoalKind::Call:
                for (auto &a : out.args) a = freshen(a, sfx);
                return out;
            default:
                for (auto &c : out.children) c = freshen_goal(c, sfx);
                return out;
        }
    }

    long long eval_int(const Term &t, const Env &e) const {
        Term v = deep(t, e);
        if (v.is_int()) return v.value;
        if (v.is_compound() && v.args.size() == 2) {
            long long l = eval_int(v.args[0], e), r = eval_int(v.args[1], e);
            if (v.name == "+") return l + r;
            if (v.name == "-") return l - r;
            if (v.name == "*") return l * r;
            if (v.name == "/") return r == 0 ? 0 : l / r;
        }
        throw std::runtime_error("oracle: non-arithmetic term");
    }

    void run(const Goal &g, const Env &e, int depth, const std::function<void(const Env &)> &k) {
        if (depth > max_depth_) {
            depth_hit_ = true;
            return;
        }
        switch (g.kind) {
            case GoalKind::Unify: {
                Env ne = e;
                if (unify_ref(g.lhs, g.rhs, ne)) k(ne);
                return;
            }
            case GoalKind::Conjunction:
                run_conj(g.children, 0, e, depth, k);
                return;
            case GoalKind::Disjunction:
                for (const auto &c : g.children) run(c, e, depth, k);
                return;
            case GoalKind::Negation: {
                bool found = false;
                run(g.children[0], e, depth, [&](const Env &) { found = true; });
                if (!found) k(e);
                return;
            }
            case GoalKind::IfThenElse: {
                bool met = false;
                run(g.children[0], e, depth, [&](const Env &ce) {
                    met = true;
                    run(g.children[1], ce, depth, k);
                });
                if (!met) run(g.children[2], e, depth, k);
                return;
            }
            case GoalKind::Call:
                break;
        }
        const std::string &f = g.callee;
        size_t n = g.args.size();
        if (f == "=" && n == 2) {
            Env ne = e;
            if (unify_ref(g.args[0], g.args[1], ne)) k(ne);
            return;
        }
        if ((f == "<" || f == ">" || f == "=<" || f == ">=") && n == 2) {
            long long l = eval_int(g.args[0], e), r = eval_int(g.args[1], e);
            bool ok = f == "<" ? l < r : f == ">" ? l > r : f == "=<" ? l <= r : l >= r;
            if (ok) k(e);
            return;
        }
        if (f == "is" && n == 2) {
            Env ne = e;
            if (unify_ref(g.args[0], Term::integer(eval_int(g.args[1], e)), ne)) k(ne);
            return;
        }
        if (f == "length" && n == 2) {
            Term list = deep(g.args[0], e);
            long long count = 0;
            const Term *cur = &list;
            while (cur->is_cons()) {
                ++count;
                cur = &cur->args[1];
            }
            Env ne = e;
            if (cur->is_nil() && unify_ref(g.args[1], Term::integer(count), ne)) k(ne);
            return;
        }
        if (is_coverage_builtin(f, static_cast<int>(n))) {
            k(e);
            return;
        }
        const PredicateDef *pred = prog_.find_predicate(f, static_cast<int>(n));
        if (!pred) throw std::runtime_error("oracle: unknown predicate " + f);
        for (const auto &clause : pred->clauses) {
            std::string sfx = "~" + std::to_string(++counter_);
            Env ne = e;
            bool ok = true;
            for (size_t i = 0; i < clause.head_args.size(); ++i)
                if (!unify_ref(g.args[i], freshen(clause.head_args[i], sfx), ne)) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            run(freshen_goal(clause.body, sfx), ne, depth + 1, k);
        }
    }

    void run_conj(const std::vector<Goal> &gs, size_t i, const Env &e, int depth,
                  const std::function<void(const Env &)> &k) {
        if (i >= gs.size()) {
            k(e);
            return;
        }
        run(gs[i], e, depth, [&](const Env &ne) { run_conj(gs, i + 1, ne, depth, k); });
    }

    const Program &prog_;
    int max_depth_;
    bool depth_hit_ = false;
    mutable long long counter_ = 0;
};

// ---------------------------------------------------------------------------
// Random program generator: up to four predicates over the constructors
// a/0, b/0, c/1 and small integers; acyclic calls so every query terminates.
// All predicates are pred_k(in, out) is nondet.
// ---------------------------------------------------------------------------

struct GeneratedProgram {
    Program program;        // reparsed from text, so spans are real
    std::string text;
    std::vector<std::string> pred_names;  // callable predicates
};

class ProgramGen {
   public:
    explicit ProgramGen(std::mt19937 &rng) : rng_(rng) {}

    GeneratedProgram generate() {
        int pred_count = 2 + static_cast<int>(rng_() % 3);  // 2..4
        Program prog;
        TypeDef t;
        t.name = "t";
        t.ctors.push_back({"a", {}});
        t.ctors.push_back({"b", {}});
        t.ctors.push_back({"c", {TypeExpr{"t", {}}}});
        prog.type_defs.push_back(t);

        std::vector<std::string> names;
        for (int i = 0; i < pred_count; ++i) names.push_back("p" + std::to_string(i + 1));
        for (int i = 0; i < pred_count; ++i) {
            PredicateDef pred;
            pred.name = names[static_cast<size_t>(i)];
            pred.arity = 2;
            ModeDecl mode;
            mode.arg_modes = {ArgMode::In, ArgMode::Out};
            mode.determinism = Determinism::Nondet;
            pred.modes.push_back(mode);
            int clause_count = 1 + static_cast<int>(rng_() % 3);  // 1..3
            for (int c = 0; c < clause_count; ++c)
                pred.clauses.push_back(gen_clause(names, i, pred_count));
            prog.predicates.push_back(std::move(pred));
        }

        GeneratedProgram out;
        out.text = program_to_text(prog);
        out.program = parse_program(out.text);
        out.pred_names = names;
        return out;
    }

    Term ground_term(int depth = 3) {
        switch (rng_() % 4) {
            case 0: return Term::atom("a");
            case 1: return Term::atom("b");
            case 2: return Term::integer(static_cast<long long>(rng_() % 10));
            default:
                if (depth <= 1) return Term::atom("a");
                return Term::compound("c", {ground_term(depth - 1)});
        }
    }

   private:
    int pick(int n) { return static_cast<int>(rng_() % static_cast<unsigned>(n)); }

    // a term over the bound variables of the clause, for output positions
    Term out_term(const std::vector<std::string> &bound, int depth = 2) {
        if (!bound.empty() && pick(3) == 0)
            return Term::var(bound[static_cast<size_t>(pick(static_cast<int>(bound.size())))]);
        if (depth > 1 && pick(3) == 0) return Term::compound("c", {out_term(bound, depth - 1)});
        return ground_term(2);
    }

    // an optional call to a later predicate; binds the returned variable
    std::optional<Goal> maybe_call(const std::vector<std::string> &names, int self,
                                   int pred_count, const std::vector<std::string> &bound,
                                   std::vector<std::string> &new_bound, int &fresh) {
        if (self + 1 >= pred_count || pick(2) != 0) return std::nullopt;
        int callee = self + 1 + pick(pred_count - self - 1);
        Term arg = bound.empty() || pick(2) == 0
                       ? ground_term(2)
                       : Term::var(bound[static_cast<size_t>(pick(static_cast<int>(bound.size())))]);
        std::string w = "W" + std::to_string(++fresh);
        new_bound.push_back(w);
        return Goal::call(names[static_cast<size_t>(callee)], {arg, Term::var(w)});
    }

    // tail of a disjunct: optional call, then the output unification
    std::vector<Goal> disjunct_tail(const std::vector<std::string> &names, int self,
                                    int pred_count, std::vector<std::string> bound,
                                    int &fresh) {
        std::vector<Goal> goals;
        std::vector<std::string> extra;
        if (auto call = maybe_call(names, self, pred_count, bound, extra, fresh)) {
            goals.push_back(*call);
            for (auto &v : extra) bound.push_back(v);
        }
        goals.push_back(Goal::unify(Term::var("Y"), out_term(bound)));
        return goals;
    }

    Clause gen_clause(const std::vector<std::string> &names, int self, int pred_count) {
        Clause clause;
        clause.head_args = {Term::var("X"), Term::var("Y")};
        int fresh = 0;
        std::vector<Goal> body;
        switch (pick(5)) {
            case 0: {  // deconstruct + output
                body.push_back(Goal::unify(Term::var("X"), ground_term(2)));
                for (auto &g : disjunct_tail(names, self, pred_count, {"X"}, fresh))
                    body.push_back(g);
                break;
            }
            case 1: {  // plain switch on X
                std::vector<Goal> arms;
                arms.push_back(Goal::conj(with_first(
                    Goal::unify(Term::var("X"), Term::atom("a")),
                    disjunct_tail(names, self, pred_count, {"X"}, fresh))));
                arms.push_back(Goal::conj(with_first(
                    Goal::unify(Term::var("X"), Term::atom("b")),
                    disjunct_tail(names, self, pred_count, {"X"}, fresh))));
                if (pick(2) == 0)
                    arms.push_back(Goal::conj(with_first(
                        Goal::unify(Term::var("X"), Term::compound("c", {Term::var("V")})),
                        disjunct_tail(names, self, pred_count, {"X", "V"}, fresh))));
                body.push_back(Goal::disj(std::move(arms)));
                break;
            }
            case 2: {  // nested switch through an alias, as in the paper
                std::vector<Goal> inner;
                inner.push_back(Goal::conj(with_first(
                    Goal::unify(Term::var("Z"), Term::atom("b")),
                    disjunct_tail(names, self, pred_count, {"X"}, fresh))));
                inner.push_back(Goal::conj(with_first(
                    Goal::unify(Term::var("Z"), Term::compound("c", {Term::var("V")})),
                    disjunct_tail(names, self, pred_count, {"X", "V"}, fresh))));
                std::vector<Goal> arms;
                arms.push_back(Goal::conj(with_first(
                    Goal::unify(Term::var("X"), Term::atom("a")),
                    disjunct_tail(names, self, pred_count, {"X"}, fresh))));
                std::vector<Goal> second;
                second.push_back(Goal::unify(Term::var("Z"), Term::var("X")));
                second.push_back(Goal::disj(std::move(inner)));
                arms.push_back(Goal::conj(std::move(second)));
                body.push_back(Goal::disj(std::move(arms)));
                break;
            }
            case 3: {  // regular disjunction (no switch)
                std::vector<Goal> arms;
                int count = 2 + pick(2);
                for (int i = 0; i < count; ++i)
                    arms.push_back(Goal::conj(
                        disjunct_tail(names, self, pred_count, {"X"}, fresh)));
                body.push_back(Goal::disj(std::move(arms)));
                break;
            }
            default: {  // negation guard
                body.push_back(Goal::negation(
                    Goal::unify(Term::var("X"), Term::atom("a"))));
                for (auto &g : disjunct_tail(names, self, pred_count, {"X"}, fresh))
                    body.push_back(g);
                break;
            }
        }
        clause.body = Goal::conj(std::move(body));
        return clause;
    }

    static std::vector<Goal> with_first(Goal first, std::vector<Goal> rest) {
        std::vector<Goal> out;
        out.push_back(std::move(first));
        for (auto &g : rest) out.push_back(std::move(g));
        return out;
    }

    std::mt19937 &rng_;
};

// ---------------------------------------------------------------------------
// Corpus check: counts from batched instrumentation vs the trace-sink oracle
// on the naive labelled program, plus solution preservation and code growth.
// ---------------------------------------------------------------------------

struct CorpusResult {
    bool counts_equal = false;
    bool solutions_preserved = false;
    double growth = 0.0;
    std::string detail;
};

inline size_t nonempty_lines(const std::string &s) {
    size_t n = 0;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line))
        if (line.find_first_not_of(" \t") != std::string::npos) ++n;
    return n;
}

inline CorpusResult check_corpus_program(const GeneratedProgram &gp, const Term &query_arg) {
    CorpusResult r;
    AnalyzedProgram analyzed = analyze_text(gp.text);
    InstrumentedProgram inst = instrument(analyzed);

    ProcTable orig = analyzed.proc_table();
    ProcTable batched = table_of(inst.procedures);
    ProcTable naive = table_of(inst.naive_procedures);

    Query q;
    q.goal = Goal::call(gp.pred_names.front(), {query_arg, Term::var("Result")});
    q.out_vars = {"Result"};

    SolveOptions plain;
    EngineOutcome base = solve(q, orig, plain);

    CoverageLog batched_log;
    SolveOptions bopts;
    bopts.coverage = &batched_log;
    EngineOutcome batched_out = solve(q, batched, bopts);

    CoverageLog naive_log;
    SolveOptions nopts;
    nopts.coverage = &naive_log;
    EngineOutcome naive_out = solve(q, naive, nopts);

    auto counts_b = batched_log.counts();
    auto counts_n = naive_log.counts();
    r.counts_equal = counts_b == counts_n;
    if (!r.counts_equal) {
        std::ostringstream os;
        os << "count mismatch for query arg " << term_to_text(query_arg) << "\n";
        for (int l = 1; l <= inst.label_count; ++l) {
            long long cb = counts_b.count(l) ? counts_b[l] : 0;
            long long cn = counts_n.count(l) ? counts_n[l] : 0;
            if (cb != cn) os << "  label " << l << ": batched " << cb << " naive " << cn << "\n";
        }
        r.detail = os.str();
    }

    r.solutions_preserved =
        !base.is_exception && !batched_out.is_exception && !naive_out.is_exception &&
        sorted(solution_texts(base)) == sorted(solution_texts(batched_out)) &&
        sorted(solution_texts(base)) == sorted(solution_texts(naive_out));

    r.growth = static_cast<double>(nonempty_lines(inst.text)) /
               static_cast<double>(nonempty_lines(gp.text));
    return r;
}

}  // namespace mtc_tests

#endif
