#ifndef MTC_ENGINE_HPP
#define MTC_ENGINE_HPP

#include <iosfwd>

#include "coverage.hpp"
#include "modeanalysis.hpp"

namespace mtc {

// Variable bindings; values may contain variables while a unification is in
// flight, but every solution extracted from a solve is ground.
using Bindings = std::map<std::string, Term>;

// Most general unifier extension, or nullopt on mismatch (occurs check
// included). Purely functional: the input map is never modified.
std::optional<Bindings> unify(const Term &a, const Term &b, const Bindings &in);

// Deep substitution of bindings into a term.
Term resolve_term(const Term &t, const Bindings &b);

// Logic-level exceptions: thrown goals, determinism violations, builtin
// instantiation errors. Caught or propagated according to ExceptionPolicy.
struct EngineError {
    Term payload;
};

enum class ExceptionPolicy { CatchAll, Propagate };

struct Solution {
    std::vector<std::string> vars;  // query output variables, declaration order
    std::vector<Term> values;       // ground terms, aligned with vars

    const Term *value_of(const std::string &name) const;
    Bindings as_bindings() const;
};

struct EngineOutcome {
    bool is_exception = false;
    Term exception;
    std::vector<Solution> solutions;
};

// Collects label events; doubles as the trace-sink oracle and as the log
// file writer for instrumented runs.
class CoverageLog {
   public:
    void single(LabelId id) { events_.push_back({false, {id}}); }
    void batch(std::vector<LabelId> ids) { events_.push_back({true, std::move(ids)}); }
    const std::vector<LogEvent> &events() const { return events_; }
    std::map<LabelId, long long> counts() const;
    void clear() { events_.clear(); }

   private:
    std::vector<LogEvent> events_;
};

struct SolveOptions {
    std::optional<size_t> limit;  // stop after this many solutions
    ExceptionPolicy policy = ExceptionPolicy::CatchAll;
    CoverageLog *coverage = nullptr;   // label sink; coverage goals are no-ops without it
    std::ostream *print_out = nullptr; // print/1 destination
    Bindings initial;                  // pre-bound variables (condition evaluation)
    size_t max_depth = 2000;           // procedure activation depth guard
};

struct Query {
    Goal goal;
    std::vector<std::string> out_vars;
};

// Depth-first, clause-order, left-to-right enumeration. Determinism
// contracts are enforced per call: a det/multi procedure that is fully
// explored without a solution, or a det/semidet procedure producing a second
// solution, raises a determinism_violation exception term.
EngineOutcome solve(const Query &q, const ProcTable &procs, const SolveOptions &opts);

}  // namespace mtc

#endif
