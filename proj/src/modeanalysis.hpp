#ifndef MTC_MODEANALYSIS_HPP
#define MTC_MODEANALYSIS_HPP

#include <functional>
#include <map>
#include <string_view>

#include "ast.hpp"

namespace mtc {

// A single mode of a predicate: body reordered for left-to-right execution,
// call sites renamed to procedure names.
struct Procedure {
    std::string name;       // unique; equals orig_name for single-moded predicates
    std::string orig_name;
    int arity = 0;
    int mode_index = 0;
    std::vector<ArgMode> arg_modes;
    Determinism determinism = Determinism::Nondet;
    std::vector<Clause> clauses;  // superhomogeneous, reordered
};

using ProcTable = std::map<std::string, Procedure>;  // keyed by proc name

struct RenamingEntry {
    std::string orig_name;
    int arity = 0;
    int mode_index = 0;
    std::string new_name;
};

struct RenamingTable {
    std::vector<RenamingEntry> entries;

    const RenamingEntry *find(const std::string &name, int arity, int mode_index) const;
    std::vector<const RenamingEntry *> candidates(const std::string &name, int arity) const;
};

// One record per line: original_name/arity <TAB> mode_index <TAB> new_name.
std::string renaming_table_to_text(const RenamingTable &t);
RenamingTable renaming_table_from_text(std::string_view text);

// Superhomogeneous form: clause heads become distinct fresh variables with
// explicit head unifications, every unification is X=Y or X=f(Y1..Yn), and
// every call takes only variables. Fresh variables are named V1, V2, ... in
// order of first occurrence (head arguments first, then depth-first through
// the body). Arguments of coverage directives are left intact apart from
// variable renaming.
Program to_superhomogeneous(const Program &p);

struct AnalyzedProgram {
    std::vector<TypeDef> type_defs;
    std::vector<Procedure> procedures;  // in predicate/mode declaration order
    RenamingTable renaming;             // rows for multi-moded predicates only

    ProcTable proc_table() const;
};

// Splits each predicate into one procedure per mode declaration, reorders
// conjunctions so every goal has its inputs bound when reached (stable greedy
// scheduling), and renames call sites to the procedure matching the callee's
// instantiation. Multi-moded predicates get names <name>__m<k>; single-moded
// ones keep their name so an already split program analyzes to itself.
// Throws CompileError on mode errors.
AnalyzedProgram reorder_and_split(const Program &p);

// For each det/semidet procedure, every disjunction outside negations and
// if-then-else conditions must be recognizable as a switch. Returns one
// diagnostic per violation; multi/nondet procedures always pass.
std::vector<Diagnostic> check_determinism(const std::vector<Procedure> &procs);

// ---------------------------------------------------------------------------
// Instantiation helpers shared with the coverage pass and the test runner
// ---------------------------------------------------------------------------

using BoundSet = std::set<std::string>;

bool term_bound(const Term &t, const BoundSet &bound);

struct ModeOption {
    int mode_index = 0;
    std::vector<ArgMode> arg_modes;
    Determinism determinism = Determinism::Nondet;
    std::string proc_name;
};

// Resolves a callee to its mode options; nullopt means unknown predicate.
using CallResolver =
    std::function<std::optional<std::vector<ModeOption>>(const std::string &, int)>;

CallResolver resolver_for(const ProcTable &procs);

// Selects the callee mode for the given argument boundness: all 'in'
// positions must be bound; among matches the one with the most 'in'
// arguments wins, ties resolved by declaration order. Returns -1 when no
// mode matches.
int select_mode(const std::vector<ModeOption> &options, const std::vector<bool> &arg_bound);

// Stable greedy goal scheduler: at each step the first goal in source order
// whose inputs are bound is emitted. Calls are renamed to the procedure of
// the selected mode; an output position holding an already bound variable or
// a non-variable term is replaced by a fresh variable plus a unification
// after the call. Used both for clause bodies and for test-case code.
class GoalScheduler {
   public:
    GoalScheduler(CallResolver resolver, std::string context);

    // Leaves calls to predicates the resolver does not know unchanged
    // instead of failing (used when applying a renaming table).
    void set_lenient(bool lenient) { lenient_ = lenient; }

    // Reorders the conjunction; `bound` is updated to the exit set.
    // `externals` are variables visible outside the conjunction (negations
    // and if-then-else conditions may not bind them). Throws CompileError.
    std::vector<Goal> reorder(const std::vector<Goal> &goals, BoundSet &bound,
                              const BoundSet &externals);

   private:
    struct Attempt {
        std::vector<Goal> goals;
        BoundSet bound;
    };

    std::optional<std::vector<Goal>> try_conj(const std::vector<Goal> &goals, BoundSet &bound,
                                              const BoundSet &externals);
    std::optional<Attempt> try_goal(const Goal &g, const BoundSet &bound,
                                    const BoundSet &externals);
    std::optional<Attempt> try_builtin(const Goal &g, const BoundSet &bound);
    std::string fresh_var();

    CallResolver resolver_;
    std::string context_;
    std::set<std::string> used_names_;
    int fresh_counter_ = 0;
    bool lenient_ = false;
};

// Variables a goal binds when executed with the given entry set; assumes the
// goal sequence is already mode-correct. `procs` resolves call outputs.
void apply_goal_bindings(const Goal &g, const ProcTable &procs, BoundSet &bound);

}  // namespace mtc

#endif
