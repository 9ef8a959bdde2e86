#ifndef MTC_COVERAGE_HPP
#define MTC_COVERAGE_HPP

#include <functional>
#include <map>
#include <string_view>

#include "modeanalysis.hpp"

namespace mtc {

using LabelId = int;

// ---------------------------------------------------------------------------
// Labelled superhomogeneous form: a label sits at every position between
// goals, including the start and end of every conjunction.
// ---------------------------------------------------------------------------

struct LabelledGoal;

struct LabelledConj {
    std::vector<LabelId> labels;      // goals.size() + 1 entries
    std::vector<LabelledGoal> goals;
    SourceSpan span;
};

struct LabelledGoal {
    GoalKind kind = GoalKind::Call;
    Goal atomic;                        // Unify/Call only
    std::vector<LabelledConj> branches; // Disjunction: disjuncts; Negation: 1;
                                        // IfThenElse: cond, then, else
    SourceSpan span;
};

struct LabelledClause {
    std::vector<Term> head_args;
    LabelledConj body;
    SourceSpan span;
};

struct LabelledProcedure {
    std::string name;
    std::vector<ArgMode> arg_modes;
    Determinism determinism = Determinism::Nondet;
    // Single-clause procedures use the body's first and last label as their
    // counter pair. Multi-clause procedures get a wrapper clause
    //   name(..) :- log(entry), name__body(..), log(exit).
    // so entry counts calls and exit counts successes.
    bool wrapped = false;
    std::string body_name;
    LabelId entry_label = 0, exit_label = 0;
    std::vector<LabelledClause> clauses;
};

// Labels a single goal; only positions inside the goal receive labels
// (disjuncts, negation bodies and if-then-else arms are conjunctions and get
// their own start/end labels). Returns the labelled goal and the next free id.
std::pair<LabelledGoal, int> label_goal_fragment(const Goal &g, int first_id);

// Labels a conjunction, including its outer start/end labels.
std::pair<LabelledConj, int> label_conj_fragment(const Goal &conj, int first_id);

// ---------------------------------------------------------------------------
// Counter metadata
// ---------------------------------------------------------------------------

enum class CounterKind {
    Goal,
    Disjunction,
    Switch,
    CondDisjunction,  // disjunction inside a negation or if-then-else condition
    Negation,
    IfThenElse,
    Procedure,
};

std::string to_string(CounterKind k);
std::optional<CounterKind> counter_kind_from_string(const std::string &s);

struct CounterEntry {
    LabelId enter = 0, exit = 0;
    CounterKind kind = CounterKind::Goal;
    std::string proc_name;
    SourceSpan span;  // span in the labelled listing
};

struct CounterMeta {
    std::vector<CounterEntry> entries;
    int label_count = 0;  // labels are 1..label_count

    bool has_label(LabelId id) const { return id >= 1 && id <= label_count; }
};

// One line per entry:
// enter_id <TAB> exit_id <TAB> kind <TAB> proc_name <TAB> line:col <TAB> line:col
std::string counter_meta_to_text(const CounterMeta &m);
CounterMeta counter_meta_from_text(std::string_view text);

// ---------------------------------------------------------------------------
// Switch model
// ---------------------------------------------------------------------------

struct SwitchEdge {
    Term lhs, rhs;  // the unification between two labels
};

struct SwitchNode {
    LabelId label = 0;
    // Incoming edge from the parent; absent for disjunct roots and for the
    // first node of a nested branch.
    std::optional<SwitchEdge> in_edge;
    std::vector<SwitchNode> children;

    bool is_leaf() const { return children.empty(); }
};

struct SwitchTree {
    std::vector<SwitchNode> roots;      // first label of each disjunct
    std::string switch_var;             // representative bound variable

    std::set<LabelId> node_labels() const;
    std::vector<LabelId> leaves() const;  // in disjunct order
};

// Recognizes a switch: each root-to-leaf path tests the same bound variable
// (directly or through aliases) against a function symbol, with mutually
// distinct symbols across paths. Nested disjunctions whose branches all test
// that variable are absorbed into the tree; other nested statements act as
// leaf boundaries. Returns absent for regular disjunctions.
std::optional<SwitchTree> detect_switch(const LabelledGoal &disjunction,
                                        const BoundSet &bound);

// Depth-first, disjunct-order listing of all node labels.
std::vector<LabelId> simplified_execution_path(const SwitchTree &tree);

// Outcome of each edge unification, keyed by the edge's target label.
using EdgeOutcomes = std::map<LabelId, bool>;

struct BatchPlan {
    std::map<LabelId, std::vector<LabelId>> leaf_batches;
    std::vector<LabelId> pre_switch;  // logged before the switch when no leaf is marked
};

// Marks disjunct roots, branch starts and successors of succeeded edges,
// then splits the marked nodes into batches in depth-first order, one per
// marked leaf reached; a trailing segment joins the previous batch or
// becomes the pre-switch sequence.
BatchPlan mark_and_batch(const SwitchTree &tree, const EdgeOutcomes &outcomes);

// Term encoding used in instrumented sources:
//   coverage_plan(Id, [n(Label, [e(Lhs, Rhs, Node) | b(Node) ...]), ...])
Term switch_tree_to_term(const SwitchTree &tree);
SwitchTree switch_tree_from_term(const Term &t);

// ---------------------------------------------------------------------------
// Labelling and instrumentation over whole programs
// ---------------------------------------------------------------------------

struct LabelledProgram {
    std::vector<TypeDef> type_defs;
    std::vector<LabelledProcedure> procs;
    CounterMeta meta;      // spans refer to `listing`
    std::string listing;   // naive instrumentation: log(l) at every label
    int label_count = 0;
};

LabelledProgram label_program(const AnalyzedProgram &ap);

struct InstrumentedProgram {
    std::vector<TypeDef> type_defs;
    std::vector<Procedure> procedures;        // batched instrumentation
    std::vector<Procedure> naive_procedures;  // log(l) everywhere (oracle)
    CounterMeta meta;
    std::string listing;  // labelled source file (naive listing)
    std::string text;     // batched instrumented source
    int label_count = 0;
};

// Inserts log goals at every label, replacing per-label logs inside each
// detected switch by one log_leaf per leaf plus a coverage_plan directive
// before the disjunction. Disjunctions inside negations or if-then-else
// conditions keep naive logs. Throws InternalError if the instrumented
// procedures fail the determinism re-check.
InstrumentedProgram instrument(const AnalyzedProgram &ap);

// Detects instrumentation artifacts (log/log_leaf/coverage_plan calls).
bool program_is_instrumented(const Program &p);

// Walks every disjunction of a labelled conjunction, tracking which
// variables are bound at each position. `in_condition` is true inside
// negation bodies and if-then-else conditions.
void walk_disjunctions(
    const LabelledConj &conj, BoundSet bound, const ProcTable &procs,
    const std::function<void(const LabelledGoal &, const BoundSet &, bool)> &cb);

// ---------------------------------------------------------------------------
// Log replay, classification, reports
// ---------------------------------------------------------------------------

struct LogEvent {
    bool batch = false;
    std::vector<LabelId> labels;  // single event: exactly one id
};

// L <id> for single labels, B <id,id,...> for batches.
std::string log_events_to_text(const std::vector<LogEvent> &events);
std::vector<LogEvent> log_events_from_text(std::string_view text);

// Expands events into per-label counts. Unknown label ids are an error.
std::map<LabelId, long long> replay_log(const std::vector<LogEvent> &events,
                                        const CounterMeta &meta);

enum class CoverageDegree { Covered, PartiallyCovered, NotCovered };
std::string to_string(CoverageDegree d);

struct CoverageEntry {
    CounterEntry meta;
    long long enter_count = 0, exit_count = 0;
    CoverageDegree degree = CoverageDegree::NotCovered;
};

struct CoverageReport {
    std::vector<CoverageEntry> entries;
};

CoverageReport classify(const std::map<LabelId, long long> &counts, const CounterMeta &meta);

// Standalone HTML: the source with goal spans wrapped in spans of class
// covered/partial/uncovered. Only goal coverage is rendered.
std::string emit_html(const CoverageReport &report, std::string_view source_text);

// One line per counter pair including compound constructs and procedures.
std::string emit_detail_report(const CoverageReport &report);

}  // namespace mtc

#endif
