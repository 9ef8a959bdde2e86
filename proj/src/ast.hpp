#ifndef MTC_AST_HPP
#define MTC_AST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtc {

// ---------------------------------------------------------------------------
// Source positions
// ---------------------------------------------------------------------------

struct SourcePos {
    int line = 0;  // 1-based; 0 means unknown
    int col = 0;
};

struct SourceSpan {
    SourcePos begin;
    SourcePos end;

    bool known() const { return begin.line > 0; }
};

std::string to_string(const SourcePos &p);
std::string to_string(const SourceSpan &s);

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

// List sugar desugars to the fixed functors cons/2 and nil/0:
// [] reads as nil, [H|T] as cons(H, T). The pretty-printer re-sugars them.
inline constexpr const char *kConsName = "cons";
inline constexpr const char *kNilName = "nil";

enum class TermKind { Variable, Integer, Compound };

struct Term {
    TermKind kind = TermKind::Compound;
    std::string name;           // variable name or functor name
    long long value = 0;        // Integer only
    std::vector<Term> args;     // Compound only
    SourceSpan span;

    static Term var(std::string n);
    static Term integer(long long v);
    static Term atom(std::string n);
    static Term compound(std::string n, std::vector<Term> a);
    static Term list(const std::vector<Term> &elems);  // cons/nil chain

    bool is_var() const { return kind == TermKind::Variable; }
    bool is_int() const { return kind == TermKind::Integer; }
    bool is_compound() const { return kind == TermKind::Compound; }
    bool is_atom() const { return is_compound() && args.empty(); }
    bool is_nil() const { return is_atom() && name == kNilName; }
    bool is_cons() const { return is_compound() && name == kConsName && args.size() == 2; }
};

// Structural equality; variable names compare exactly, spans are ignored.
bool term_equal(const Term &a, const Term &b);
bool term_less(const Term &a, const Term &b);  // total order for sorting/multisets
void collect_vars(const Term &t, std::set<std::string> &out);
bool term_is_ground(const Term &t);

std::string term_to_text(const Term &t);

// ---------------------------------------------------------------------------
// Type expressions and definitions
// ---------------------------------------------------------------------------

struct TypeExpr {
    std::string name;              // type constructor or type variable
    std::vector<TypeExpr> params;

    bool is_type_var() const;      // by convention: initial uppercase or '_'
};

std::string type_expr_to_text(const TypeExpr &t);
bool type_expr_equal(const TypeExpr &a, const TypeExpr &b);

struct TypeCtor {
    std::string name;
    std::vector<TypeExpr> args;
};

struct TypeDef {
    std::string name;
    std::vector<std::string> params;    // type variable names
    std::vector<TypeCtor> ctors;
    SourceSpan span;
};

// ---------------------------------------------------------------------------
// Goals
// ---------------------------------------------------------------------------

enum class GoalKind { Unify, Call, Conjunction, Disjunction, Negation, IfThenElse };

struct Goal {
    GoalKind kind = GoalKind::Conjunction;
    SourceSpan span;

    Term lhs, rhs;              // Unify
    std::string callee;         // Call
    std::vector<Term> args;     // Call
    // Conjunction: 0..n children; Disjunction: >= 2;
    // Negation: exactly 1; IfThenElse: cond, then, else.
    std::vector<Goal> children;

    static Goal unify(Term l, Term r);
    static Goal call(std::string name, std::vector<Term> a);
    static Goal conj(std::vector<Goal> gs);
    static Goal disj(std::vector<Goal> gs);
    static Goal negation(Goal g);
    static Goal ite(Goal c, Goal t, Goal e);
};

void collect_goal_vars(const Goal &g, std::set<std::string> &out);
std::string goal_to_text(const Goal &g);
bool goal_equal(const Goal &a, const Goal &b);

// ---------------------------------------------------------------------------
// Modes and determinism
// ---------------------------------------------------------------------------

enum class ArgMode { In, Out };

enum class Determinism { Det, Semidet, Multi, Nondet };

std::string to_string(ArgMode m);
std::string to_string(Determinism d);
std::optional<Determinism> determinism_from_string(const std::string &s);

struct ModeDecl {
    std::vector<ArgMode> arg_modes;
    Determinism determinism = Determinism::Nondet;
    SourceSpan span;
};

// ---------------------------------------------------------------------------
// Predicates and programs
// ---------------------------------------------------------------------------

struct Clause {
    std::vector<Term> head_args;
    Goal body;                  // empty conjunction for facts
    SourceSpan span;
};

struct PredicateDef {
    std::string name;
    int arity = 0;
    std::vector<TypeExpr> type_sig;  // empty when no :- pred declaration
    bool has_type_sig = false;
    std::vector<ModeDecl> modes;
    std::vector<Clause> clauses;
    SourceSpan span;
};

struct Program {
    std::vector<TypeDef> type_defs;
    std::vector<PredicateDef> predicates;  // declaration order

    const TypeDef *find_type(const std::string &name) const;
    const PredicateDef *find_predicate(const std::string &name, int arity) const;
    PredicateDef *find_predicate(const std::string &name, int arity);
};

// Builtin goal predicates understood by the engine.
bool is_builtin(const std::string &name, int arity);
// Reserved predicates inserted by the coverage instrumentation.
bool is_coverage_builtin(const std::string &name, int arity);

// Pretty-prints a whole program in the concrete syntax accepted by the
// parser; reparsing the output yields a structurally identical program.
std::string program_to_text(const Program &p);
bool program_equal(const Program &a, const Program &b);

std::string type_def_to_text(const TypeDef &t);
std::string mode_decl_to_text(const std::string &pred_name,
                              const std::vector<ArgMode> &arg_modes, Determinism det);

// ---------------------------------------------------------------------------
// Errors and diagnostics
// ---------------------------------------------------------------------------

struct Diagnostic {
    std::string message;
    SourceSpan span;

    std::string render() const;
};

// Parse and mode errors. `diag.span` points into the offending source.
class CompileError : public std::runtime_error {
   public:
    explicit CompileError(Diagnostic d)
        : std::runtime_error(d.render()), diag_(std::move(d)) {}
    const Diagnostic &diag() const { return diag_; }

   private:
    Diagnostic diag_;
};

class InternalError : public std::logic_error {
   public:
    using std::logic_error::logic_error;
};

}  // namespace mtc

#endif
