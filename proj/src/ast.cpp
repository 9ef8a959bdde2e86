#include "ast.hpp"

#include <algorithm>
#include <sstream>

namespace mtc {

std::string to_string(const SourcePos &p) {
    return std::to_string(p.line) + ":" + std::to_string(p.col);
}

std::string to_string(const SourceSpan &s) {
    return to_string(s.begin) + "-" + to_string(s.end);
}

std::string Diagnostic::render() const {
    if (span.known()) return to_string(span.begin) + ": " + message;
    return message;
}

// ---------------------------------------------------------------------------
// Term construction
// ---------------------------------------------------------------------------

Term Term::var(std::string n) {
    Term t;
    t.kind = TermKind::Variable;
    t.name = std::move(n);
    return t;
}

Term Term::integer(long long v) {
    Term t;
    t.kind = TermKind::Integer;
    t.value = v;
    return t;
}

Term Term::atom(std::string n) {
    Term t;
    t.kind = TermKind::Compound;
    t.name = std::move(n);
    return t;
}

Term Term::compound(std::string n, std::vector<Term> a) {
    Term t;
    t.kind = TermKind::Compound;
    t.name = std::move(n);
    t.args = std::move(a);
    return t;
}

Term Term::list(const std::vector<Term> &elems) {
    Term t = Term::atom(kNilName);
    for (auto it = elems.rbegin(); it != elems.rend(); ++it)
        t = Term::compound(kConsName, {*it, t});
    return t;
}

bool term_equal(const Term &a, const Term &b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case TermKind::Variable: return a.name == b.name;
        case TermKind::Integer: return a.value == b.value;
        case TermKind::Compound:
            if (a.name != b.name || a.args.size() != b.args.size()) return false;
            for (size_t i = 0; i < a.args.size(); ++i)
                if (!term_equal(a.args[i], b.args[i])) return false;
            return true;
    }
    return false;
}

bool term_less(const Term &a, const Term &b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    switch (a.kind) {
        case TermKind::Variable: return a.name < b.name;
        case TermKind::Integer: return a.value < b.value;
        case TermKind::Compound: {
            if (a.name != b.name) return a.name < b.name;
            if (a.args.size() != b.args.size()) return a.args.size() < b.args.size();
            for (size_t i = 0; i < a.args.size(); ++i) {
                if (term_less(a.args[i], b.args[i])) return true;
                if (term_less(b.args[i], a.args[i])) return false;
            }
            return false;
        }
    }
    return false;
}

void collect_vars(const Term &t, std::set<std::string> &out) {
    if (t.is_var()) {
        out.insert(t.name);
        return;
    }
    for (const auto &a : t.args) collect_vars(a, out);
}

bool term_is_ground(const Term &t) {
    if (t.is_var()) return false;
    for (const auto &a : t.args)
        if (!term_is_ground(a)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Term printing
// ---------------------------------------------------------------------------

namespace {

// Operator table for infix printing; mirrors the parser's precedences.
struct OpInfo {
    int prec;
    bool left_assoc;
};

const std::map<std::string, OpInfo> &infix_ops() {
    static const std::map<std::string, OpInfo> ops = {
        {";", {1100, false}}, {",", {1000, false}},
        {"=", {700, false}},  {"<", {700, false}},  {">", {700, false}},
        {"=<", {700, false}}, {">=", {700, false}}, {"is", {700, false}},
        {"+", {500, true}},   {"-", {500, true}},
        {"*", {400, true}},   {"/", {400, true}},
    };
    return ops;
}

int term_prec(const Term &t) {
    if (t.is_compound() && t.args.size() == 2) {
        auto it = infix_ops().find(t.name);
        if (it != infix_ops().end()) return it->second.prec;
    }
    if (t.is_int() && t.value < 0) return 200;
    return 0;
}

void print_term(std::ostringstream &os, const Term &t, int max_prec);

void print_list(std::ostringstream &os, const Term &t) {
    os << '[';
    const Term *cur = &t;
    bool first = true;
    while (cur->is_cons()) {
        if (!first) os << ',';
        print_term(os, cur->args[0], 999);
        first = false;
        cur = &cur->args[1];
    }
    if (!cur->is_nil()) {
        os << '|';
        print_term(os, *cur, 999);
    }
    os << ']';
}

void print_term(std::ostringstream &os, const Term &t, int max_prec) {
    switch (t.kind) {
        case TermKind::Variable:
            os << t.name;
            return;
        case TermKind::Integer: {
            bool paren = t.value < 0 && term_prec(t) > max_prec;
            if (paren) os << '(';
            os << t.value;
            if (paren) os << ')';
            return;
        }
        case TermKind::Compound:
            break;
    }
    if (t.is_cons() || t.is_nil()) {
        print_list(os, t);
        return;
    }
    if (t.args.size() == 2) {
        auto it = infix_ops().find(t.name);
        if (it != infix_ops().end()) {
            const OpInfo &op = it->second;
            bool paren = op.prec > max_prec;
            if (paren) os << '(';
            print_term(os, t.args[0], op.left_assoc ? op.prec : op.prec - 1);
            os << ' ' << t.name << ' ';
            print_term(os, t.args[1], op.prec - (op.left_assoc ? 1 : 0));
            if (paren) os << ')';
            return;
        }
    }
    os << t.name;
    if (!t.args.empty()) {
        os << '(';
        for (size_t i = 0; i < t.args.size(); ++i) {
            if (i) os << ", ";
            print_term(os, t.args[i], 999);
        }
        os << ')';
    }
}

}  // namespace

std::string term_to_text(const Term &t) {
    std::ostringstream os;
    print_term(os, t, 1200);
    return os.str();
}

// ---------------------------------------------------------------------------
// Type expressions
// ---------------------------------------------------------------------------

bool TypeExpr::is_type_var() const {
    return !name.empty() && (std::isupper(static_cast<unsigned char>(name[0])) || name[0] == '_');
}

std::string type_expr_to_text(const TypeExpr &t) {
    std::string s = t.name;
    if (!t.params.empty()) {
        s += '(';
        for (size_t i = 0; i < t.params.size(); ++i) {
            if (i) s += ", ";
            s += type_expr_to_text(t.params[i]);
        }
        s += ')';
    }
    return s;
}

bool type_expr_equal(const TypeExpr &a, const TypeExpr &b) {
    if (a.name != b.name || a.params.size() != b.params.size()) return false;
    for (size_t i = 0; i < a.params.size(); ++i)
        if (!type_expr_equal(a.params[i], b.params[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Goals
// ---------------------------------------------------------------------------

Goal Goal::unify(Term l, Term r) {
    Goal g;
    g.kind = GoalKind::Unify;
    g.lhs = std::move(l);
    g.rhs = std::move(r);
    return g;
}

Goal Goal::call(std::string name, std::vector<Term> a) {
    Goal g;
    g.kind = GoalKind::Call;
    g.callee = std::move(name);
    g.args = std::move(a);
    return g;
}

Goal Goal::conj(std::vector<Goal> gs) {
    Goal g;
    g.kind = GoalKind::Conjunction;
    g.children = std::move(gs);
    return g;
}

Goal Goal::disj(std::vector<Goal> gs) {
    Goal g;
    g.kind = GoalKind::Disjunction;
    g.children = std::move(gs);
    return g;
}

Goal Goal::negation(Goal inner) {
    Goal g;
    g.kind = GoalKind::Negation;
    g.children.push_back(std::move(inner));
    return g;
}

Goal Goal::ite(Goal c, Goal t, Goal e) {
    Goal g;
    g.kind = GoalKind::IfThenElse;
    g.children.push_back(std::move(c));
    g.children.push_back(std::move(t));
    g.children.push_back(std::move(e));
    return g;
}

void collect_goal_vars(const Goal &g, std::set<std::string> &out) {
    switch (g.kind) {
        case GoalKind::Unify:
            collect_vars(g.lhs, out);
            collect_vars(g.rhs, out);
            break;
        case GoalKind::Call:
            for (const auto &a : g.args) collect_vars(a, out);
            break;
        default:
            for (const auto &c : g.children) collect_goal_vars(c, out);
            break;
    }
}

bool goal_equal(const Goal &a, const Goal &b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case GoalKind::Unify:
            return term_equal(a.lhs, b.lhs) && term_equal(a.rhs, b.rhs);
        case GoalKind::Call: {
            if (a.callee != b.callee || a.args.size() != b.args.size()) return false;
            for (size_t i = 0; i < a.args.size(); ++i)
                if (!term_equal(a.args[i], b.args[i])) return false;
            return true;
        }
        default: {
            if (a.children.size() != b.children.size()) return false;
            for (size_t i = 0; i < a.children.size(); ++i)
                if (!goal_equal(a.children[i], b.children[i])) return false;
            return true;
        }
    }
}

namespace {

void print_goal_inline(std::ostringstream &os, const Goal &g) {
    switch (g.kind) {
        case GoalKind::Unify:
            os << term_to_text(g.lhs) << " = " << term_to_text(g.rhs);
            return;
        case GoalKind::Call: {
            if (g.args.size() == 2 && infix_ops().count(g.callee) && g.callee != "," && g.callee != ";") {
                os << term_to_text(Term::compound(g.callee, {g.args[0], g.args[1]}));
                return;
            }
            os << g.callee;
            if (!g.args.empty()) {
                os << '(';
                for (size_t i = 0; i < g.args.size(); ++i) {
                    if (i) os << ", ";
                    os << term_to_text(g.args[i]);
                }
                os << ')';
            }
            return;
        }
        case GoalKind::Conjunction: {
            if (g.children.empty()) {
                os << "true";  // only used for display of empty bodies
                return;
            }
            if (g.children.size() == 1) {
                print_goal_inline(os, g.children[0]);
                return;
            }
            os << '(';
            for (size_t i = 0; i < g.children.size(); ++i) {
                if (i) os << ", ";
                print_goal_inline(os, g.children[i]);
            }
            os << ')';
            return;
        }
        case GoalKind::Disjunction: {
            os << '(';
            for (size_t i = 0; i < g.children.size(); ++i) {
                if (i) os << " ; ";
                print_goal_inline(os, g.children[i]);
            }
            os << ')';
            return;
        }
        case GoalKind::Negation:
            os << "not(";
            print_goal_inline(os, g.children[0]);
            os << ')';
            return;
        case GoalKind::IfThenElse:
            os << "(if ";
            print_goal_inline(os, g.children[0]);
            os << " then ";
            print_goal_inline(os, g.children[1]);
            os << " else ";
            print_goal_inline(os, g.children[2]);
            os << ')';
            return;
    }
}

}  // namespace

std::string goal_to_text(const Goal &g) {
    std::ostringstream os;
    print_goal_inline(os, g);
    return os.str();
}

// ---------------------------------------------------------------------------
// Modes, determinism
// ---------------------------------------------------------------------------

std::string to_string(ArgMode m) { return m == ArgMode::In ? "in" : "out"; }

std::string to_string(Determinism d) {
    switch (d) {
        case Determinism::Det: return "det";
        case Determinism::Semidet: return "semidet";
        case Determinism::Multi: return "multi";
        case Determinism::Nondet: return "nondet";
    }
    return "nondet";
}

std::optional<Determinism> determinism_from_string(const std::string &s) {
    if (s == "det") return Determinism::Det;
    if (s == "semidet") return Determinism::Semidet;
    if (s == "multi") return Determinism::Multi;
    if (s == "nondet") return Determinism::Nondet;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

const TypeDef *Program::find_type(const std::string &name) const {
    for (const auto &t : type_defs)
        if (t.name == name) return &t;
    return nullptr;
}

const PredicateDef *Program::find_predicate(const std::string &name, int arity) const {
    for (const auto &p : predicates)
        if (p.name == name && p.arity == arity) return &p;
    return nullptr;
}

PredicateDef *Program::find_predicate(const std::string &name, int arity) {
    for (auto &p : predicates)
        if (p.name == name && p.arity == arity) return &p;
    return nullptr;
}

bool is_builtin(const std::string &name, int arity) {
    if (arity == 2)
        return name == "=" || name == "<" || name == ">" || name == "=<" ||
               name == ">=" || name == "is" || name == "length";
    if (arity == 1) return name == "throw" || name == "print";
    return false;
}

bool is_coverage_builtin(const std::string &name, int arity) {
    return (name == "log" && arity == 1) || (name == "log_leaf" && arity == 1) ||
           (name == "coverage_plan" && arity == 2);
}

// ---------------------------------------------------------------------------
// Program printing
// ---------------------------------------------------------------------------

namespace {

std::string type_ctor_to_text(const TypeCtor &c) {
    if (c.name == kNilName && c.args.empty()) return "[]";
    if (c.name == kConsName && c.args.size() == 2)
        return "[" + type_expr_to_text(c.args[0]) + "|" + type_expr_to_text(c.args[1]) + "]";
    std::string s = c.name;
    if (!c.args.empty()) {
        s += '(';
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (i) s += ", ";
            s += type_expr_to_text(c.args[i]);
        }
        s += ')';
    }
    return s;
}

// Multi-line goal printer used for whole-program output; one atomic goal per
// line so instrumented listings diff cleanly against their originals.
void print_goal_block(std::ostringstream &os, const Goal &g, int indent);

void print_conj_block(std::ostringstream &os, const std::vector<Goal> &gs, int indent) {
    const std::string pad(indent, ' ');
    for (size_t i = 0; i < gs.size(); ++i) {
        print_goal_block(os, gs[i], indent);
        if (i + 1 < gs.size()) os << ",\n";
    }
    if (gs.empty()) os << pad << "true";
}

void print_goal_block(std::ostringstream &os, const Goal &g, int indent) {
    const std::string pad(indent, ' ');
    switch (g.kind) {
        case GoalKind::Unify:
        case GoalKind::Call:
            os << pad;
            print_goal_inline(os, g);
            return;
        case GoalKind::Conjunction:
            print_conj_block(os, g.children, indent);
            return;
        case GoalKind::Disjunction: {
            os << pad << "(\n";
            for (size_t i = 0; i < g.children.size(); ++i) {
                if (i) os << pad << ";\n";
                print_goal_block(os, g.children[i], indent + 2);
                os << "\n";
            }
            os << pad << ")";
            return;
        }
        case GoalKind::Negation: {
            os << pad << "not(\n";
            print_goal_block(os, g.children[0], indent + 2);
            os << "\n" << pad << ")";
            return;
        }
        case GoalKind::IfThenElse: {
            os << pad << "(if\n";
            print_goal_block(os, g.children[0], indent + 2);
            os << "\n" << pad << "then\n";
            print_goal_block(os, g.children[1], indent + 2);
            os << "\n" << pad << "else\n";
            print_goal_block(os, g.children[2], indent + 2);
            os << "\n" << pad << ")";
            return;
        }
    }
}

}  // namespace

std::string type_def_to_text(const TypeDef &t) {
    std::ostringstream os;
    os << ":- type " << t.name;
    if (!t.params.empty()) {
        os << '(';
        for (size_t i = 0; i < t.params.size(); ++i) {
            if (i) os << ", ";
            os << t.params[i];
        }
        os << ')';
    }
    os << " ---> ";
    for (size_t i = 0; i < t.ctors.size(); ++i) {
        if (i) os << " ; ";
        os << type_ctor_to_text(t.ctors[i]);
    }
    os << ".\n";
    return os.str();
}

std::string mode_decl_to_text(const std::string &pred_name,
                              const std::vector<ArgMode> &arg_modes, Determinism det) {
    std::ostringstream os;
    os << ":- mode " << pred_name;
    if (!arg_modes.empty()) {
        os << '(';
        for (size_t i = 0; i < arg_modes.size(); ++i) {
            if (i) os << ", ";
            os << to_string(arg_modes[i]);
        }
        os << ')';
    }
    os << " is " << to_string(det) << ".\n";
    return os.str();
}

std::string program_to_text(const Program &p) {
    std::ostringstream os;
    for (const auto &t : p.type_defs) os << type_def_to_text(t);
    if (!p.type_defs.empty()) os << "\n";

    for (const auto &pred : p.predicates) {
        if (pred.has_type_sig) {
            os << ":- pred " << pred.name;
            if (!pred.type_sig.empty()) {
                os << '(';
                for (size_t i = 0; i < pred.type_sig.size(); ++i) {
                    if (i) os << ", ";
                    os << type_expr_to_text(pred.type_sig[i]);
                }
                os << ')';
            }
            os << ".\n";
        }
        for (const auto &m : pred.modes)
            os << mode_decl_to_text(pred.name, m.arg_modes, m.determinism);
        for (const auto &c : pred.clauses) {
            os << pred.name;
            if (!c.head_args.empty()) {
                os << '(';
                for (size_t i = 0; i < c.head_args.size(); ++i) {
                    if (i) os << ", ";
                    os << term_to_text(c.head_args[i]);
                }
                os << ')';
            }
            bool fact = c.body.kind == GoalKind::Conjunction && c.body.children.empty();
            if (!fact) {
                os << " :-\n";
                print_goal_block(os, c.body, 2);
            }
            os << ".\n";
        }
        os << "\n";
    }
    return os.str();
}

bool program_equal(const Program &a, const Program &b) {
    if (a.type_defs.size() != b.type_defs.size()) return false;
    for (size_t i = 0; i < a.type_defs.size(); ++i) {
        const auto &x = a.type_defs[i], &y = b.type_defs[i];
        if (x.name != y.name || x.params != y.params || x.ctors.size() != y.ctors.size())
            return false;
        for (size_t j = 0; j < x.ctors.size(); ++j) {
            if (x.ctors[j].name != y.ctors[j].name ||
                x.ctors[j].args.size() != y.ctors[j].args.size())
                return false;
            for (size_t k = 0; k < x.ctors[j].args.size(); ++k)
                if (!type_expr_equal(x.ctors[j].args[k], y.ctors[j].args[k])) return false;
        }
    }
    if (a.predicates.size() != b.predicates.size()) return false;
    for (size_t i = 0; i < a.predicates.size(); ++i) {
        const auto &x = a.predicates[i], &y = b.predicates[i];
        if (x.name != y.name || x.arity != y.arity || x.has_type_sig != y.has_type_sig)
            return false;
        if (x.type_sig.size() != y.type_sig.size()) return false;
        for (size_t j = 0; j < x.type_sig.size(); ++j)
            if (!type_expr_equal(x.type_sig[j], y.type_sig[j])) return false;
        if (x.modes.size() != y.modes.size()) return false;
        for (size_t j = 0; j < x.modes.size(); ++j)
            if (x.modes[j].arg_modes != y.modes[j].arg_modes ||
                x.modes[j].determinism != y.modes[j].determinism)
                return false;
        if (x.clauses.size() != y.clauses.size()) return false;
        for (size_t j = 0; j < x.clauses.size(); ++j) {
            if (x.clauses[j].head_args.size() != y.clauses[j].head_args.size()) return false;
            for (size_t k = 0; k < x.clauses[j].head_args.size(); ++k)
                if (!term_equal(x.clauses[j].head_args[k], y.clauses[j].head_args[k]))
                    return false;
            if (!goal_equal(x.clauses[j].body, y.clauses[j].body)) return false;
        }
    }
    return true;
}

}  // namespace mtc
