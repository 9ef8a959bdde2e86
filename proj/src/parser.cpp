#include "parser.hpp"

#include <cctype>
#include <map>

namespace mtc {

namespace {

[[noreturn]] void fail(const std::string &msg, SourceSpan span) {
    throw CompileError(Diagnostic{msg, span});
}

[[noreturn]] void fail_at(const std::string &msg, SourcePos pos) {
    fail(msg, SourceSpan{pos, pos});
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class TokKind { Atom, Var, Int, Punct, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;
    long long value = 0;
    SourcePos begin, end;
};

class Lexer {
   public:
    explicit Lexer(std::string_view text) : text_(text) { advance(); }

    const Token &peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

   private:
    void advance() {
        skip_layout();
        tok_ = Token{};
        tok_.begin = pos();
        if (at_end()) {
            tok_.kind = TokKind::End;
            tok_.end = pos();
            return;
        }
        char c = cur();
        if (std::isdigit(static_cast<unsigned char>(c))) {
            long long v = 0;
            while (!at_end() && std::isdigit(static_cast<unsigned char>(cur()))) {
                v = v * 10 + (cur() - '0');
                bump();
            }
            tok_.kind = TokKind::Int;
            tok_.value = v;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name;
            while (!at_end() && (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_')) {
                name += cur();
                bump();
            }
            tok_.kind = (std::isupper(static_cast<unsigned char>(c)) || c == '_') ? TokKind::Var
                                                                                  : TokKind::Atom;
            tok_.text = std::move(name);
        } else {
            tok_.kind = TokKind::Punct;
            if (match("--->")) tok_.text = "--->";
            else if (match(":-")) tok_.text = ":-";
            else if (match("=<")) tok_.text = "=<";
            else if (match(">=")) tok_.text = ">=";
            else if (std::string("()[],|;.=<>+-*/").find(c) != std::string::npos) {
                tok_.text = std::string(1, c);
                bump();
            } else {
                fail_at(std::string("unexpected character '") + c + "'", pos());
            }
        }
        tok_.end = pos();
    }

    void skip_layout() {
        while (!at_end()) {
            char c = cur();
            if (c == '%') {
                while (!at_end() && cur() != '\n') bump();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                bump();
            } else {
                break;
            }
        }
    }

    bool match(std::string_view s) {
        if (text_.substr(idx_, s.size()) != s) return false;
        for (size_t i = 0; i < s.size(); ++i) bump();
        return true;
    }

    bool at_end() const { return idx_ >= text_.size(); }
    char cur() const { return text_[idx_]; }

    void bump() {
        if (text_[idx_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++idx_;
    }

    SourcePos pos() const { return SourcePos{line_, col_}; }

    std::string_view text_;
    size_t idx_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

// ---------------------------------------------------------------------------
// Term parser
// ---------------------------------------------------------------------------

struct OpEntry {
    int prec;
    bool left_assoc;
};

const std::map<std::string, OpEntry> &term_ops() {
    static const std::map<std::string, OpEntry> ops = {
        {";", {1100, false}}, {",", {1000, false}},
        {"=", {700, false}},  {"<", {700, false}},  {">", {700, false}},
        {"=<", {700, false}}, {">=", {700, false}}, {"is", {700, false}},
        {"+", {500, true}},   {"-", {500, true}},
        {"*", {400, true}},   {"/", {400, true}},
    };
    return ops;
}

class TermParser {
   public:
    explicit TermParser(Lexer &lex) : lex_(lex) {}

    // Parses a term whose top-level operators bind no looser than max_prec.
    Term parse(int max_prec) {
        Term left = parse_primary();
        for (;;) {
            const Token &t = lex_.peek();
            std::string op;
            if (t.kind == TokKind::Punct) op = t.text;
            else if (t.kind == TokKind::Atom && t.text == "is") op = "is";
            else break;
            auto it = term_ops().find(op);
            if (it == term_ops().end()) break;
            const OpEntry &e = it->second;
            if (e.prec > max_prec) break;
            lex_.next();
            int right_max = e.left_assoc ? e.prec - 1 : e.prec;
            // Comparisons are non-associative; both sides bind tighter.
            if (e.prec == 700) right_max = e.prec - 1;
            Term right = parse(right_max);
            SourceSpan span{left.span.begin, right.span.end};
            left = Term::compound(op, {std::move(left), std::move(right)});
            left.span = span;
            if (e.prec == 700 || !e.left_assoc) {
                if (e.prec == 700) {
                    // non-assoc: stop combining at this level
                    const Token &n = lex_.peek();
                    if (n.kind == TokKind::Punct && term_ops().count(n.text) &&
                        term_ops().at(n.text).prec == 700)
                        fail("operators of the same precedence cannot be chained",
                             SourceSpan{n.begin, n.end});
                }
            }
        }
        return left;
    }

    Term parse_primary() {
        Token t = lex_.peek();
        switch (t.kind) {
            case TokKind::Int: {
                lex_.next();
                Term r = Term::integer(t.value);
                r.span = {t.begin, t.end};
                return r;
            }
            case TokKind::Var: {
                lex_.next();
                Term r = Term::var(t.text == "_" ? fresh_anon() : t.text);
                r.span = {t.begin, t.end};
                return r;
            }
            case TokKind::Atom: {
                lex_.next();
                if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == "(" &&
                    !t.text.empty()) {
                    lex_.next();
                    std::vector<Term> args;
                    if (!(lex_.peek().kind == TokKind::Punct && lex_.peek().text == ")")) {
                        args.push_back(parse(999));
                        while (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ",") {
                            lex_.next();
                            args.push_back(parse(999));
                        }
                    }
                    Token close = expect_punct(")");
                    Term r = Term::compound(t.text, std::move(args));
                    r.span = {t.begin, close.end};
                    return r;
                }
                Term r = Term::atom(t.text);
                r.span = {t.begin, t.end};
                return r;
            }
            case TokKind::Punct:
                break;
            case TokKind::End:
                fail_at("unexpected end of input", t.begin);
        }
        if (t.text == "[") return parse_list();
        if (t.text == "(") {
            lex_.next();
            if (lex_.peek().kind == TokKind::Atom && lex_.peek().text == "if")
                return parse_if_then_else(t.begin);
            Term inner = parse(1200);
            Token close = expect_punct(")");
            inner.span = {t.begin, close.end};
            return inner;
        }
        if (t.text == "-") {
            lex_.next();
            Token num = lex_.peek();
            if (num.kind != TokKind::Int)
                fail_at("expected integer after unary '-'", num.begin);
            lex_.next();
            Term r = Term::integer(-num.value);
            r.span = {t.begin, num.end};
            return r;
        }
        fail_at("unexpected token '" + t.text + "'", t.begin);
    }

    Term parse_list() {
        Token open = expect_punct("[");
        if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == "]") {
            Token close = lex_.next();
            Term r = Term::atom(kNilName);
            r.span = {open.begin, close.end};
            return r;
        }
        std::vector<Term> elems;
        elems.push_back(parse(999));
        while (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ",") {
            lex_.next();
            elems.push_back(parse(999));
        }
        Term tail = Term::atom(kNilName);
        if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == "|") {
            lex_.next();
            tail = parse(999);
        }
        Token close = expect_punct("]");
        Term r = std::move(tail);
        for (auto it = elems.rbegin(); it != elems.rend(); ++it)
            r = Term::compound(kConsName, {*it, std::move(r)});
        r.span = {open.begin, close.end};
        return r;
    }

    Term parse_if_then_else(SourcePos start) {
        expect_atom("if");
        Term cond = parse(1200);
        expect_atom("then");
        Term then_t = parse(1200);
        expect_atom("else");
        Term else_t = parse(1200);
        Token close = expect_punct(")");
        Term r = Term::compound("$ite", {std::move(cond), std::move(then_t), std::move(else_t)});
        r.span = {start, close.end};
        return r;
    }

    Token expect_punct(const std::string &p) {
        Token t = lex_.peek();
        if (t.kind != TokKind::Punct || t.text != p)
            fail_at("expected '" + p + "'", t.begin);
        return lex_.next();
    }

    Token expect_atom(const std::string &a) {
        Token t = lex_.peek();
        if (t.kind != TokKind::Atom || t.text != a)
            fail_at("expected '" + a + "'", t.begin);
        return lex_.next();
    }

   private:
    std::string fresh_anon() { return "$anon" + std::to_string(anon_counter_++); }

    Lexer &lex_;
    int anon_counter_ = 0;
};

// Renames parser-generated anonymous variables to legal fresh names of the
// form _A<k>, avoiding any variable name already present.
void rename_anons(Term &t, std::map<std::string, std::string> &mapping,
                  const std::set<std::string> &taken, int &counter) {
    if (t.is_var()) {
        if (t.name.rfind("$anon", 0) == 0) {
            auto it = mapping.find(t.name);
            if (it == mapping.end()) {
                std::string fresh;
                do {
                    fresh = "_A" + std::to_string(++counter);
                } while (taken.count(fresh));
                it = mapping.emplace(t.name, fresh).first;
            }
            t.name = it->second;
        }
        return;
    }
    for (auto &a : t.args) rename_anons(a, mapping, taken, counter);
}

void finalize_anons(std::vector<Term *> terms) {
    std::set<std::string> taken;
    for (Term *t : terms) collect_vars(*t, taken);
    std::map<std::string, std::string> mapping;
    int counter = 0;
    for (Term *t : terms) rename_anons(*t, mapping, taken, counter);
}

}  // namespace

// ---------------------------------------------------------------------------
// Term -> goal / type expression
// ---------------------------------------------------------------------------

Goal term_to_goal(const Term &t) {
    switch (t.kind) {
        case TermKind::Variable:
            fail("variable cannot be used as a goal", t.span);
        case TermKind::Integer:
            fail("integer cannot be used as a goal", t.span);
        case TermKind::Compound:
            break;
    }
    if (t.name == "," && t.args.size() == 2) {
        std::vector<Goal> gs;
        // conjunctions are flattened completely; nesting carries no meaning
        std::vector<const Term *> stack{&t};
        while (!stack.empty()) {
            const Term *cur = stack.back();
            stack.pop_back();
            if (cur->is_compound() && cur->name == "," && cur->args.size() == 2) {
                stack.push_back(&cur->args[1]);
                stack.push_back(&cur->args[0]);
            } else {
                gs.push_back(term_to_goal(*cur));
            }
        }
        Goal g = Goal::conj(std::move(gs));
        g.span = t.span;
        return g;
    }
    if (t.name == ";" && t.args.size() == 2) {
        // only the right spine is unfolded; parenthesised nested disjunctions
        // keep their structure (switch trees depend on it)
        std::vector<Goal> gs;
        const Term *cur = &t;
        while (cur->is_compound() && cur->name == ";" && cur->args.size() == 2) {
            gs.push_back(term_to_goal(cur->args[0]));
            cur = &cur->args[1];
        }
        gs.push_back(term_to_goal(*cur));
        Goal g = Goal::disj(std::move(gs));
        g.span = t.span;
        return g;
    }
    if (t.name == "=" && t.args.size() == 2) {
        Goal g = Goal::unify(t.args[0], t.args[1]);
        g.span = t.span;
        return g;
    }
    if (t.name == "not" && t.args.size() == 1) {
        Goal g = Goal::negation(term_to_goal(t.args[0]));
        g.span = t.span;
        return g;
    }
    if (t.name == "$ite" && t.args.size() == 3) {
        Goal g = Goal::ite(term_to_goal(t.args[0]), term_to_goal(t.args[1]),
                           term_to_goal(t.args[2]));
        g.span = t.span;
        return g;
    }
    Goal g = Goal::call(t.name, t.args);
    g.span = t.span;
    return g;
}

TypeExpr term_to_type_expr(const Term &t) {
    switch (t.kind) {
        case TermKind::Variable:
            return TypeExpr{t.name, {}};
        case TermKind::Integer:
            fail("integer cannot be used as a type", t.span);
        case TermKind::Compound:
            break;
    }
    TypeExpr e;
    e.name = t.name;
    for (const auto &a : t.args) e.params.push_back(term_to_type_expr(a));
    return e;
}

// ---------------------------------------------------------------------------
// Program parser
// ---------------------------------------------------------------------------

namespace {

class ProgramParser {
   public:
    explicit ProgramParser(std::string_view text) : lex_(text) {}

    Program parse() {
        while (lex_.peek().kind != TokKind::End) {
            if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ":-") {
                lex_.next();
                parse_declaration();
            } else {
                parse_clause();
            }
        }
        validate();
        return std::move(program_);
    }

   private:
    void parse_declaration() {
        Token kw = lex_.peek();
        if (kw.kind != TokKind::Atom)
            fail_at("expected 'type', 'pred' or 'mode' after ':-'", kw.begin);
        if (kw.text == "type") {
            lex_.next();
            parse_type_def(kw.begin);
        } else if (kw.text == "pred") {
            lex_.next();
            parse_pred_decl(kw.begin);
        } else if (kw.text == "mode") {
            lex_.next();
            parse_mode_decl(kw.begin);
        } else {
            fail_at("unknown declaration '" + kw.text + "'", kw.begin);
        }
    }

    void parse_type_def(SourcePos start) {
        TermParser tp(lex_);
        Token name_tok = lex_.peek();
        if (name_tok.kind != TokKind::Atom) fail_at("expected type name", name_tok.begin);
        TypeDef def;
        def.name = lex_.next().text;
        if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == "(") {
            lex_.next();
            for (;;) {
                Token v = lex_.peek();
                if (v.kind != TokKind::Var) fail_at("expected type parameter", v.begin);
                lex_.next();
                if (std::find(def.params.begin(), def.params.end(), v.text) != def.params.end())
                    fail_at("duplicate type parameter " + v.text, v.begin);
                def.params.push_back(v.text);
                if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ",") {
                    lex_.next();
                    continue;
                }
                tp.expect_punct(")");
                break;
            }
        }
        Token arrow = lex_.peek();
        if (!(arrow.kind == TokKind::Punct && arrow.text == "--->"))
            fail_at("expected '--->' in type definition", arrow.begin);
        lex_.next();
        Term ctors = tp.parse(1100);
        expect_dot();
        const Term *cur = &ctors;
        std::vector<const Term *> list;
        while (cur->is_compound() && cur->name == ";" && cur->args.size() == 2) {
            list.push_back(&cur->args[0]);
            cur = &cur->args[1];
        }
        list.push_back(cur);
        for (const Term *c : list) {
            if (!c->is_compound()) fail("invalid constructor in type definition", c->span);
            TypeCtor ctor;
            ctor.name = c->name;
            for (const auto &a : c->args) ctor.args.push_back(term_to_type_expr(a));
            def.ctors.push_back(std::move(ctor));
        }
        def.span = {start, ctors.span.end};
        if (program_.find_type(def.name))
            fail("duplicate type definition for " + def.name, def.span);
        program_.type_defs.push_back(std::move(def));
    }

    void parse_pred_decl(SourcePos start) {
        Token name_tok = lex_.peek();
        if (name_tok.kind != TokKind::Atom) fail_at("expected predicate name", name_tok.begin);
        std::string name = lex_.next().text;
        std::vector<TypeExpr> sig;
        if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == "(") {
            TermParser tp(lex_);
            lex_.next();
            for (;;) {
                Term t = tp.parse(999);
                sig.push_back(term_to_type_expr(t));
                if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ",") {
                    lex_.next();
                    continue;
                }
                tp.expect_punct(")");
                break;
            }
        }
        expect_dot();
        int arity = static_cast<int>(sig.size());
        PredicateDef *pred = program_.find_predicate(name, arity);
        if (pred && pred->has_type_sig)
            fail_at("duplicate pred declaration for " + name + "/" + std::to_string(arity),
                    start);
        if (!pred) pred = &new_predicate(name, arity, start);
        pred->type_sig = std::move(sig);
        pred->has_type_sig = true;
    }

    void parse_mode_decl(SourcePos start) {
        Token name_tok = lex_.peek();
        if (name_tok.kind != TokKind::Atom) fail_at("expected predicate name", name_tok.begin);
        std::string name = lex_.next().text;
        ModeDecl decl;
        if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == "(") {
            lex_.next();
            for (;;) {
                Token m = lex_.peek();
                if (m.kind != TokKind::Atom || (m.text != "in" && m.text != "out"))
                    fail_at("expected 'in' or 'out'", m.begin);
                lex_.next();
                decl.arg_modes.push_back(m.text == "in" ? ArgMode::In : ArgMode::Out);
                if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ",") {
                    lex_.next();
                    continue;
                }
                TermParser(lex_).expect_punct(")");
                break;
            }
        }
        Token is_tok = lex_.peek();
        if (!(is_tok.kind == TokKind::Atom && is_tok.text == "is"))
            fail_at("expected 'is' in mode declaration", is_tok.begin);
        lex_.next();
        Token det_tok = lex_.peek();
        auto det = det_tok.kind == TokKind::Atom ? determinism_from_string(det_tok.text)
                                                 : std::nullopt;
        if (!det) fail_at("expected determinism (det/semidet/multi/nondet)", det_tok.begin);
        lex_.next();
        decl.determinism = *det;
        decl.span = {start, det_tok.end};
        expect_dot();

        int arity = static_cast<int>(decl.arg_modes.size());
        PredicateDef *pred = program_.find_predicate(name, arity);
        if (!pred) pred = &new_predicate(name, arity, start);
        for (const auto &m : pred->modes)
            if (m.arg_modes == decl.arg_modes)
                fail("duplicate mode declaration for " + name + "/" + std::to_string(arity),
                     decl.span);
        pred->modes.push_back(std::move(decl));
    }

    void parse_clause() {
        TermParser tp(lex_);
        Term head = tp.parse(699);
        if (!head.is_compound() || head.is_cons() || head.is_nil() ||
            term_ops().count(head.name))
            fail("invalid clause head", head.span);
        Clause clause;
        Term body_term = Term::atom("$empty");
        bool has_body = false;
        if (lex_.peek().kind == TokKind::Punct && lex_.peek().text == ":-") {
            lex_.next();
            body_term = tp.parse(1200);
            has_body = true;
        }
        Token dot = expect_dot();

        std::vector<Term *> anon_scope{&head};
        if (has_body) anon_scope.push_back(&body_term);
        finalize_anons(anon_scope);

        clause.head_args = head.args;
        clause.body = has_body ? term_to_goal(body_term) : Goal::conj({});
        clause.span = {head.span.begin, dot.end};

        const std::string &name = head.name;
        int arity = static_cast<int>(head.args.size());
        PredicateDef *pred = program_.find_predicate(name, arity);
        if (!pred) pred = &new_predicate(name, arity, head.span.begin);
        pred->clauses.push_back(std::move(clause));
    }

    PredicateDef &new_predicate(const std::string &name, int arity, SourcePos at) {
        if (is_builtin(name, arity) || is_coverage_builtin(name, arity))
            fail_at("cannot define builtin predicate " + name + "/" + std::to_string(arity), at);
        PredicateDef p;
        p.name = name;
        p.arity = arity;
        p.span = {at, at};
        program_.predicates.push_back(std::move(p));
        return program_.predicates.back();
    }

    Token expect_dot() {
        Token t = lex_.peek();
        if (!(t.kind == TokKind::Punct && t.text == "."))
            fail_at("expected '.' at end of clause", t.begin);
        return lex_.next();
    }

    void validate() {
        for (const auto &pred : program_.predicates) {
            if (pred.clauses.empty()) {
                if (!pred.modes.empty() || pred.has_type_sig)
                    fail_at("no clauses for predicate " + pred.name + "/" +
                                std::to_string(pred.arity),
                            pred.span.begin);
            }
            if (pred.has_type_sig &&
                static_cast<int>(pred.type_sig.size()) != pred.arity)
                fail_at("pred declaration arity mismatch for " + pred.name, pred.span.begin);
            for (const auto &m : pred.modes)
                if (static_cast<int>(m.arg_modes.size()) != pred.arity)
                    fail("mode declaration arity mismatch for " + pred.name, m.span);
            // A clause whose arity disagrees with every declaration of the
            // same name is almost always a typo; report it as such.
            if (!pred.has_type_sig && pred.modes.empty()) {
                for (const auto &other : program_.predicates) {
                    if (&other != &pred && other.name == pred.name &&
                        (other.has_type_sig || !other.modes.empty()) && !pred.clauses.empty())
                        fail("clause head arity mismatch for " + pred.name + "/" +
                                 std::to_string(pred.arity) + " (declared with arity " +
                                 std::to_string(other.arity) + ")",
                             pred.clauses.front().span);
                }
            }
            for (const auto &c : pred.clauses) check_calls(c.body);
        }
    }

    void check_calls(const Goal &g) {
        if (g.kind == GoalKind::Call) {
            int arity = static_cast<int>(g.args.size());
            if (is_builtin(g.callee, arity) || is_coverage_builtin(g.callee, arity)) return;
            const PredicateDef *callee = program_.find_predicate(g.callee, arity);
            if (!callee || callee->clauses.empty())
                fail("undefined predicate " + g.callee + "/" + std::to_string(arity), g.span);
            return;
        }
        for (const auto &c : g.children) check_calls(c);
    }

    Lexer lex_;
    Program program_;
};

}  // namespace

Program parse_program(std::string_view text) { return ProgramParser(text).parse(); }

Term parse_term_text(std::string_view text) {
    Lexer lex(text);
    TermParser tp(lex);
    Term t = tp.parse(1200);
    if (lex.peek().kind == TokKind::Punct && lex.peek().text == ".") lex.next();
    if (lex.peek().kind != TokKind::End)
        fail_at("unexpected input after term", lex.peek().begin);
    finalize_anons({&t});
    return t;
}

Goal parse_goal_text(std::string_view text) { return term_to_goal(parse_term_text(text)); }

std::vector<Term> parse_suite_terms(std::string_view text) {
    Lexer lex(text);
    std::vector<Term> terms;
    while (lex.peek().kind != TokKind::End) {
        TermParser tp(lex);
        Term t = tp.parse(1200);
        Token dot = lex.peek();
        if (!(dot.kind == TokKind::Punct && dot.text == "."))
            fail_at("expected '.' after term", dot.begin);
        lex.next();
        finalize_anons({&t});
        terms.push_back(std::move(t));
    }
    return terms;
}

}  // namespace mtc
