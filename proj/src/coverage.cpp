#include "coverage.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace mtc {

namespace {

[[noreturn]] void fail(const std::string &msg, SourceSpan span = {}) {
    throw CompileError(Diagnostic{msg, span});
}

}  // namespace

// ---------------------------------------------------------------------------
// Labelling
// ---------------------------------------------------------------------------

namespace {

LabelledGoal label_goal(const Goal &g, int &next);

LabelledConj label_conj(const Goal &conj, int &next) {
    LabelledConj out;
    out.span = conj.span;
    const std::vector<Goal> items =
        conj.kind == GoalKind::Conjunction ? conj.children : std::vector<Goal>{conj};
    out.labels.push_back(next++);
    for (const auto &g : items) {
        out.goals.push_back(label_goal(g, next));
        out.labels.push_back(next++);
    }
    return out;
}

LabelledGoal label_goal(const Goal &g, int &next) {
    LabelledGoal out;
    out.kind = g.kind;
    out.span = g.span;
    switch (g.kind) {
        case GoalKind::Unify:
        case GoalKind::Call:
            out.atomic = g;
            return out;
        case GoalKind::Conjunction:
            // a bare conjunction in goal position is labelled as one branch
            out.branches.push_back(label_conj(g, next));
            return out;
        case GoalKind::Disjunction:
        case GoalKind::Negation:
        case GoalKind::IfThenElse:
            for (const auto &c : g.children) out.branches.push_back(label_conj(c, next));
            return out;
    }
    return out;
}

CounterKind construct_kind(const LabelledGoal &g) {
    switch (g.kind) {
        case GoalKind::Disjunction: return CounterKind::Disjunction;
        case GoalKind::Negation: return CounterKind::Negation;
        case GoalKind::IfThenElse: return CounterKind::IfThenElse;
        default: return CounterKind::Goal;
    }
}

void build_meta_conj(const LabelledConj &c, const std::string &proc, CounterMeta &meta) {
    for (size_t i = 0; i < c.goals.size(); ++i) {
        CounterEntry e;
        e.enter = c.labels[i];
        e.exit = c.labels[i + 1];
        e.kind = construct_kind(c.goals[i]);
        e.proc_name = proc;
        meta.entries.push_back(e);
        for (const auto &b : c.goals[i].branches) build_meta_conj(b, proc, meta);
    }
}

}  // namespace

std::pair<LabelledGoal, int> label_goal_fragment(const Goal &g, int first_id) {
    int next = first_id;
    LabelledGoal out = label_goal(g, next);
    return {std::move(out), next};
}

std::pair<LabelledConj, int> label_conj_fragment(const Goal &conj, int first_id) {
    int next = first_id;
    LabelledConj out = label_conj(conj, next);
    return {std::move(out), next};
}

// ---------------------------------------------------------------------------
// Counter metadata text form
// ---------------------------------------------------------------------------

std::string to_string(CounterKind k) {
    switch (k) {
        case CounterKind::Goal: return "goal";
        case CounterKind::Disjunction: return "disjunction";
        case CounterKind::Switch: return "switch";
        case CounterKind::CondDisjunction: return "cond_disjunction";
        case CounterKind::Negation: return "negation";
        case CounterKind::IfThenElse: return "if_then_else";
        case CounterKind::Procedure: return "procedure";
    }
    return "goal";
}

std::optional<CounterKind> counter_kind_from_string(const std::string &s) {
    if (s == "goal") return CounterKind::Goal;
    if (s == "disjunction") return CounterKind::Disjunction;
    if (s == "switch") return CounterKind::Switch;
    if (s == "cond_disjunction") return CounterKind::CondDisjunction;
    if (s == "negation") return CounterKind::Negation;
    if (s == "if_then_else") return CounterKind::IfThenElse;
    if (s == "procedure") return CounterKind::Procedure;
    return std::nullopt;
}

std::string counter_meta_to_text(const CounterMeta &m) {
    std::ostringstream os;
    for (const auto &e : m.entries) {
        os << e.enter << "\t" << e.exit << "\t" << to_string(e.kind) << "\t" << e.proc_name
           << "\t" << e.span.begin.line << ":" << e.span.begin.col << "\t" << e.span.end.line
           << ":" << e.span.end.col << "\n";
    }
    return os.str();
}

CounterMeta counter_meta_from_text(std::string_view text) {
    CounterMeta meta;
    size_t pos = 0;
    int line_no = 0;
    auto parse_pos = [&](const std::string &s) {
        size_t colon = s.find(':');
        if (colon == std::string::npos)
            fail("malformed meta file line " + std::to_string(line_no));
        return SourcePos{std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    };
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line(text.substr(pos, eol == std::string_view::npos ? eol : eol - pos));
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        size_t start = 0;
        for (;;) {
            size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() != 6) fail("malformed meta file line " + std::to_string(line_no));
        CounterEntry e;
        e.enter = std::stoi(cols[0]);
        e.exit = std::stoi(cols[1]);
        auto kind = counter_kind_from_string(cols[2]);
        if (!kind) fail("unknown counter kind '" + cols[2] + "' in meta file");
        e.kind = *kind;
        e.proc_name = cols[3];
        e.span.begin = parse_pos(cols[4]);
        e.span.end = parse_pos(cols[5]);
        meta.label_count = std::max({meta.label_count, e.enter, e.exit});
        meta.entries.push_back(std::move(e));
    }
    return meta;
}

// ---------------------------------------------------------------------------
// Listing renderer (records spans into the meta entries)
// ---------------------------------------------------------------------------

namespace {

class Emitter {
   public:
    void write(std::string_view s) {
        for (char c : s) {
            out_ += c;
            if (c == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
        }
    }

    SourcePos pos() const { return SourcePos{line_, col_}; }
    const std::string &text() const { return out_; }

   private:
    std::string out_;
    int line_ = 1, col_ = 1;
};

using SpanKey = std::tuple<int, int, int>;  // enter, exit, kind

SpanKey span_key(int enter, int exit, CounterKind kind) {
    return {enter, exit, static_cast<int>(kind)};
}

class ListingRenderer {
   public:
    std::map<SpanKey, SourceSpan> spans;

    std::string render(const LabelledProgram &lp) {
        for (const auto &t : lp.type_defs) em_.write(type_def_to_text(t));
        if (!lp.type_defs.empty()) em_.write("\n");
        for (const auto &proc : lp.procs) render_proc(proc);
        return em_.text();
    }

   private:
    void render_proc(const LabelledProcedure &proc) {
        em_.write(mode_decl_to_text(proc.name, proc.arg_modes, proc.determinism));
        if (proc.wrapped)
            em_.write(mode_decl_to_text(proc.body_name, proc.arg_modes, proc.determinism));
        SourcePos proc_begin = em_.pos();
        if (proc.wrapped) {
            std::string args = head_args_text(static_cast<int>(proc.arg_modes.size()));
            em_.write(proc.name + args + " :-\n");
            em_.write("  log(" + std::to_string(proc.entry_label) + "),\n");
            em_.write("  ");
            SourcePos call_begin = em_.pos();
            em_.write(proc.body_name + args);
            record(proc.entry_label, proc.exit_label, CounterKind::Goal,
                   {call_begin, em_.pos()});
            em_.write(",\n");
            em_.write("  log(" + std::to_string(proc.exit_label) + ").\n");
        }
        for (const auto &clause : proc.clauses) {
            const std::string name = proc.wrapped ? proc.body_name : proc.name;
            em_.write(name);
            if (!clause.head_args.empty()) {
                em_.write("(");
                for (size_t i = 0; i < clause.head_args.size(); ++i) {
                    if (i) em_.write(", ");
                    em_.write(term_to_text(clause.head_args[i]));
                }
                em_.write(")");
            }
            em_.write(" :-\n");
            render_conj(clause.body, 2);
            em_.write(".\n");
        }
        em_.write("\n");
        record(proc.entry_label, proc.exit_label, CounterKind::Procedure,
               {proc_begin, em_.pos()});
    }

    static std::string head_args_text(int n) {
        if (n == 0) return "";
        std::string s = "(";
        for (int i = 1; i <= n; ++i) {
            if (i > 1) s += ", ";
            s += "V" + std::to_string(i);
        }
        return s + ")";
    }

    void render_conj(const LabelledConj &c, int indent) {
        const std::string pad(indent, ' ');
        em_.write(pad + "log(" + std::to_string(c.labels[0]) + ")");
        for (size_t i = 0; i < c.goals.size(); ++i) {
            em_.write(",\n");
            render_goal(c.goals[i], c.labels[i], c.labels[i + 1], indent);
            em_.write(",\n");
            em_.write(pad + "log(" + std::to_string(c.labels[i + 1]) + ")");
        }
    }

    void render_goal(const LabelledGoal &g, int enter, int exit, int indent) {
        const std::string pad(indent, ' ');
        em_.write(pad);
        SourcePos begin = em_.pos();
        switch (g.kind) {
            case GoalKind::Unify:
            case GoalKind::Call:
                em_.write(goal_to_text(g.atomic));
                break;
            case GoalKind::Conjunction:
                em_.write("(\n");
                render_conj(g.branches[0], indent + 2);
                em_.write("\n" + pad + ")");
                break;
            case GoalKind::Disjunction: {
                em_.write("(\n");
                for (size_t i = 0; i < g.branches.size(); ++i) {
                    if (i) em_.write(pad + ";\n");
                    render_conj(g.branches[i], indent + 2);
                    em_.write("\n");
                }
                em_.write(pad + ")");
                break;
            }
            case GoalKind::Negation:
                em_.write("not(\n");
                render_conj(g.branches[0], indent + 2);
                em_.write("\n" + pad + ")");
                break;
            case GoalKind::IfThenElse:
                em_.write("(if\n");
                render_conj(g.branches[0], indent + 2);
                em_.write("\n" + pad + "then\n");
                render_conj(g.branches[1], indent + 2);
                em_.write("\n" + pad + "else\n");
                render_conj(g.branches[2], indent + 2);
                em_.write("\n" + pad + ")");
                break;
        }
        record(enter, exit, construct_kind(g), {begin, em_.pos()});
    }

    void record(int enter, int exit, CounterKind kind, SourceSpan span) {
        spans.emplace(span_key(enter, exit, kind), span);
    }

    Emitter em_;
};

}  // namespace

// ---------------------------------------------------------------------------
// label_program
// ---------------------------------------------------------------------------

LabelledProgram label_program(const AnalyzedProgram &ap) {
    LabelledProgram lp;
    lp.type_defs = ap.type_defs;
    int next = 1;
    for (const auto &proc : ap.procedures) {
        LabelledProcedure out;
        out.name = proc.name;
        out.arg_modes = proc.arg_modes;
        out.determinism = proc.determinism;
        out.wrapped = proc.clauses.size() != 1;
        if (out.wrapped) {
            out.body_name = proc.name + "__body";
            out.entry_label = next++;
            out.exit_label = next++;
        }
        for (const auto &c : proc.clauses) {
            LabelledClause lc;
            lc.head_args = c.head_args;
            lc.span = c.span;
            lc.body = label_conj(c.body, next);
            out.clauses.push_back(std::move(lc));
        }
        if (!out.wrapped) {
            out.entry_label = out.clauses.front().body.labels.front();
            out.exit_label = out.clauses.front().body.labels.back();
        }
        lp.procs.push_back(std::move(out));
    }
    lp.label_count = next - 1;
    lp.meta.label_count = lp.label_count;

    for (const auto &proc : lp.procs) {
        if (proc.wrapped) {
            CounterEntry call;
            call.enter = proc.entry_label;
            call.exit = proc.exit_label;
            call.kind = CounterKind::Goal;
            call.proc_name = proc.name;
            lp.meta.entries.push_back(call);
        }
        for (const auto &c : proc.clauses) build_meta_conj(c.body, proc.name, lp.meta);
        CounterEntry pe;
        pe.enter = proc.entry_label;
        pe.exit = proc.exit_label;
        pe.kind = CounterKind::Procedure;
        pe.proc_name = proc.name;
        lp.meta.entries.push_back(pe);
    }

    ListingRenderer renderer;
    lp.listing = renderer.render(lp);
    for (auto &e : lp.meta.entries) {
        auto it = renderer.spans.find(span_key(e.enter, e.exit, e.kind));
        if (it == renderer.spans.end())
            throw InternalError("listing renderer missed a counter entry");
        e.span = it->second;
    }
    return lp;
}

// ---------------------------------------------------------------------------
// Switch detection
// ---------------------------------------------------------------------------

namespace {

// Alias tracking over a unification prefix; bound variables stay class roots
// so tests can be keyed by a pre-switch bound representative.
struct AliasState {
    const BoundSet *bound = nullptr;
    std::map<std::string, std::string> parent;

    std::string find(std::string v) const {
        auto it = parent.find(v);
        while (it != parent.end()) {
            v = it->second;
            it = parent.find(v);
        }
        return v;
    }

    bool pre_bound(const std::string &root) const { return bound->count(root) > 0; }

    void unite(const std::string &a, const std::string &b) {
        std::string ra = find(a), rb = find(b);
        if (ra == rb) return;
        if (pre_bound(ra))
            parent[rb] = ra;
        else
            parent[ra] = rb;
    }
};

std::string symbol_of(const Term &t) {
    if (t.is_int()) return "int:" + std::to_string(t.value);
    return t.name + "/" + std::to_string(t.args.size());
}

// Classifies one unification against the current alias state.
struct UnifStep {
    enum Kind { Alias, Test, Construct, Other } kind = Other;
    std::string tested_root;  // Test only
    std::string symbol;       // Test only
};

UnifStep classify_unif(const Goal &u, AliasState &st) {
    const Term *l = &u.lhs, *r = &u.rhs;
    if (!l->is_var() && r->is_var()) std::swap(l, r);
    UnifStep step;
    if (l->is_var() && r->is_var()) {
        std::string rl = st.find(l->name), rr = st.find(r->name);
        if (st.pre_bound(rl) && st.pre_bound(rr)) {
            step.kind = UnifStep::Other;  // equality test between two bound values
        } else {
            st.unite(l->name, r->name);
            step.kind = UnifStep::Alias;
        }
        return step;
    }
    if (l->is_var()) {
        std::string root = st.find(l->name);
        if (st.pre_bound(root)) {
            step.kind = UnifStep::Test;
            step.tested_root = root;
            step.symbol = symbol_of(*r);
        } else {
            step.kind = UnifStep::Construct;
        }
        return step;
    }
    step.kind = UnifStep::Other;  // nonvar = nonvar; never a switch condition
    return step;
}

// Phase 1: scan with maximal absorption, collecting the tests of every
// root-to-leaf path to find candidate switch variables.
void scan_paths(const LabelledConj &conj, AliasState st,
                std::vector<std::pair<std::string, std::string>> acc,
                std::vector<std::vector<std::pair<std::string, std::string>>> &paths) {
    for (const auto &g : conj.goals) {
        if (g.kind == GoalKind::Unify) {
            UnifStep step = classify_unif(g.atomic, st);
            if (step.kind == UnifStep::Test) acc.emplace_back(step.tested_root, step.symbol);
            continue;
        }
        if (g.kind == GoalKind::Disjunction) {
            for (const auto &b : g.branches) scan_paths(b, st, acc, paths);
            return;
        }
        // calls and complex statements end the path
        paths.push_back(std::move(acc));
        return;
    }
    paths.push_back(std::move(acc));
}

// Does this conjunction's unification prefix (with nested absorbable
// disjunctions) test `v` in every branch?
bool branch_tests(const LabelledConj &conj, AliasState st, const std::string &v) {
    for (const auto &g : conj.goals) {
        if (g.kind == GoalKind::Unify) {
            UnifStep step = classify_unif(g.atomic, st);
            if (step.kind == UnifStep::Test && step.tested_root == v) return true;
            continue;
        }
        if (g.kind == GoalKind::Disjunction) {
            for (const auto &b : g.branches)
                if (!branch_tests(b, st, v)) return false;
            return true;
        }
        return false;
    }
    return false;
}

// Phase 2: build the switch tree for candidate v. `first_tests` collects the
// first test symbol of each root-to-leaf path (nullopt when a path lacks one).
SwitchNode build_chain(const LabelledConj &conj, AliasState st, const std::string &v,
                       std::vector<std::optional<std::string>> &first_tests) {
    SwitchNode root;
    root.label = conj.labels[0];
    SwitchNode *cur = &root;
    std::optional<std::string> first;
    for (size_t i = 0; i < conj.goals.size(); ++i) {
        const LabelledGoal &g = conj.goals[i];
        if (g.kind == GoalKind::Unify) {
            UnifStep step = classify_unif(g.atomic, st);
            if (!first && step.kind == UnifStep::Test && step.tested_root == v)
                first = step.symbol;
            SwitchNode child;
            child.label = conj.labels[i + 1];
            child.in_edge = SwitchEdge{g.atomic.lhs, g.atomic.rhs};
            cur->children.push_back(std::move(child));
            cur = &cur->children.back();
            continue;
        }
        if (g.kind == GoalKind::Disjunction) {
            bool absorbable = true;
            for (const auto &b : g.branches)
                if (!branch_tests(b, st, v)) absorbable = false;
            if (absorbable) {
                for (const auto &b : g.branches) {
                    std::vector<std::optional<std::string>> sub;
                    SwitchNode branch = build_chain(b, st, v, sub);
                    // a test above the nested disjunction is the path's first
                    for (auto &s : sub) first_tests.push_back(first ? first : s);
                    cur->children.push_back(std::move(branch));
                }
                return root;
            }
            break;  // complex statement: current node is the leaf
        }
        break;  // call / negation / if-then-else
    }
    first_tests.push_back(first);
    return root;
}

void collect_nodes(const SwitchNode &n, std::set<LabelId> &out) {
    out.insert(n.label);
    for (const auto &c : n.children) collect_nodes(c, out);
}

void collect_leaves(const SwitchNode &n, std::vector<LabelId> &out) {
    if (n.is_leaf()) {
        out.push_back(n.label);
        return;
    }
    for (const auto &c : n.children) collect_leaves(c, out);
}

}  // namespace

std::set<LabelId> SwitchTree::node_labels() const {
    std::set<LabelId> out;
    for (const auto &r : roots) collect_nodes(r, out);
    return out;
}

std::vector<LabelId> SwitchTree::leaves() const {
    std::vector<LabelId> out;
    for (const auto &r : roots) collect_leaves(r, out);
    return out;
}

std::optional<SwitchTree> detect_switch(const LabelledGoal &disjunction,
                                        const BoundSet &bound) {
    if (disjunction.kind != GoalKind::Disjunction) return std::nullopt;

    AliasState st0;
    st0.bound = &bound;

    std::vector<std::vector<std::pair<std::string, std::string>>> paths;
    for (const auto &b : disjunction.branches) scan_paths(b, st0, {}, paths);

    // candidates: variables tested on every maximal path, in first-seen order
    std::vector<std::string> candidates;
    for (const auto &path : paths)
        for (const auto &t : path)
            if (std::find(candidates.begin(), candidates.end(), t.first) == candidates.end())
                candidates.push_back(t.first);
    candidates.erase(
        std::remove_if(candidates.begin(), candidates.end(),
                       [&](const std::string &v) {
                           for (const auto &path : paths) {
                               bool found = false;
                               for (const auto &t : path)
                                   if (t.first == v) found = true;
                               if (!found) return true;
                           }
                           return false;
                       }),
        candidates.end());

    for (const auto &v : candidates) {
        SwitchTree tree;
        tree.switch_var = v;
        std::vector<std::optional<std::string>> first_tests;
        for (const auto &b : disjunction.branches)
            tree.roots.push_back(build_chain(b, st0, v, first_tests));
        bool ok = true;
        std::set<std::string> seen;
        for (const auto &t : first_tests) {
            if (!t || seen.count(*t)) {
                ok = false;
                break;
            }
            seen.insert(*t);
        }
        if (ok) return tree;
    }
    return std::nullopt;
}

std::vector<LabelId> simplified_execution_path(const SwitchTree &tree) {
    std::vector<LabelId> out;
    std::function<void(const SwitchNode &)> dfs = [&](const SwitchNode &n) {
        out.push_back(n.label);
        for (const auto &c : n.children) dfs(c);
    };
    for (const auto &r : tree.roots) dfs(r);
    return out;
}

BatchPlan mark_and_batch(const SwitchTree &tree, const EdgeOutcomes &outcomes) {
    BatchPlan plan;
    std::vector<LabelId> current;
    std::vector<LabelId> *last_batch = nullptr;

    std::function<void(const SwitchNode &)> dfs = [&](const SwitchNode &n) {
        current.push_back(n.label);
        if (n.is_leaf()) {
            auto [it, inserted] = plan.leaf_batches.emplace(n.label, current);
            (void)inserted;
            last_batch = &it->second;
            current.clear();
            return;
        }
        for (const auto &c : n.children) {
            if (c.in_edge) {
                auto it = outcomes.find(c.label);
                if (it == outcomes.end() || !it->second) continue;  // failed edge: prune
            }
            dfs(c);
        }
    };
    for (const auto &r : tree.roots) dfs(r);

    if (!current.empty()) {
        if (last_batch)
            last_batch->insert(last_batch->end(), current.begin(), current.end());
        else
            plan.pre_switch = std::move(current);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Switch tree term encoding
// ---------------------------------------------------------------------------

namespace {

Term node_to_term(const SwitchNode &n) {
    std::vector<Term> kids;
    for (const auto &c : n.children) {
        Term child = node_to_term(c);
        if (c.in_edge)
            kids.push_back(Term::compound("e", {c.in_edge->lhs, c.in_edge->rhs, child}));
        else
            kids.push_back(Term::compound("b", {child}));
    }
    return Term::compound("n", {Term::integer(n.label), Term::list(kids)});
}

SwitchNode node_from_term(const Term &t) {
    if (!t.is_compound() || t.name != "n" || t.args.size() != 2 || !t.args[0].is_int())
        throw InternalError("malformed switch tree term");
    SwitchNode n;
    n.label = static_cast<int>(t.args[0].value);
    const Term *cur = &t.args[1];
    while (cur->is_cons()) {
        const Term &kid = cur->args[0];
        if (kid.is_compound() && kid.name == "e" && kid.args.size() == 3) {
            SwitchNode child = node_from_term(kid.args[2]);
            child.in_edge = SwitchEdge{kid.args[0], kid.args[1]};
            n.children.push_back(std::move(child));
        } else if (kid.is_compound() && kid.name == "b" && kid.args.size() == 1) {
            n.children.push_back(node_from_term(kid.args[0]));
        } else {
            throw InternalError("malformed switch tree term");
        }
        cur = &cur->args[1];
    }
    if (!cur->is_nil()) throw InternalError("malformed switch tree term");
    return n;
}

}  // namespace

Term switch_tree_to_term(const SwitchTree &tree) {
    std::vector<Term> roots;
    for (const auto &r : tree.roots) roots.push_back(node_to_term(r));
    return Term::list(roots);
}

SwitchTree switch_tree_from_term(const Term &t) {
    SwitchTree tree;
    const Term *cur = &t;
    while (cur->is_cons()) {
        tree.roots.push_back(node_from_term(cur->args[0]));
        cur = &cur->args[1];
    }
    if (!cur->is_nil()) throw InternalError("malformed switch tree term");
    return tree;
}

// ---------------------------------------------------------------------------
// walk_disjunctions
// ---------------------------------------------------------------------------

namespace {

BoundSet walk_conj_bound(
    const LabelledConj &conj, BoundSet bound, const ProcTable &procs, bool in_condition,
    const std::function<void(const LabelledGoal &, const BoundSet &, bool)> &cb) {
    for (const auto &g : conj.goals) {
        switch (g.kind) {
            case GoalKind::Unify:
            case GoalKind::Call:
                apply_goal_bindings(g.atomic, procs, bound);
                break;
            case GoalKind::Conjunction:
                bound = walk_conj_bound(g.branches[0], bound, procs, in_condition, cb);
                break;
            case GoalKind::Disjunction: {
                cb(g, bound, in_condition);
                bool first = true;
                BoundSet inter;
                for (const auto &b : g.branches) {
                    BoundSet bb = walk_conj_bound(b, bound, procs, in_condition, cb);
                    if (first) {
                        inter = std::move(bb);
                        first = false;
                    } else {
                        BoundSet merged;
                        std::set_intersection(inter.begin(), inter.end(), bb.begin(), bb.end(),
                                              std::inserter(merged, merged.begin()));
                        inter = std::move(merged);
                    }
                }
                bound = std::move(inter);
                break;
            }
            case GoalKind::Negation:
                walk_conj_bound(g.branches[0], bound, procs, true, cb);
                break;
            case GoalKind::IfThenElse: {
                BoundSet cb_bound = walk_conj_bound(g.branches[0], bound, procs, true, cb);
                BoundSet tb = walk_conj_bound(g.branches[1], cb_bound, procs, in_condition, cb);
                BoundSet eb = walk_conj_bound(g.branches[2], bound, procs, in_condition, cb);
                BoundSet merged;
                std::set_intersection(tb.begin(), tb.end(), eb.begin(), eb.end(),
                                      std::inserter(merged, merged.begin()));
                bound = std::move(merged);
                break;
            }
        }
    }
    return bound;
}

}  // namespace

void walk_disjunctions(
    const LabelledConj &conj, BoundSet bound, const ProcTable &procs,
    const std::function<void(const LabelledGoal &, const BoundSet &, bool)> &cb) {
    walk_conj_bound(conj, std::move(bound), procs, false, cb);
}

// ---------------------------------------------------------------------------
// Instrumentation
// ---------------------------------------------------------------------------

namespace {

Goal make_log(LabelId id) {
    return Goal::call("log", {Term::integer(id)});
}

Goal make_log_leaf(LabelId id) {
    return Goal::call("log_leaf", {Term::integer(id)});
}

struct SwitchCtx {
    std::set<LabelId> nodes;
    std::set<LabelId> leaves;
};

struct InstrumentBuilder {
    const ProcTable &table;
    CounterMeta &meta;
    int switch_counter = 0;
    bool naive = false;

    void upgrade_kind(LabelId enter, LabelId exit, CounterKind kind) {
        for (auto &e : meta.entries) {
            if (e.enter == enter && e.exit == exit &&
                (e.kind == CounterKind::Disjunction || e.kind == CounterKind::Switch ||
                 e.kind == CounterKind::CondDisjunction)) {
                e.kind = kind;
                return;
            }
        }
    }

    void push_label(LabelId id, const SwitchCtx *ctx, std::vector<Goal> &out) {
        if (!naive && ctx) {
            if (ctx->leaves.count(id)) {
                out.push_back(make_log_leaf(id));
                return;
            }
            if (ctx->nodes.count(id)) return;  // logged by a leaf batch
        }
        out.push_back(make_log(id));
    }

    Goal build_conj(const LabelledConj &c, BoundSet &bound, bool in_condition,
                    const SwitchCtx *ctx) {
        std::vector<Goal> out;
        push_label(c.labels[0], ctx, out);
        for (size_t i = 0; i < c.goals.size(); ++i) {
            build_goal(c.goals[i], c.labels[i], c.labels[i + 1], bound, in_condition, ctx, out);
            push_label(c.labels[i + 1], ctx, out);
        }
        Goal conj = Goal::conj(std::move(out));
        conj.span = c.span;
        return conj;
    }

    void build_goal(const LabelledGoal &g, LabelId enter, LabelId exit, BoundSet &bound,
                    bool in_condition, const SwitchCtx *ctx, std::vector<Goal> &out) {
        switch (g.kind) {
            case GoalKind::Unify:
            case GoalKind::Call:
                out.push_back(g.atomic);
                apply_goal_bindings(g.atomic, table, bound);
                return;
            case GoalKind::Conjunction: {
                BoundSet b = bound;
                out.push_back(build_conj(g.branches[0], b, in_condition, ctx));
                bound = std::move(b);
                return;
            }
            case GoalKind::Disjunction: {
                bool absorbed =
                    ctx && !g.branches.empty() && ctx->nodes.count(g.branches[0].labels[0]);
                std::optional<SwitchTree> tree;
                SwitchCtx local;
                const SwitchCtx *branch_ctx = absorbed ? ctx : nullptr;
                if (!absorbed && !naive) {
                    if (in_condition) {
                        upgrade_kind(enter, exit, CounterKind::CondDisjunction);
                    } else if ((tree = detect_switch(g, bound))) {
                        upgrade_kind(enter, exit, CounterKind::Switch);
                        local.nodes = tree->node_labels();
                        for (LabelId l : tree->leaves()) local.leaves.insert(l);
                        branch_ctx = &local;
                        Goal plan = Goal::call(
                            "coverage_plan",
                            {Term::integer(switch_counter++), switch_tree_to_term(*tree)});
                        out.push_back(std::move(plan));
                    }
                }
                Goal disj = Goal::disj({});
                disj.span = g.span;
                bool first = true;
                BoundSet inter;
                for (const auto &b : g.branches) {
                    BoundSet bb = bound;
                    disj.children.push_back(build_conj(b, bb, in_condition, branch_ctx));
                    if (first) {
                        inter = std::move(bb);
                        first = false;
                    } else {
                        BoundSet merged;
                        std::set_intersection(inter.begin(), inter.end(), bb.begin(), bb.end(),
                                              std::inserter(merged, merged.begin()));
                        inter = std::move(merged);
                    }
                }
                bound = std::move(inter);
                out.push_back(std::move(disj));
                return;
            }
            case GoalKind::Negation: {
                BoundSet b = bound;
                Goal neg = Goal::negation(build_conj(g.branches[0], b, true, nullptr));
                neg.span = g.span;
                out.push_back(std::move(neg));
                return;
            }
            case GoalKind::IfThenElse: {
                BoundSet cb = bound;
                Goal cond = build_conj(g.branches[0], cb, true, nullptr);
                BoundSet tb = cb;
                Goal then_g = build_conj(g.branches[1], tb, in_condition, nullptr);
                BoundSet eb = bound;
                Goal else_g = build_conj(g.branches[2], eb, in_condition, nullptr);
                Goal ite = Goal::ite(std::move(cond), std::move(then_g), std::move(else_g));
                ite.span = g.span;
                BoundSet merged;
                std::set_intersection(tb.begin(), tb.end(), eb.begin(), eb.end(),
                                      std::inserter(merged, merged.begin()));
                bound = std::move(merged);
                out.push_back(std::move(ite));
                return;
            }
        }
    }
};

}  // namespace

bool program_is_instrumented(const Program &p) {
    bool found = false;
    std::function<void(const Goal &)> walk = [&](const Goal &g) {
        if (found) return;
        if (g.kind == GoalKind::Call &&
            is_coverage_builtin(g.callee, static_cast<int>(g.args.size()))) {
            found = true;
            return;
        }
        for (const auto &c : g.children) walk(c);
    };
    for (const auto &pred : p.predicates)
        for (const auto &c : pred.clauses) walk(c.body);
    return found;
}

InstrumentedProgram instrument(const AnalyzedProgram &ap) {
    LabelledProgram lp = label_program(ap);
    ProcTable table = ap.proc_table();

    InstrumentedProgram out;
    out.type_defs = lp.type_defs;
    out.meta = lp.meta;
    out.listing = lp.listing;
    out.label_count = lp.label_count;

    for (int naive = 0; naive <= 1; ++naive) {
        InstrumentBuilder builder{table, out.meta};
        builder.naive = naive == 1;
        auto &dest = naive ? out.naive_procedures : out.procedures;
        for (const auto &lproc : lp.procs) {
            const Procedure &orig = table.at(lproc.name);
            std::string clause_owner = lproc.wrapped ? lproc.body_name : lproc.name;
            if (lproc.wrapped) {
                Procedure wrapper;
                wrapper.name = lproc.name;
                wrapper.orig_name = orig.orig_name;
                wrapper.arity = orig.arity;
                wrapper.mode_index = 0;
                wrapper.arg_modes = orig.arg_modes;
                wrapper.determinism = orig.determinism;
                Clause wc;
                std::vector<Term> args;
                for (int i = 1; i <= orig.arity; ++i)
                    args.push_back(Term::var("V" + std::to_string(i)));
                wc.head_args = args;
                wc.body = Goal::conj({make_log(lproc.entry_label),
                                      Goal::call(clause_owner, args),
                                      make_log(lproc.exit_label)});
                wrapper.clauses.push_back(std::move(wc));
                dest.push_back(std::move(wrapper));
            }
            Procedure body;
            body.name = clause_owner;
            body.orig_name = clause_owner;
            body.arity = orig.arity;
            body.mode_index = 0;
            body.arg_modes = orig.arg_modes;
            body.determinism = orig.determinism;
            for (const auto &lc : lproc.clauses) {
                Clause c;
                c.head_args = lc.head_args;
                c.span = lc.span;
                BoundSet bound;
                for (size_t i = 0; i < lc.head_args.size(); ++i)
                    if (orig.arg_modes[i] == ArgMode::In) bound.insert(lc.head_args[i].name);
                c.body = builder.build_conj(lc.body, bound, false, nullptr);
                body.clauses.push_back(std::move(c));
            }
            dest.push_back(std::move(body));
        }
    }

    // the batched instrumentation must not break declared determinisms
    auto diags = check_determinism(out.procedures);
    if (!diags.empty())
        throw InternalError("instrumented procedure fails determinism re-check: " +
                            diags.front().message);

    Program printable;
    printable.type_defs = out.type_defs;
    for (const auto &proc : out.procedures) {
        PredicateDef pred;
        pred.name = proc.name;
        pred.arity = proc.arity;
        ModeDecl md;
        md.arg_modes = proc.arg_modes;
        md.determinism = proc.determinism;
        pred.modes.push_back(std::move(md));
        pred.clauses = proc.clauses;
        printable.predicates.push_back(std::move(pred));
    }
    out.text = program_to_text(printable);
    return out;
}

// ---------------------------------------------------------------------------
// Log events, replay, classification
// ---------------------------------------------------------------------------

std::string log_events_to_text(const std::vector<LogEvent> &events) {
    std::ostringstream os;
    for (const auto &e : events) {
        if (e.batch) {
            os << "B ";
            for (size_t i = 0; i < e.labels.size(); ++i) {
                if (i) os << ",";
                os << e.labels[i];
            }
        } else {
            os << "L " << e.labels.at(0);
        }
        os << "\n";
    }
    return os.str();
}

std::vector<LogEvent> log_events_from_text(std::string_view text) {
    std::vector<LogEvent> events;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line(text.substr(pos, eol == std::string_view::npos ? eol : eol - pos));
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line.size() < 3 || (line[0] != 'L' && line[0] != 'B') || line[1] != ' ')
            fail("malformed log line " + std::to_string(line_no));
        LogEvent e;
        e.batch = line[0] == 'B';
        size_t i = 2;
        while (i < line.size()) {
            size_t comma = line.find(',', i);
            std::string num = line.substr(i, comma == std::string::npos ? comma : comma - i);
            e.labels.push_back(std::stoi(num));
            if (comma == std::string::npos) break;
            i = comma + 1;
        }
        if (e.labels.empty() || (!e.batch && e.labels.size() != 1))
            fail("malformed log line " + std::to_string(line_no));
        events.push_back(std::move(e));
    }
    return events;
}

std::map<LabelId, long long> replay_log(const std::vector<LogEvent> &events,
                                        const CounterMeta &meta) {
    std::map<LabelId, long long> counts;
    for (int l = 1; l <= meta.label_count; ++l) counts[l] = 0;
    for (const auto &e : events) {
        for (LabelId l : e.labels) {
            if (!meta.has_label(l))
                fail("unknown label id " + std::to_string(l) + " in log");
            ++counts[l];
        }
    }
    return counts;
}

std::string to_string(CoverageDegree d) {
    switch (d) {
        case CoverageDegree::Covered: return "covered";
        case CoverageDegree::PartiallyCovered: return "partially_covered";
        case CoverageDegree::NotCovered: return "not_covered";
    }
    return "not_covered";
}

CoverageReport classify(const std::map<LabelId, long long> &counts, const CounterMeta &meta) {
    CoverageReport report;
    for (const auto &e : meta.entries) {
        CoverageEntry ce;
        ce.meta = e;
        auto ei = counts.find(e.enter);
        auto xi = counts.find(e.exit);
        if (ei == counts.end() || xi == counts.end())
            fail("counts do not cover all labels in meta");
        ce.enter_count = ei->second;
        ce.exit_count = xi->second;
        if (ce.exit_count > 0)
            ce.degree = CoverageDegree::Covered;
        else if (ce.enter_count > 0)
            ce.degree = CoverageDegree::PartiallyCovered;
        else
            ce.degree = CoverageDegree::NotCovered;
        report.entries.push_back(std::move(ce));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

const char *degree_class(CoverageDegree d) {
    switch (d) {
        case CoverageDegree::Covered: return "covered";
        case CoverageDegree::PartiallyCovered: return "partial";
        case CoverageDegree::NotCovered: return "uncovered";
    }
    return "uncovered";
}

}  // namespace

std::string emit_html(const CoverageReport &report, std::string_view source_text) {
    // line start offsets for span resolution
    std::vector<size_t> line_starts{0};
    for (size_t i = 0; i < source_text.size(); ++i)
        if (source_text[i] == '\n') line_starts.push_back(i + 1);
    auto offset_of = [&](SourcePos p) -> size_t {
        if (p.line < 1 || static_cast<size_t>(p.line) > line_starts.size())
            fail("span outside source bounds in coverage report");
        size_t off = line_starts[static_cast<size_t>(p.line - 1)] +
                     static_cast<size_t>(p.col - 1);
        if (off > source_text.size()) fail("span outside source bounds in coverage report");
        return off;
    };

    struct Region {
        size_t begin, end;
        CoverageDegree degree;
    };
    std::vector<Region> regions;
    for (const auto &e : report.entries) {
        if (e.meta.kind != CounterKind::Goal) continue;
        regions.push_back({offset_of(e.meta.span.begin), offset_of(e.meta.span.end), e.degree});
    }
    // innermost wins on overlap
    std::vector<Region> kept;
    for (const auto &r : regions) {
        bool contains_other = false;
        for (const auto &o : regions)
            if (&o != &r && o.begin >= r.begin && o.end <= r.end &&
                (o.begin > r.begin || o.end < r.end))
                contains_other = true;
        if (!contains_other) kept.push_back(r);
    }
    std::sort(kept.begin(), kept.end(),
              [](const Region &a, const Region &b) { return a.begin < b.begin; });

    std::ostringstream os;
    os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
       << "<title>coverage report</title>\n<style>\n"
       << "body { font-family: monospace; }\n"
       << "pre { line-height: 1.35; }\n"
       << ".covered { background-color: #a9e4a9; }\n"
       << ".partial { background-color: #f2e68f; }\n"
       << ".uncovered { background-color: #f2a9a9; }\n"
       << "</style>\n</head>\n<body>\n<h2>goal coverage</h2>\n<pre>";
    size_t cursor = 0;
    for (const auto &r : kept) {
        if (r.begin < cursor) continue;  // defensive: drop partial overlap
        os << html_escape(source_text.substr(cursor, r.begin - cursor));
        os << "<span class=\"" << degree_class(r.degree) << "\">"
           << html_escape(source_text.substr(r.begin, r.end - r.begin)) << "</span>";
        cursor = r.end;
    }
    os << html_escape(source_text.substr(cursor));
    os << "</pre>\n</body>\n</html>\n";
    return os.str();
}

std::string emit_detail_report(const CoverageReport &report) {
    std::ostringstream os;
    os << "# enter\texit\tkind\tprocedure\tspan\tentered\texited\tdegree\n";
    for (const auto &e : report.entries) {
        os << e.meta.enter << "\t" << e.meta.exit << "\t" << to_string(e.meta.kind) << "\t"
           << e.meta.proc_name << "\t" << to_string(e.meta.span) << "\t" << e.enter_count
           << "\t" << e.exit_count << "\t" << to_string(e.degree);
        if (e.meta.kind == CounterKind::CondDisjunction) os << "\t[in-condition]";
        os << "\n";
    }
    return os.str();
}

}  // namespace mtc
