#include "modeanalysis.hpp"

#include <algorithm>
#include <sstream>

#include "coverage.hpp"

namespace mtc {

namespace {

[[noreturn]] void fail(const std::string &msg, SourceSpan span = {}) {
    throw CompileError(Diagnostic{msg, span});
}

std::string pred_key(const std::string &name, int arity) {
    return name + "/" + std::to_string(arity);
}

}  // namespace

// ---------------------------------------------------------------------------
// Renaming table
// ---------------------------------------------------------------------------

const RenamingEntry *RenamingTable::find(const std::string &name, int arity,
                                         int mode_index) const {
    for (const auto &e : entries)
        if (e.orig_name == name && e.arity == arity && e.mode_index == mode_index) return &e;
    return nullptr;
}

std::vector<const RenamingEntry *> RenamingTable::candidates(const std::string &name,
                                                             int arity) const {
    std::vector<const RenamingEntry *> out;
    for (const auto &e : entries)
        if (e.orig_name == name && e.arity == arity) out.push_back(&e);
    return out;
}

std::string renaming_table_to_text(const RenamingTable &t) {
    std::ostringstream os;
    for (const auto &e : t.entries)
        os << e.orig_name << "/" << e.arity << "\t" << e.mode_index << "\t" << e.new_name
           << "\n";
    return os.str();
}

RenamingTable renaming_table_from_text(std::string_view text) {
    RenamingTable table;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line(text.substr(pos, eol == std::string_view::npos ? eol : eol - pos));
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_no;
        if (line.empty()) continue;
        RenamingEntry e;
        size_t slash = line.find('/');
        size_t tab1 = line.find('\t');
        size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (slash == std::string::npos || tab1 == std::string::npos ||
            tab2 == std::string::npos || slash > tab1)
            fail("malformed renaming file line " + std::to_string(line_no));
        e.orig_name = line.substr(0, slash);
        e.arity = std::stoi(line.substr(slash + 1, tab1 - slash - 1));
        e.mode_index = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
        e.new_name = line.substr(tab2 + 1);
        table.entries.push_back(std::move(e));
    }
    for (size_t i = 0; i < table.entries.size(); ++i)
        for (size_t j = i + 1; j < table.entries.size(); ++j)
            if (table.entries[i].new_name == table.entries[j].new_name)
                fail("duplicate procedure name in renaming file: " + table.entries[i].new_name);
    return table;
}

// ---------------------------------------------------------------------------
// Superhomogeneous form
// ---------------------------------------------------------------------------

namespace {

class ClauseNormalizer {
   public:
    Clause normalize(const Clause &c) {
        Clause out;
        out.span = c.span;
        std::vector<Goal> head_goals;
        for (const auto &arg : c.head_args) {
            if (arg.is_var() && !var_map_.count(arg.name)) {
                out.head_args.push_back(mk_var(canon(arg.name), arg.span));
                continue;
            }
            std::string hv = fresh();
            out.head_args.push_back(mk_var(hv, arg.span));
            if (arg.is_var()) {
                head_goals.push_back(mk_unify(canon(arg.name), Term::var(hv), arg.span));
            } else {
                flatten_head(hv, arg, head_goals);
            }
        }
        std::vector<Goal> body_goals;
        norm_conj(c.body, body_goals);
        std::vector<Goal> all = std::move(head_goals);
        for (auto &g : body_goals) all.push_back(std::move(g));
        out.body = Goal::conj(std::move(all));
        out.body.span = c.body.span;
        return out;
    }

   private:
    std::string fresh() { return "V" + std::to_string(++counter_); }

    std::string canon(const std::string &v) {
        auto it = var_map_.find(v);
        if (it != var_map_.end()) return it->second;
        std::string f = fresh();
        var_map_.emplace(v, f);
        return f;
    }

    static Term mk_var(const std::string &name, SourceSpan span) {
        Term t = Term::var(name);
        t.span = span;
        return t;
    }

    static Goal mk_unify(const std::string &lhs, Term rhs, SourceSpan span) {
        Goal g = Goal::unify(Term::var(lhs), std::move(rhs));
        g.span = span;
        return g;
    }

    // Head arguments become distinct variables; repeated variables turn into
    // explicit aliasing unifications after the structural one.
    void flatten_head(const std::string &v, const Term &t, std::vector<Goal> &out) {
        if (t.is_int()) {
            out.push_back(mk_unify(v, t, t.span));
            return;
        }
        struct Pending {
            bool alias;
            std::string canon_name;  // alias: existing variable
            std::string fresh_name;
            Term sub;                // !alias: nested term
        };
        std::vector<Pending> pending;
        std::vector<Term> args;
        for (const auto &a : t.args) {
            if (a.is_var() && !var_map_.count(a.name)) {
                args.push_back(mk_var(canon(a.name), a.span));
            } else if (a.is_var()) {
                std::string w = fresh();
                args.push_back(mk_var(w, a.span));
                pending.push_back({true, canon(a.name), w, {}});
            } else {
                std::string w = fresh();
                args.push_back(mk_var(w, a.span));
                pending.push_back({false, "", w, a});
            }
        }
        Term rhs = Term::compound(t.name, std::move(args));
        rhs.span = t.span;
        out.push_back(mk_unify(v, std::move(rhs), t.span));
        for (const auto &p : pending) {
            if (p.alias)
                out.push_back(mk_unify(p.canon_name, Term::var(p.fresh_name), t.span));
            else
                flatten_head(p.fresh_name, p.sub, out);
        }
    }

    // Body terms flatten depth-first: innermost constructions come first.
    std::string flatten_body(const Term &t, std::vector<Goal> &out) {
        if (t.is_var()) return canon(t.name);
        std::string v = fresh();
        if (t.is_int()) {
            out.push_back(mk_unify(v, t, t.span));
            return v;
        }
        std::vector<Term> args;
        for (const auto &a : t.args) args.push_back(mk_var(flatten_body(a, out), a.span));
        Term rhs = Term::compound(t.name, std::move(args));
        rhs.span = t.span;
        out.push_back(mk_unify(v, std::move(rhs), t.span));
        return v;
    }

    // One level of flattening for a unification right-hand side.
    void bind_nonvar(const std::string &v, const Term &t, std::vector<Goal> &out) {
        if (t.is_int()) {
            out.push_back(mk_unify(v, t, t.span));
            return;
        }
        std::vector<Term> args;
        for (const auto &a : t.args) {
            if (a.is_var())
                args.push_back(mk_var(canon(a.name), a.span));
            else
                args.push_back(mk_var(flatten_body(a, out), a.span));
        }
        Term rhs = Term::compound(t.name, std::move(args));
        rhs.span = t.span;
        out.push_back(mk_unify(v, std::move(rhs), t.span));
    }

    void norm_unify(const Goal &g, std::vector<Goal> &out) {
        const Term &l = g.lhs, &r = g.rhs;
        if (l.is_var() && r.is_var()) {
            Goal u = mk_unify(canon(l.name), mk_var(canon(r.name), r.span), g.span);
            out.push_back(std::move(u));
            return;
        }
        if (l.is_var()) {
            bind_nonvar(canon(l.name), r, out);
            return;
        }
        if (r.is_var()) {
            bind_nonvar(canon(r.name), l, out);
            return;
        }
        std::string v = fresh();
        bind_nonvar(v, l, out);
        bind_nonvar(v, r, out);
    }

    Term rename_deep(const Term &t) {
        if (t.is_var()) return mk_var(canon(t.name), t.span);
        Term out = t;
        for (auto &a : out.args) a = rename_deep(a);
        return out;
    }

    Goal norm_structured(const Goal &g) {
        Goal out = g;
        out.children.clear();
        for (const auto &c : g.children) {
            std::vector<Goal> items;
            norm_conj(c, items);
            Goal conj = Goal::conj(std::move(items));
            conj.span = c.span;
            out.children.push_back(std::move(conj));
        }
        return out;
    }

    void norm_conj(const Goal &g, std::vector<Goal> &out) {
        switch (g.kind) {
            case GoalKind::Conjunction:
                for (const auto &c : g.children) norm_conj(c, out);
                return;
            case GoalKind::Unify:
                norm_unify(g, out);
                return;
            case GoalKind::Call: {
                int arity = static_cast<int>(g.args.size());
                Goal call = g;
                if (is_coverage_builtin(g.callee, arity)) {
                    for (auto &a : call.args) a = rename_deep(a);
                } else {
                    std::vector<Term> args;
                    for (const auto &a : g.args)
                        args.push_back(mk_var(flatten_body(a, out), a.span));
                    call.args = std::move(args);
                }
                out.push_back(std::move(call));
                return;
            }
            case GoalKind::Disjunction:
            case GoalKind::Negation:
            case GoalKind::IfThenElse:
                out.push_back(norm_structured(g));
                return;
        }
    }

    int counter_ = 0;
    std::map<std::string, std::string> var_map_;
};

}  // namespace

Program to_superhomogeneous(const Program &p) {
    Program out;
    out.type_defs = p.type_defs;
    for (const auto &pred : p.predicates) {
        PredicateDef np = pred;
        np.clauses.clear();
        for (const auto &c : pred.clauses) np.clauses.push_back(ClauseNormalizer().normalize(c));
        out.predicates.push_back(std::move(np));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Instantiation helpers
// ---------------------------------------------------------------------------

bool term_bound(const Term &t, const BoundSet &bound) {
    if (t.is_var()) return bound.count(t.name) > 0;
    for (const auto &a : t.args)
        if (!term_bound(a, bound)) return false;
    return true;
}

int select_mode(const std::vector<ModeOption> &options, const std::vector<bool> &arg_bound) {
    int best = -1, best_ins = -1;
    for (size_t i = 0; i < options.size(); ++i) {
        const auto &m = options[i].arg_modes;
        bool ok = true;
        int ins = 0;
        for (size_t a = 0; a < m.size(); ++a) {
            if (m[a] == ArgMode::In) {
                ++ins;
                if (!arg_bound[a]) ok = false;
            }
        }
        if (ok && ins > best_ins) {
            best = static_cast<int>(i);
            best_ins = ins;
        }
    }
    return best;
}

CallResolver resolver_for(const ProcTable &procs) {
    // Procedures are already split: each name resolves to exactly one mode.
    return [&procs](const std::string &name,
                    int arity) -> std::optional<std::vector<ModeOption>> {
        auto it = procs.find(name);
        if (it == procs.end() || it->second.arity != arity) return std::nullopt;
        ModeOption opt;
        opt.mode_index = 0;
        opt.arg_modes = it->second.arg_modes;
        opt.determinism = it->second.determinism;
        opt.proc_name = name;
        return std::vector<ModeOption>{std::move(opt)};
    };
}

void apply_goal_bindings(const Goal &g, const ProcTable &procs, BoundSet &bound) {
    switch (g.kind) {
        case GoalKind::Unify:
            collect_vars(g.lhs, bound);
            collect_vars(g.rhs, bound);
            return;
        case GoalKind::Call: {
            int arity = static_cast<int>(g.args.size());
            if (is_coverage_builtin(g.callee, arity)) return;
            if (is_builtin(g.callee, arity)) {
                if (g.callee == "is") collect_vars(g.args[0], bound);
                if (g.callee == "length") collect_vars(g.args[1], bound);
                return;
            }
            auto it = procs.find(g.callee);
            if (it == procs.end()) {
                // unknown callee: assume everything becomes bound
                for (const auto &a : g.args) collect_vars(a, bound);
                return;
            }
            for (size_t i = 0; i < g.args.size() && i < it->second.arg_modes.size(); ++i)
                if (it->second.arg_modes[i] == ArgMode::Out) collect_vars(g.args[i], bound);
            return;
        }
        case GoalKind::Conjunction:
            for (const auto &c : g.children) apply_goal_bindings(c, procs, bound);
            return;
        case GoalKind::Disjunction: {
            bool first = true;
            BoundSet inter;
            for (const auto &c : g.children) {
                BoundSet b = bound;
                apply_goal_bindings(c, procs, b);
                if (first) {
                    inter = std::move(b);
                    first = false;
                } else {
                    BoundSet merged;
                    std::set_intersection(inter.begin(), inter.end(), b.begin(), b.end(),
                                          std::inserter(merged, merged.begin()));
                    inter = std::move(merged);
                }
            }
            if (!first) bound = std::move(inter);
            return;
        }
        case GoalKind::Negation:
            return;
        case GoalKind::IfThenElse: {
            BoundSet tb = bound;
            apply_goal_bindings(g.children[0], procs, tb);
            apply_goal_bindings(g.children[1], procs, tb);
            BoundSet eb = bound;
            apply_goal_bindings(g.children[2], procs, eb);
            BoundSet merged;
            std::set_intersection(tb.begin(), tb.end(), eb.begin(), eb.end(),
                                  std::inserter(merged, merged.begin()));
            bound = std::move(merged);
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Scheduler
// ---------------------------------------------------------------------------

GoalScheduler::GoalScheduler(CallResolver resolver, std::string context)
    : resolver_(std::move(resolver)), context_(std::move(context)) {}

std::string GoalScheduler::fresh_var() {
    std::string name;
    do {
        name = "V" + std::to_string(++fresh_counter_);
    } while (used_names_.count(name));
    used_names_.insert(name);
    return name;
}

std::vector<Goal> GoalScheduler::reorder(const std::vector<Goal> &goals, BoundSet &bound,
                                         const BoundSet &externals) {
    for (const auto &g : goals) collect_goal_vars(g, used_names_);
    auto result = try_conj(goals, bound, externals);
    if (!result) {
        // rerun to locate the first stuck goal for the message
        std::vector<Goal> remaining = goals;
        BoundSet b = bound;
        bool progress = true;
        while (progress && !remaining.empty()) {
            progress = false;
            for (size_t i = 0; i < remaining.size(); ++i) {
                BoundSet ext = externals;
                for (size_t j = 0; j < remaining.size(); ++j)
                    if (j != i) collect_goal_vars(remaining[j], ext);
                if (auto a = try_goal(remaining[i], b, ext)) {
                    b = a->bound;
                    remaining.erase(remaining.begin() + static_cast<long>(i));
                    progress = true;
                    break;
                }
            }
        }
        const Goal &stuck = remaining.empty() ? goals.front() : remaining.front();
        fail("mode error in " + context_ + ": no executable order for goal " +
                 goal_to_text(stuck),
             stuck.span);
    }
    return *result;
}

std::optional<std::vector<Goal>> GoalScheduler::try_conj(const std::vector<Goal> &goals,
                                                         BoundSet &bound,
                                                         const BoundSet &externals) {
    std::vector<Goal> remaining = goals;
    std::vector<Goal> out;
    while (!remaining.empty()) {
        bool progress = false;
        for (size_t i = 0; i < remaining.size(); ++i) {
            BoundSet ext = externals;
            for (size_t j = 0; j < remaining.size(); ++j)
                if (j != i) collect_goal_vars(remaining[j], ext);
            for (const auto &g : out) collect_goal_vars(g, ext);
            auto attempt = try_goal(remaining[i], bound, ext);
            if (attempt) {
                for (auto &g : attempt->goals) out.push_back(std::move(g));
                bound = std::move(attempt->bound);
                remaining.erase(remaining.begin() + static_cast<long>(i));
                progress = true;
                break;
            }
        }
        if (!progress) return std::nullopt;
    }
    return out;
}

std::optional<GoalScheduler::Attempt> GoalScheduler::try_builtin(const Goal &g,
                                                                 const BoundSet &bound) {
    Attempt a;
    a.bound = bound;
    const std::string &name = g.callee;
    auto bound_ok = [&](const Term &t) { return term_bound(t, bound); };
    if (name == "<" || name == ">" || name == "=<" || name == ">=") {
        if (!bound_ok(g.args[0]) || !bound_ok(g.args[1])) return std::nullopt;
    } else if (name == "is") {
        if (!bound_ok(g.args[1])) return std::nullopt;
        collect_vars(g.args[0], a.bound);
    } else if (name == "length") {
        if (!bound_ok(g.args[0])) return std::nullopt;
        collect_vars(g.args[1], a.bound);
    } else {  // throw/1, print/1
        if (!bound_ok(g.args[0])) return std::nullopt;
    }
    a.goals.push_back(g);
    return a;
}

std::optional<GoalScheduler::Attempt> GoalScheduler::try_goal(const Goal &g,
                                                              const BoundSet &bound,
                                                              const BoundSet &externals) {
    switch (g.kind) {
        case GoalKind::Unify: {
            bool lb = term_bound(g.lhs, bound);
            bool rb = term_bound(g.rhs, bound);
            if (!lb && !rb) return std::nullopt;
            Attempt a;
            a.bound = bound;
            collect_vars(g.lhs, a.bound);
            collect_vars(g.rhs, a.bound);
            a.goals.push_back(g);
            return a;
        }
        case GoalKind::Call: {
            int arity = static_cast<int>(g.args.size());
            if (is_coverage_builtin(g.callee, arity)) {
                Attempt a;
                a.bound = bound;
                a.goals.push_back(g);
                return a;
            }
            if (is_builtin(g.callee, arity)) return try_builtin(g, bound);
            auto options = resolver_(g.callee, arity);
            if (!options) {
                if (lenient_) {
                    Attempt a;
                    a.bound = bound;
                    for (const auto &arg : g.args) collect_vars(arg, a.bound);
                    a.goals.push_back(g);
                    return a;
                }
                fail("undefined predicate " + pred_key(g.callee, arity) + " in " + context_,
                     g.span);
            }
            if (options->empty())
                fail("no mode declaration for " + pred_key(g.callee, arity), g.span);
            std::vector<bool> arg_bound;
            for (const auto &arg : g.args) arg_bound.push_back(term_bound(arg, bound));
            int mi = select_mode(*options, arg_bound);
            if (mi < 0) return std::nullopt;
            const ModeOption &opt = (*options)[static_cast<size_t>(mi)];
            Attempt a;
            a.bound = bound;
            Goal call = g;
            call.callee = opt.proc_name;
            std::vector<Goal> post;
            for (size_t i = 0; i < call.args.size(); ++i) {
                if (opt.arg_modes[i] != ArgMode::Out) continue;
                Term &arg = call.args[i];
                if (arg.is_var() && !bound.count(arg.name)) {
                    a.bound.insert(arg.name);
                    continue;
                }
                // implied mode: run with a fresh output and test afterwards
                Term fresh = Term::var(fresh_var());
                fresh.span = arg.span;
                Goal test = Goal::unify(arg, fresh);
                test.span = g.span;
                post.push_back(std::move(test));
                collect_vars(arg, a.bound);
                a.bound.insert(fresh.name);
                arg = std::move(fresh);
            }
            a.goals.push_back(std::move(call));
            for (auto &t : post) a.goals.push_back(std::move(t));
            return a;
        }
        case GoalKind::Conjunction: {
            BoundSet b = bound;
            auto inner = try_conj(g.children, b, externals);
            if (!inner) return std::nullopt;
            Attempt a;
            a.bound = std::move(b);
            Goal conj = Goal::conj(std::move(*inner));
            conj.span = g.span;
            a.goals.push_back(std::move(conj));
            return a;
        }
        case GoalKind::Disjunction: {
            Attempt a;
            Goal disj = g;
            disj.children.clear();
            bool first = true;
            for (const auto &child : g.children) {
                std::vector<Goal> items =
                    child.kind == GoalKind::Conjunction ? child.children
                                                        : std::vector<Goal>{child};
                BoundSet b = bound;
                auto inner = try_conj(items, b, externals);
                if (!inner) return std::nullopt;
                Goal conj = Goal::conj(std::move(*inner));
                conj.span = child.span;
                disj.children.push_back(std::move(conj));
                if (first) {
                    a.bound = std::move(b);
                    first = false;
                } else {
                    BoundSet merged;
                    std::set_intersection(a.bound.begin(), a.bound.end(), b.begin(), b.end(),
                                          std::inserter(merged, merged.begin()));
                    a.bound = std::move(merged);
                }
            }
            a.goals.push_back(std::move(disj));
            return a;
        }
        case GoalKind::Negation: {
            const Goal &body = g.children[0];
            std::vector<Goal> items = body.kind == GoalKind::Conjunction
                                          ? body.children
                                          : std::vector<Goal>{body};
            BoundSet b = bound;
            auto inner = try_conj(items, b, externals);
            if (!inner) return std::nullopt;
            // the condition may not bind variables visible outside
            for (const auto &v : b)
                if (!bound.count(v) && externals.count(v)) return std::nullopt;
            Attempt a;
            a.bound = bound;
            Goal body_conj = Goal::conj(std::move(*inner));
            body_conj.span = body.span;
            Goal neg = Goal::negation(std::move(body_conj));
            neg.span = g.span;
            a.goals.push_back(std::move(neg));
            return a;
        }
        case GoalKind::IfThenElse: {
            const Goal &cond = g.children[0];
            const Goal &then_g = g.children[1];
            const Goal &else_g = g.children[2];
            auto as_items = [](const Goal &x) {
                return x.kind == GoalKind::Conjunction ? x.children : std::vector<Goal>{x};
            };
            BoundSet cb = bound;
            auto cond_inner = try_conj(as_items(cond), cb, externals);
            if (!cond_inner) return std::nullopt;
            BoundSet else_vars;
            collect_goal_vars(else_g, else_vars);
            for (const auto &v : cb)
                if (!bound.count(v) && (externals.count(v) || else_vars.count(v)))
                    return std::nullopt;
            BoundSet tb = cb;
            auto then_inner = try_conj(as_items(then_g), tb, externals);
            if (!then_inner) return std::nullopt;
            BoundSet eb = bound;
            auto else_inner = try_conj(as_items(else_g), eb, externals);
            if (!else_inner) return std::nullopt;
            Attempt a;
            std::set_intersection(tb.begin(), tb.end(), eb.begin(), eb.end(),
                                  std::inserter(a.bound, a.bound.begin()));
            auto wrap = [](std::vector<Goal> items, SourceSpan span) {
                Goal c = Goal::conj(std::move(items));
                c.span = span;
                return c;
            };
            Goal ite = Goal::ite(wrap(std::move(*cond_inner), cond.span),
                                 wrap(std::move(*then_inner), then_g.span),
                                 wrap(std::move(*else_inner), else_g.span));
            ite.span = g.span;
            a.goals.push_back(std::move(ite));
            return a;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// reorder_and_split
// ---------------------------------------------------------------------------

ProcTable AnalyzedProgram::proc_table() const {
    ProcTable t;
    for (const auto &p : procedures) t.emplace(p.name, p);
    return t;
}

AnalyzedProgram reorder_and_split(const Program &p) {
    AnalyzedProgram out;
    out.type_defs = p.type_defs;

    std::set<std::string> taken;
    for (const auto &pred : p.predicates) taken.insert(pred.name);

    // name assignment first so call sites can be renamed while reordering
    std::map<std::pair<std::string, int>, std::vector<ModeOption>> options;
    for (const auto &pred : p.predicates) {
        if (pred.modes.empty()) continue;
        bool multi = pred.modes.size() > 1;
        std::vector<ModeOption> opts;
        for (size_t k = 0; k < pred.modes.size(); ++k) {
            std::string name =
                multi ? pred.name + "__m" + std::to_string(k) : pred.name;
            if (multi) {
                if (taken.count(name))
                    fail("generated procedure name " + name +
                         " collides with an existing predicate");
                out.renaming.entries.push_back(
                    {pred.name, pred.arity, static_cast<int>(k), name});
            }
            ModeOption opt;
            opt.mode_index = static_cast<int>(k);
            opt.arg_modes = pred.modes[k].arg_modes;
            opt.determinism = pred.modes[k].determinism;
            opt.proc_name = std::move(name);
            opts.push_back(std::move(opt));
        }
        options.emplace(std::make_pair(pred.name, pred.arity), std::move(opts));
    }

    CallResolver resolver =
        [&options](const std::string &name,
                   int arity) -> std::optional<std::vector<ModeOption>> {
        auto it = options.find(std::make_pair(name, arity));
        if (it == options.end()) return std::nullopt;
        return it->second;
    };

    for (const auto &pred : p.predicates) {
        auto it = options.find(std::make_pair(pred.name, pred.arity));
        if (it == options.end()) continue;  // no modes: never becomes a procedure
        for (const auto &opt : it->second) {
            Procedure proc;
            proc.name = opt.proc_name;
            proc.orig_name = pred.name;
            proc.arity = pred.arity;
            proc.mode_index = opt.mode_index;
            proc.arg_modes = opt.arg_modes;
            proc.determinism = opt.determinism;
            for (const auto &clause : pred.clauses) {
                Clause c = clause;
                BoundSet bound;
                BoundSet head_vars;
                for (size_t i = 0; i < c.head_args.size(); ++i) {
                    if (!c.head_args[i].is_var())
                        throw InternalError("reorder_and_split requires superhomogeneous input");
                    head_vars.insert(c.head_args[i].name);
                    if (opt.arg_modes[i] == ArgMode::In) bound.insert(c.head_args[i].name);
                }
                GoalScheduler sched(resolver, proc.name);
                std::vector<Goal> items = c.body.kind == GoalKind::Conjunction
                                              ? c.body.children
                                              : std::vector<Goal>{c.body};
                std::vector<Goal> ordered = sched.reorder(items, bound, head_vars);
                // every head output must be bound at clause exit
                for (size_t i = 0; i < c.head_args.size(); ++i)
                    if (opt.arg_modes[i] == ArgMode::Out && !bound.count(c.head_args[i].name))
                        fail("mode error in " + proc.name + ": output argument " +
                                 std::to_string(i + 1) + " not bound by clause",
                             c.span);
                Goal body = Goal::conj(std::move(ordered));
                body.span = c.body.span;
                c.body = std::move(body);
                proc.clauses.push_back(std::move(c));
            }
            out.procedures.push_back(std::move(proc));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Determinism check
// ---------------------------------------------------------------------------

std::vector<Diagnostic> check_determinism(const std::vector<Procedure> &procs) {
    std::vector<Diagnostic> diags;
    ProcTable table;
    for (const auto &p : procs) table.emplace(p.name, p);

    for (const auto &proc : procs) {
        if (proc.determinism != Determinism::Det && proc.determinism != Determinism::Semidet)
            continue;
        for (const auto &clause : proc.clauses) {
            LabelledConj body = label_conj_fragment(clause.body, 1).first;
            BoundSet bound;
            for (size_t i = 0; i < clause.head_args.size(); ++i)
                if (proc.arg_modes[i] == ArgMode::In) bound.insert(clause.head_args[i].name);
            walk_disjunctions(body, bound, table,
                              [&](const LabelledGoal &disj, const BoundSet &b,
                                  bool in_condition) {
                                  if (in_condition) return;  // quantified context
                                  if (!detect_switch(disj, b))
                                      diags.push_back(Diagnostic{
                                          "regular disjunction in " +
                                              to_string(proc.determinism) + " procedure " +
                                              proc.name,
                                          disj.span});
                              });
        }
    }
    return diags;
}

}  // namespace mtc
