#include "engine.hpp"

#include <functional>
#include <limits>
#include <ostream>

namespace mtc {

// ---------------------------------------------------------------------------
// Unification
// ---------------------------------------------------------------------------

namespace {

const Term *walk(const Term *t, const Bindings &b) {
    while (t->is_var()) {
        auto it = b.find(t->name);
        if (it == b.end()) return t;
        t = &it->second;
    }
    return t;
}

bool occurs(const std::string &var, const Term &t, const Bindings &b) {
    const Term *w = walk(&t, b);
    if (w->is_var()) return w->name == var;
    for (const auto &a : w->args)
        if (occurs(var, a, b)) return true;
    return false;
}

bool unify_into(const Term &a, const Term &b, Bindings &env) {
    const Term *x = walk(&a, env);
    const Term *y = walk(&b, env);
    if (x->is_var() && y->is_var()) {
        if (x->name == y->name) return true;
        env.emplace(x->name, *y);
        return true;
    }
    if (x->is_var()) {
        if (occurs(x->name, *y, env)) return false;
        env.emplace(x->name, *y);
        return true;
    }
    if (y->is_var()) {
        if (occurs(y->name, *x, env)) return false;
        env.emplace(y->name, *x);
        return true;
    }
    if (x->is_int() || y->is_int()) return x->is_int() && y->is_int() && x->value == y->value;
    if (x->name != y->name || x->args.size() != y->args.size()) return false;
    for (size_t i = 0; i < x->args.size(); ++i)
        if (!unify_into(x->args[i], y->args[i], env)) return false;
    return true;
}

}  // namespace

std::optional<Bindings> unify(const Term &a, const Term &b, const Bindings &in) {
    Bindings env = in;
    if (!unify_into(a, b, env)) return std::nullopt;
    return env;
}

Term resolve_term(const Term &t, const Bindings &b) {
    const Term *w = walk(&t, b);
    Term out = *w;
    for (auto &a : out.args) a = resolve_term(a, b);
    return out;
}

// ---------------------------------------------------------------------------
// Solutions
// ---------------------------------------------------------------------------

const Term *Solution::value_of(const std::string &name) const {
    for (size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == name) return &values[i];
    return nullptr;
}

Bindings Solution::as_bindings() const {
    Bindings b;
    for (size_t i = 0; i < vars.size(); ++i) b.emplace(vars[i], values[i]);
    return b;
}

std::map<LabelId, long long> CoverageLog::counts() const {
    std::map<LabelId, long long> out;
    for (const auto &e : events_)
        for (LabelId l : e.labels) ++out[l];
    return out;
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

namespace {

EngineError error_term(const std::string &functor, std::vector<Term> args) {
    return EngineError{Term::compound(functor, std::move(args))};
}

class Solver {
   public:
    Solver(const ProcTable &procs, const SolveOptions &opts) : procs_(procs), opts_(opts) {}

    EngineOutcome run(const Query &q) {
        EngineOutcome out;
        auto on_solution = [&](const Bindings &b) {
            Solution s;
            for (const auto &v : q.out_vars) {
                Term value = resolve_term(Term::var(v), b);
                if (!term_is_ground(value))
                    throw error_term("internal_error",
                                     {Term::atom("unbound_output"), Term::var(v)});
                s.vars.push_back(v);
                s.values.push_back(std::move(value));
            }
            out.solutions.push_back(std::move(s));
            if (opts_.limit && out.solutions.size() >= *opts_.limit) stop_ = true;
        };
        try {
            eval(q.goal, opts_.initial, on_solution);
        } catch (const EngineError &e) {
            if (opts_.policy == ExceptionPolicy::Propagate) throw;
            out.is_exception = true;
            out.exception = e.payload;
            out.solutions.clear();
        }
        return out;
    }

   private:
    using Cont = std::function<void(const Bindings &)>;

    void eval(const Goal &g, const Bindings &b, const Cont &k) {
        if (stop_) return;
        switch (g.kind) {
            case GoalKind::Unify: {
                auto nb = unify(g.lhs, g.rhs, b);
                if (nb) k(*nb);
                return;
            }
            case GoalKind::Call:
                eval_call(g, b, k);
                return;
            case GoalKind::Conjunction:
                eval_conj(g.children, 0, b, k);
                return;
            case GoalKind::Disjunction:
                for (const auto &child : g.children) {
                    if (stop_) return;
                    eval(child, b, k);
                }
                return;
            case GoalKind::Negation: {
                // explored exhaustively so coverage counts match the batched
                // instrumentation; no bindings escape
                bool found = false;
                eval(g.children[0], b, [&](const Bindings &) { found = true; });
                if (!found && !stop_) k(b);
                return;
            }
            case GoalKind::IfThenElse: {
                bool cond_met = false;
                eval(g.children[0], b, [&](const Bindings &cb) {
                    cond_met = true;
                    eval(g.children[1], cb, k);
                });
                if (!cond_met && !stop_) eval(g.children[2], b, k);
                return;
            }
        }
    }

    void eval_conj(const std::vector<Goal> &gs, size_t idx, const Bindings &b, const Cont &k) {
        if (stop_) return;
        if (idx >= gs.size()) {
            k(b);
            return;
        }
        eval(gs[idx], b, [&](const Bindings &nb) { eval_conj(gs, idx + 1, nb, k); });
    }

    void eval_call(const Goal &g, const Bindings &b, const Cont &k) {
        int arity = static_cast<int>(g.args.size());
        if (is_coverage_builtin(g.callee, arity)) {
            eval_coverage(g, b, k);
            return;
        }
        if (is_builtin(g.callee, arity)) {
            eval_builtin(g, b, k);
            return;
        }
        auto it = procs_.find(g.callee);
        if (it == procs_.end() || it->second.arity != arity)
            throw error_term("undefined_procedure",
                             {Term::atom(g.callee), Term::integer(arity)});
        const Procedure &proc = it->second;

        if (depth_ >= opts_.max_depth) throw EngineError{Term::atom("depth_limit_exceeded")};
        ++depth_;
        size_t count = 0;
        bool single = proc.determinism == Determinism::Det ||
                      proc.determinism == Determinism::Semidet;
        for (const auto &clause : proc.clauses) {
            if (stop_) break;
            std::string suffix = "#" + std::to_string(++activation_counter_);
            Bindings nb = b;
            bool matched = true;
            std::vector<Goal> body{rename_goal(clause.body, suffix)};
            for (size_t i = 0; i < clause.head_args.size(); ++i) {
                Term head = rename_term(clause.head_args[i], suffix);
                if (!unify_into(g.args[i], head, nb)) {
                    matched = false;
                    break;
                }
            }
            if (!matched) continue;
            eval(body[0], nb, [&](const Bindings &sb) {
                ++count;
                if (single && count == 2)
                    throw error_term("determinism_violation",
                                     {Term::atom(proc.name), Term::atom("second_solution")});
                k(sb);
            });
        }
        --depth_;
        if (!stop_ && count == 0 &&
            (proc.determinism == Determinism::Det || proc.determinism == Determinism::Multi))
            throw error_term("determinism_violation",
                             {Term::atom(proc.name), Term::atom("failed")});
    }

    // --- coverage goals ---------------------------------------------------

    void eval_coverage(const Goal &g, const Bindings &b, const Cont &k) {
        if (!opts_.coverage) {
            k(b);
            return;
        }
        if (g.callee == "log") {
            opts_.coverage->single(label_arg(g));
            k(b);
            return;
        }
        if (g.callee == "log_leaf") {
            LabelId leaf = label_arg(g);
            const std::vector<LabelId> *batch = nullptr;
            for (auto it = plan_stack_.rbegin(); it != plan_stack_.rend(); ++it) {
                auto f = it->leaf_batches.find(leaf);
                if (f != it->leaf_batches.end()) {
                    batch = &f->second;
                    break;
                }
            }
            if (!batch)
                throw InternalError("log_leaf(" + std::to_string(leaf) +
                                    ") reached without an active plan");
            opts_.coverage->batch(*batch);
            k(b);
            return;
        }
        // coverage_plan(Id, Tree)
        SwitchTree tree = switch_tree_from_term(g.args[1]);
        EdgeOutcomes outcomes;
        for (const auto &root : tree.roots) evaluate_edges(root, b, outcomes);
        BatchPlan plan = mark_and_batch(tree, outcomes);
        if (!plan.pre_switch.empty()) opts_.coverage->batch(plan.pre_switch);
        plan_stack_.push_back(std::move(plan));
        k(b);
        plan_stack_.pop_back();
    }

    void evaluate_edges(const SwitchNode &node, const Bindings &b, EdgeOutcomes &outcomes) {
        for (const auto &child : node.children) {
            if (child.in_edge) {
                auto nb = unify(child.in_edge->lhs, child.in_edge->rhs, b);
                outcomes[child.label] = nb.has_value();
                if (nb) evaluate_edges(child, *nb, outcomes);
            } else {
                evaluate_edges(child, b, outcomes);
            }
        }
    }

    static LabelId label_arg(const Goal &g) {
        if (!g.args[0].is_int())
            throw InternalError("coverage goal expects an integer label");
        return static_cast<LabelId>(g.args[0].value);
    }

    // --- builtins ----------------------------------------------------------

    void eval_builtin(const Goal &g, const Bindings &b, const Cont &k) {
        const std::string &name = g.callee;
        if (name == "=") {
            auto nb = unify(g.args[0], g.args[1], b);
            if (nb) k(*nb);
            return;
        }
        if (name == "<" || name == ">" || name == "=<" || name == ">=") {
            long long l = int_arg(g, 0, b), r = int_arg(g, 1, b);
            bool ok = name == "<" ? l < r : name == ">" ? l > r : name == "=<" ? l <= r : l >= r;
            if (ok) k(b);
            return;
        }
        if (name == "is") {
            long long v = eval_arith(resolve_term(g.args[1], b));
            auto nb = unify(g.args[0], Term::integer(v), b);
            if (nb) k(*nb);
            return;
        }
        if (name == "length") {
            Term list = resolve_term(g.args[0], b);
            long long n = 0;
            const Term *cur = &list;
            while (cur->is_cons()) {
                ++n;
                cur = &cur->args[1];
            }
            if (cur->is_var()) throw error_term("instantiation_error", {Term::atom("length")});
            if (!cur->is_nil()) throw error_term("type_error", {Term::atom("length")});
            auto nb = unify(g.args[1], Term::integer(n), b);
            if (nb) k(*nb);
            return;
        }
        if (name == "throw") throw EngineError{resolve_term(g.args[0], b)};
        if (name == "print") {
            Term value = resolve_term(g.args[0], b);
            if (opts_.print_out) *opts_.print_out << term_to_text(value) << "\n";
            k(b);
            return;
        }
        throw InternalError("unhandled builtin " + name);
    }

    long long int_arg(const Goal &g, size_t i, const Bindings &b) {
        Term t = resolve_term(g.args[i], b);
        if (t.is_var()) throw error_term("instantiation_error", {Term::atom(g.callee)});
        if (!t.is_int()) throw error_term("type_error", {Term::atom(g.callee)});
        return t.value;
    }

    long long eval_arith(const Term &t) {
        if (t.is_int()) return t.value;
        if (t.is_var()) throw error_term("instantiation_error", {Term::atom("is")});
        if (t.args.size() == 2 &&
            (t.name == "+" || t.name == "-" || t.name == "*" || t.name == "/")) {
            long long l = eval_arith(t.args[0]);
            long long r = eval_arith(t.args[1]);
            long long res = 0;
            bool overflow = false;
            if (t.name == "+") overflow = __builtin_add_overflow(l, r, &res);
            else if (t.name == "-") overflow = __builtin_sub_overflow(l, r, &res);
            else if (t.name == "*") overflow = __builtin_mul_overflow(l, r, &res);
            else {
                if (r == 0) throw EngineError{Term::atom("division_by_zero")};
                if (l == std::numeric_limits<long long>::min() && r == -1) overflow = true;
                else res = l / r;
            }
            if (overflow) throw EngineError{Term::atom("overflow")};
            return res;
        }
        throw error_term("type_error", {Term::atom("is")});
    }

    // --- clause renaming ---------------------------------------------------

    static Term rename_term(const Term &t, const std::string &suffix) {
        if (t.is_var()) {
            Term v = t;
            v.name += suffix;
            return v;
        }
        Term out = t;
        for (auto &a : out.args) a = rename_term(a, suffix);
        return out;
    }

    static Goal rename_goal(const Goal &g, const std::string &suffix) {
        Goal out = g;
        switch (g.kind) {
            case GoalKind::Unify:
                out.lhs = rename_term(g.lhs, suffix);
                out.rhs = rename_term(g.rhs, suffix);
                return out;
            case GoalKind::Call:
                for (auto &a : out.args) a = rename_term(a, suffix);
                return out;
            default:
                for (auto &c : out.children) c = rename_goal(c, suffix);
                return out;
        }
    }

    const ProcTable &procs_;
    const SolveOptions &opts_;
    bool stop_ = false;
    size_t depth_ = 0;
    long long activation_counter_ = 0;
    std::vector<BatchPlan> plan_stack_;
};

}  // namespace

EngineOutcome solve(const Query &q, const ProcTable &procs, const SolveOptions &opts) {
    return Solver(procs, opts).run(q);
}

}  // namespace mtc
