#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agp/rl.hpp"
#include "agp/sepl.hpp"

namespace agp {

// Model roles used by the optimizers; the actor model lives in the agent
// configuration itself.
struct OptimizerConfig {
    std::string optimizer = "reflection";
    RlConfig rl;
    std::string actor_model = "scripted";
    std::string evaluator_model = "scripted";
    std::string optimizer_model = "scripted";

    static OptimizerConfig from_json(const json& j) {
        OptimizerConfig c;
        c.optimizer = j.value("optimizer", std::string("reflection"));
        c.rl.epsilon = j.value("epsilon", c.rl.epsilon);
        c.rl.beta = j.value("beta", c.rl.beta);
        c.rl.epsilon0 = j.value("epsilon0", c.rl.epsilon0);
        c.rl.candidates = j.value("K", c.rl.candidates);
        c.rl.budget = j.value("T", c.rl.budget);
        if (j.contains("models")) {
            const auto& m = j.at("models");
            c.actor_model = m.value("actor", c.actor_model);
            c.evaluator_model = m.value("evaluator", c.evaluator_model);
            c.optimizer_model = m.value("optimizer", c.optimizer_model);
        }
        c.rl.validate();
        return c;
    }
};

inline constexpr const char* kNoIssuesSentinel = "NO_ISSUES";
inline constexpr const char* kImprovedOpen = "<improved>";
inline constexpr const char* kImprovedClose = "</improved>";

// Extracts the text between the sentinel lines; anything non-conforming
// yields nullopt and the caller leaves the variable unchanged.
inline std::optional<std::string> extract_improved(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    bool open = false;
    bool closed = false;
    std::string body;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!open) {
            if (trim(line) == kImprovedOpen) open = true;
            continue;
        }
        if (trim(line) == kImprovedClose) {
            closed = true;
            break;
        }
        if (!body.empty()) body += "\n";
        body += line;
    }
    if (!open || !closed) return std::nullopt;
    return body;
}

namespace detail {

struct ParsedCritique {
    std::vector<Hypothesis> hypotheses;
    std::vector<Proposal> proposals;
    bool no_issues = false;
    bool parsed_any = false;
};

// Critique directive format understood by every optimizer:
//   NO_ISSUES
//   HYPOTHESIS <severity> targets=<id,...> :: <diagnosis>
//   PROPOSAL <variable id>
//   <improved>
//   <replacement text>
//   </improved>
inline ParsedCritique parse_critique(const std::string& text) {
    ParsedCritique out;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string t = trim(lines[i]);
        if (t == kNoIssuesSentinel) {
            out.no_issues = true;
            out.parsed_any = true;
            continue;
        }
        if (t.rfind("HYPOTHESIS ", 0) == 0) {
            Hypothesis h;
            std::string rest = t.substr(11);
            const auto sep = rest.find(" :: ");
            if (sep != std::string::npos) {
                h.text = rest.substr(sep + 4);
                rest = rest.substr(0, sep);
            }
            std::istringstream fields(rest);
            std::string field;
            bool first = true;
            while (fields >> field) {
                if (field.rfind("targets=", 0) == 0) {
                    std::string ids = field.substr(8);
                    std::size_t pos = 0;
                    while (pos <= ids.size()) {
                        const auto comma = ids.find(',', pos);
                        const std::string id =
                            ids.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
                        if (!id.empty()) h.target_variable_ids.push_back(id);
                        if (comma == std::string::npos) break;
                        pos = comma + 1;
                    }
                } else if (first) {
                    h.severity = field;
                }
                first = false;
            }
            out.hypotheses.push_back(std::move(h));
            out.parsed_any = true;
            continue;
        }
        if (t.rfind("PROPOSAL ", 0) == 0) {
            Proposal p;
            p.variable_id = trim(t.substr(9));
            std::string block;
            for (std::size_t j = i + 1; j < lines.size(); ++j) block += lines[j] + "\n";
            if (auto improved = extract_improved(block)) {
                p.new_value = *improved;
                out.proposals.push_back(std::move(p));
                out.parsed_any = true;
                // skip past the consumed sentinel block
                std::size_t j = i + 1;
                bool open = false;
                for (; j < lines.size(); ++j) {
                    if (!open && trim(lines[j]) == kImprovedOpen) open = true;
                    else if (open && trim(lines[j]) == kImprovedClose) break;
                }
                i = j;
            }
            continue;
        }
    }
    return out;
}

inline void warn(RunContext& ctx, const std::string& what, const std::string& detail) {
    if (ctx.trace && !ctx.trace->closed())
        ctx.trace->record("optimizer", std::nullopt, TraceEventKind::Decision,
                          json{{"warning", what}, {"detail", detail}});
}

inline std::string variables_block(const VariableSet& variables) {
    std::string out;
    for (const auto& v : variables.all()) {
        if (v.is_output()) continue;
        out += "- " + v.id + (v.learnable ? " [learnable] :: " : " [fixed] :: ") +
               v.role_description + "\n";
    }
    return out;
}

inline std::string trace_errors_block(const Trace& trace) {
    std::string out;
    for (const auto& e : trace.events())
        if (e.kind == TraceEventKind::Error) out += "- " + e.payload.dump() + "\n";
    return out.empty() ? "- none\n" : out;
}

// Keeps only hypotheses whose targets all exist and proposals aimed at the
// trainable subspace or the output artifact.
inline std::pair<std::vector<Hypothesis>, std::vector<Proposal>> filter_critique(
    ParsedCritique parsed, const VariableSet& variables, RunContext& ctx) {
    std::vector<Hypothesis> hyps;
    for (auto& h : parsed.hypotheses) {
        bool ok = true;
        for (const auto& id : h.target_variable_ids)
            if (!variables.find(id)) ok = false;
        if (ok)
            hyps.push_back(std::move(h));
        else
            warn(ctx, "hypothesis dropped", "unknown target variable");
    }
    std::vector<Proposal> props;
    for (auto& p : parsed.proposals) {
        const EvolvableVariable* v = variables.find(p.variable_id);
        if (!v) {
            warn(ctx, "proposal dropped", "unknown variable '" + p.variable_id + "'");
            continue;
        }
        if (!v->is_output() && !v->learnable) {
            warn(ctx, "proposal dropped", "variable '" + p.variable_id + "' is not learnable");
            continue;
        }
        props.push_back(std::move(p));
    }
    return {std::move(hyps), std::move(props)};
}

inline std::pair<std::vector<Hypothesis>, std::vector<Proposal>> critique_via_model(
    const std::string& request_text, const std::string& model_id,
    const VariableSet& variables, RunContext& ctx, const std::string& tag) {
    if (!ctx.gateway) return {};
    ModelRequest req;
    req.messages.push_back({"user", request_text});
    req.model_id = model_id;
    req.tag = tag;
    std::string critique;
    try {
        critique = ctx.gateway->complete(req, ctx.trace).text;
    } catch (const Error& e) {
        warn(ctx, "critique model failed", e.message());
        return {};
    }
    ParsedCritique parsed = parse_critique(critique);
    if (!parsed.parsed_any) {
        warn(ctx, "unparseable critique", critique);
        return {};
    }
    if (parsed.no_issues) return {};
    return filter_critique(std::move(parsed), variables, ctx);
}

}  // namespace detail

// One diagnosis pass: perfect traces yield no proposals; model failures and
// unparseable critiques degrade to an empty proposal list with a warning
// event, never an abort.
inline std::pair<std::vector<Hypothesis>, std::vector<Proposal>> reflection_round(
    const Trace& trace, const VariableSet& variables, const std::string& model_id,
    RunContext& ctx) {
    if (trace.outcome().success) return {};
    std::string request = "Reflect on the execution and diagnose failures.\n";
    request += "answer: " + trace.outcome().final_answer + "\n";
    request += "errors:\n" + detail::trace_errors_block(trace);
    request += "variables:\n" + detail::variables_block(variables);
    request += "Respond with NO_ISSUES or HYPOTHESIS/PROPOSAL directives.\n";
    return detail::critique_via_model(request, model_id, variables, ctx, "reflect");
}

class ReflectionOptimizer : public Optimizer {
public:
    explicit ReflectionOptimizer(std::string model_id) : model_id_(std::move(model_id)) {}

    std::string name() const override { return "reflection"; }

    std::pair<std::vector<Hypothesis>, std::vector<Proposal>> reflect(
        const Trace& trace, const VariableSet& variables, RunContext& ctx) override {
        return reflection_round(trace, variables, model_id_, ctx);
    }

private:
    std::string model_id_;
};

// -- TextGrad ----------------------------------------------------------------

struct TextGradRoundResult {
    bool converged = false;   // evaluator returned the NO_ISSUES sentinel
    std::string critique;
    int updated_variables = 0;
};

// One textual-gradient-descent step over the optimizable prompt variables:
// forward run, one critique from the evaluator model broadcast into every
// gradient buffer, a constrained rewrite per variable via the optimizer
// model, then an unconditional sync back into the registries.
inline TextGradRoundResult textgrad_round(const AgentSystem& system, const Objective& objective,
                                          VariableSet& variables,
                                          const std::string& evaluator_model,
                                          const std::string& optimizer_model, Trace& trace) {
    TextGradRoundResult result;
    std::vector<EvolvableVariable*> targets;
    for (auto& v : variables.all())
        if (!v.is_output() && v.learnable && v.origin_kind == EntityKind::Prompt)
            targets.push_back(&v);
    if (targets.empty()) return result;  // nothing optimizable: the round is a no-op

    RunContext ctx{system.gateway, &trace, system.registries};

    // forward
    const ExecutionResult exec = execute_system(system, *system.registries, objective, trace);

    // loss: natural-language critique of the run
    std::string request = "Evaluate the execution and produce a critique.\n";
    request += "answer: " + (exec.error ? "<error: " + exec.diagnostic + ">" : exec.output) + "\n";
    request += "expected: " + objective.success.value + "\n";
    request += "Respond with a critique, or NO_ISSUES if the output is correct.\n";
    ModelRequest req;
    req.messages.push_back({"user", request});
    req.model_id = evaluator_model;
    req.tag = "textgrad:loss";
    try {
        result.critique = system.gateway->complete(req, &trace).text;
    } catch (const Error& e) {
        detail::warn(ctx, "evaluator model failed", e.message());
        return result;
    }
    if (trim(result.critique) == kNoIssuesSentinel) {
        result.converged = true;
        for (auto* v : targets) v->gradients.clear();
        return result;
    }

    // backward: the same critique lands in every optimizable prompt buffer
    for (auto* v : targets) v->gradients.push_back(result.critique);

    // improve: constrained rewrite per variable; extraction failure leaves
    // the variable unchanged
    std::vector<VariableAssignment> assignments;
    for (auto* v : targets) {
        std::string update = "Improve the variable using the feedback.\n";
        update += "role: " + v->role_description + "\n";
        update += "current value:\n" + v->value + "\n";
        update += "feedback:\n";
        for (const auto& g : v->gradients) update += "- " + g + "\n";
        update += "Respond with the improved text between " + std::string(kImprovedOpen) +
                  " and " + kImprovedClose + " lines.\n";
        ModelRequest opt;
        opt.messages.push_back({"user", update});
        opt.model_id = optimizer_model;
        opt.tag = "textgrad:improve";
        try {
            const std::string reply = system.gateway->complete(opt, &trace).text;
            if (auto improved = extract_improved(reply)) {
                if (*improved != v->value) {
                    v->value = *improved;
                    assignments.push_back({v->id, v->value});
                    ++result.updated_variables;
                }
            } else {
                detail::warn(ctx, "non-conforming optimizer output", v->id);
            }
        } catch (const Error& e) {
            detail::warn(ctx, "optimizer model failed", e.message());
        }
    }

    // commit: sync back and clear caches
    if (!assignments.empty()) system.registries->set_variables(assignments);
    for (auto* v : targets) v->gradients.clear();
    return result;
}

struct TextGradResult {
    VariableSet state;
    std::vector<Trace> traces;
    int rounds = 0;
    bool converged = false;
};

inline TextGradResult textgrad_loop(const AgentSystem& system, const Objective& objective,
                                    const std::string& evaluator_model,
                                    const std::string& optimizer_model, int budget) {
    if (budget < 1) throw Error(ErrorKind::InvalidArgument, "budget must be >= 1");
    SeplEngine engine(system, objective);
    TextGradResult result;
    result.state = engine.lift_variables();
    for (int k = 0; k < budget; ++k) {
        Trace trace("textgrad-" + std::to_string(k + 1));
        const TextGradRoundResult round = textgrad_round(system, objective, result.state,
                                                         evaluator_model, optimizer_model,
                                                         trace);
        trace.close({result.state.output(), round.converged});
        result.traces.push_back(trace);
        ++result.rounds;
        if (round.converged) {
            result.converged = true;
            break;
        }
        if (round.updated_variables == 0 && round.critique.empty()) break;  // no-op round
    }
    return result;
}

// -- Reinforce++ ---------------------------------------------------------------

struct RlLoopResult {
    std::string solution;
    VariableSet state;
    std::vector<RlSignals> signals;
    std::vector<GroupSignals> group_signals;
    std::vector<Evaluation> evaluations;
    std::vector<Trace> traces;
    int iterations = 0;
    bool satisfied = false;
};

namespace detail {

inline std::string rl_signals_block(const RlSignals& s) {
    std::ostringstream out;
    out << "reward: " << s.reward << "\nadvantage: " << s.advantage
        << "\nobjective: " << s.objective << "\nratio: " << s.ratio
        << "\npenalty: " << s.penalty << "\n";
    return out.str();
}

// Reflection conditioned on RL signals over the trainable resources.
inline std::pair<std::vector<Hypothesis>, std::vector<Proposal>> rl_reflection(
    const Trace& trace, const VariableSet& variables, const std::string& signals_block,
    const std::string& model_id, RunContext& ctx) {
    std::string request = "Reflect with RL signals and diagnose failures.\n";
    request += signals_block;
    request += "answer: " + trace.outcome().final_answer + "\n";
    request += "errors:\n" + trace_errors_block(trace);
    request += "variables:\n" + variables_block(variables);
    request += "Respond with NO_ISSUES or HYPOTHESIS/PROPOSAL directives.\n";
    auto [hyps, props] = critique_via_model(request, model_id, variables, ctx, "rl:reflect");
    std::vector<Proposal> trainable_only;
    for (auto& p : props)
        if (p.variable_id != "output") trainable_only.push_back(std::move(p));
    return {std::move(hyps), std::move(trainable_only)};
}

// Reflection over the solution text itself; proposals may only target the
// output artifact.
inline std::vector<Proposal> rl_solution_refinement(const std::string& solution,
                                                    const std::string& signals_block,
                                                    const VariableSet& variables,
                                                    const std::string& model_id,
                                                    RunContext& ctx) {
    std::string request = "Refine the solution with RL signals.\n";
    request += signals_block;
    request += "solution: " + solution + "\n";
    request += "Respond with NO_ISSUES or a PROPOSAL output directive.\n";
    auto [hyps, props] = critique_via_model(request, model_id, variables, ctx, "rl:refine");
    (void)hyps;
    std::vector<Proposal> output_only;
    for (auto& p : props)
        if (p.variable_id == "output") output_only.push_back(std::move(p));
    return output_only;
}

}  // namespace detail

// Clipped-objective loop: signal computation, RL-conditioned reflection over
// the trainables with gated commits, re-run, optional solution refinement,
// early stop once the task reward hits 1.
inline RlLoopResult reinforcepp_loop(const AgentSystem& system, const Objective& objective,
                                     const std::string& y_star, const std::string& y_sft,
                                     const RlConfig& cfg, const std::string& reflect_model) {
    cfg.validate();
    SeplEngine engine(system, objective);
    RlLoopResult result;
    VariableSet current = engine.lift_variables();

    Trace rollout0("rollout-0");
    Evaluation s0 = engine.evaluate(current, rollout0);
    rollout0.close({current.output(), s0.converged});
    engine.set_best_score(s0.score);
    result.evaluations.push_back(s0);
    result.traces.push_back(rollout0);

    std::string y = current.output();
    std::string y_prev = y;
    Trace last_rollout = rollout0;

    for (int t = 0; t < cfg.budget; ++t) {
        const RlSignals signals = reinforcepp_signals(y, y_prev, y_star, y_sft, cfg);
        result.signals.push_back(signals);
        if (signals.reward == 1.0) {
            result.satisfied = true;
            break;
        }
        ++result.iterations;
        const std::string block = detail::rl_signals_block(signals);

        Trace iteration("iteration-" + std::to_string(t + 1));
        RunContext ctx{system.gateway, &iteration, system.registries};
        auto [hyps, props] =
            detail::rl_reflection(last_rollout, current, block, reflect_model, ctx);
        if (!props.empty()) {
            try {
                VariableSet candidate = engine.improve(current, props);
                Evaluation ev = engine.evaluate(candidate, iteration);
                engine.commit(candidate, ev, current, iteration);
                result.evaluations.push_back(ev);
            } catch (const Error& e) {
                detail::warn(ctx, "improve failed", e.message());
            }
        }
        iteration.close({current.output(), false});
        result.traces.push_back(iteration);

        // re-run under the (possibly) updated resources
        Trace rollout("rollout-" + std::to_string(t + 1));
        const ExecutionResult exec =
            execute_system(system, *system.registries, objective, rollout);
        std::string y_next = exec.error ? std::string{} : exec.output;
        rollout.close({y_next, exact_match_reward(y_next, y_star) == 1.0});
        result.traces.push_back(rollout);
        current.set_output(y_next);

        // optional solution refinement with gated commit
        Trace refine("refine-" + std::to_string(t + 1));
        RunContext rctx{system.gateway, &refine, system.registries};
        const auto refine_props =
            detail::rl_solution_refinement(y_next, block, current, reflect_model, rctx);
        if (!refine_props.empty()) {
            try {
                VariableSet candidate = engine.improve(current, refine_props);
                Evaluation ev = engine.evaluate(candidate, refine);
                engine.commit(candidate, ev, current, refine);
                result.evaluations.push_back(ev);
            } catch (const Error& e) {
                detail::warn(rctx, "refinement failed", e.message());
            }
        }
        refine.close({current.output(), false});
        result.traces.push_back(refine);

        if (exact_match_reward(current.output(), y_star) == 1.0) {
            result.satisfied = true;
            y_prev = y;
            y = current.output();
            break;
        }
        y_prev = y;
        y = current.output();
        last_rollout = rollout;
    }

    result.solution = current.output();
    result.state = current;
    return result;
}

// -- GRPO ----------------------------------------------------------------------

namespace detail {

inline std::string group_signals_block(const GroupSignals& g,
                                       const std::vector<std::string>& candidates) {
    std::ostringstream out;
    out << "group mean: " << g.mean_reward << "\ngroup std: " << g.std_reward << "\n";
    std::size_t best = 0;
    for (std::size_t i = 0; i < g.rewards.size(); ++i)
        if (g.rewards[i] > g.rewards[best]) best = i;
    out << "best candidate: " << (candidates.empty() ? "" : candidates[best]) << "\n";
    out << "candidates:\n";
    for (std::size_t i = 0; i < candidates.size(); ++i)
        out << "- answer[" << i << "]: " << candidates[i] << " (r=" << g.rewards[i]
            << ", A=" << g.advantages[i] << ", J=" << g.objectives[i]
            << ", ratio=" << g.ratios[i] << ")\n";
    return out.str();
}

}  // namespace detail

// Group-relative loop: K rollouts per iteration, group-normalized advantages
// with the one-sided clip, reflection conditioned on the whole candidate
// set, gated commits, re-run and optional solution refinement.
inline RlLoopResult grpo_loop(const AgentSystem& system, const Objective& objective,
                              const std::string& y_star, const RlConfig& cfg,
                              const std::string& reflect_model) {
    cfg.validate();
    SeplEngine engine(system, objective);
    RlLoopResult result;
    VariableSet current = engine.lift_variables();

    Trace rollout0("rollout-0");
    Evaluation s0 = engine.evaluate(current, rollout0);
    rollout0.close({current.output(), s0.converged});
    engine.set_best_score(s0.score);
    result.evaluations.push_back(s0);
    result.traces.push_back(rollout0);

    std::string y = current.output();
    std::string y_prev = y;

    if (exact_match_reward(y, y_star) == 1.0) {
        result.satisfied = true;
        result.solution = y;
        result.state = current;
        return result;
    }

    for (int t = 0; t < cfg.budget; ++t) {
        ++result.iterations;

        // sample K rollouts under the current resources
        std::vector<std::string> candidates;
        candidates.reserve(static_cast<std::size_t>(cfg.candidates));
        for (int i = 0; i < cfg.candidates; ++i) {
            Trace rollout("rollout-" + std::to_string(t + 1) + "-" + std::to_string(i));
            const ExecutionResult exec =
                execute_system(system, *system.registries, objective, rollout);
            const std::string yi = exec.error ? std::string{} : exec.output;
            rollout.close({yi, exact_match_reward(yi, y_star) == 1.0});
            result.traces.push_back(rollout);
            candidates.push_back(yi);
        }

        const GroupSignals group = grpo_signals(candidates, y_star, y_prev, cfg);
        result.group_signals.push_back(group);
        const std::string block = detail::group_signals_block(group, candidates);

        // reflection conditioned on the multi-candidate signals
        Trace iteration("iteration-" + std::to_string(t + 1));
        RunContext ctx{system.gateway, &iteration, system.registries};
        std::string request = "Reflect with group RL signals and diagnose failures.\n";
        request += "answer: " + y + "\n";
        request += block;
        request += "variables:\n" + detail::variables_block(current);
        request += "Respond with NO_ISSUES or HYPOTHESIS/PROPOSAL directives.\n";
        auto [hyps, props] =
            detail::critique_via_model(request, reflect_model, current, ctx, "grpo:reflect");
        std::vector<Proposal> trainable_only;
        for (auto& p : props)
            if (p.variable_id != "output") trainable_only.push_back(std::move(p));
        if (!trainable_only.empty()) {
            try {
                VariableSet candidate = engine.improve(current, trainable_only);
                Evaluation ev = engine.evaluate(candidate, iteration);
                engine.commit(candidate, ev, current, iteration);
                result.evaluations.push_back(ev);
            } catch (const Error& e) {
                detail::warn(ctx, "improve failed", e.message());
            }
        }
        iteration.close({current.output(), false});
        result.traces.push_back(iteration);

        // re-run under the updated resources
        Trace rerun("rerun-" + std::to_string(t + 1));
        const ExecutionResult exec = execute_system(system, *system.registries, objective, rerun);
        std::string y_next = exec.error ? std::string{} : exec.output;
        rerun.close({y_next, exact_match_reward(y_next, y_star) == 1.0});
        result.traces.push_back(rerun);
        current.set_output(y_next);

        // optional solution refinement
        Trace refine("refine-" + std::to_string(t + 1));
        RunContext rctx{system.gateway, &refine, system.registries};
        const auto refine_props =
            detail::rl_solution_refinement(y_next, block, current, reflect_model, rctx);
        if (!refine_props.empty()) {
            try {
                VariableSet candidate = engine.improve(current, refine_props);
                Evaluation ev = engine.evaluate(candidate, refine);
                engine.commit(candidate, ev, current, refine);
                result.evaluations.push_back(ev);
            } catch (const Error& e) {
                detail::warn(rctx, "refinement failed", e.message());
            }
        }
        refine.close({current.output(), false});
        result.traces.push_back(refine);

        if (exact_match_reward(current.output(), y_star) == 1.0) {
            result.satisfied = true;
            y_prev = y;
            y = current.output();
            break;
        }
        y_prev = y;
        y = current.output();
    }

    result.solution = current.output();
    result.state = current;
    return result;
}

}  // namespace agp
