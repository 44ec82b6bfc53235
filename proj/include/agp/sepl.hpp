#pragma once

#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "agp/gateway.hpp"
#include "agp/persistence.hpp"
#include "agp/registry.hpp"
#include "agp/text.hpp"
#include "agp/toolscript.hpp"
#include "agp/tracer.hpp"
#include "agp/variables.hpp"

namespace agp {

// Causal failure diagnosis over lifted variables.
struct Hypothesis {
    std::string text;
    std::vector<std::string> target_variable_ids;
    std::string severity = "minor";
};

// Concrete update proposal: a new value for one learnable variable or for
// the output artifact.
struct Proposal {
    std::string variable_id;
    std::string new_value;
    std::string rationale;
};

struct SuccessSpec {
    enum class Kind { ExactMatch, Substring, PredicateScript };
    Kind kind = Kind::ExactMatch;
    std::string value;

    bool holds(const std::string& output) const {
        switch (kind) {
            case Kind::ExactMatch: return exact_match_reward(output, value) == 1.0;
            case Kind::Substring: return output.find(value) != std::string::npos;
            case Kind::PredicateScript: {
                const auto program = toolscript::Program::compile(value);
                const json result = program.run(json{{"output", output}});
                return result.is_boolean() ? result.get<bool>() : !result.is_null();
            }
        }
        return false;
    }
};

struct ScoreSpec {
    enum class Kind { ExactMatch, Substring, Similarity };
    Kind kind = Kind::ExactMatch;
    std::string target;

    double score(const std::string& output) const {
        switch (kind) {
            case Kind::ExactMatch: return exact_match_reward(output, target);
            case Kind::Substring:
                return output.find(target) != std::string::npos ? 1.0 : 0.0;
            case Kind::Similarity: return similarity(output, target);
        }
        return 0.0;
    }
};

inline const std::set<std::string>& known_safety_invariants() {
    static const std::set<std::string> names = {"no_runtime_error", "output_nonempty",
                                                "contract_parse_ok"};
    return names;
}

// Optimization objective: task input, success predicate, bounded score
// function and the safety invariants every committed state must satisfy.
struct Objective {
    std::string task;
    std::vector<std::string> attachments;
    SuccessSpec success;
    ScoreSpec score;
    std::vector<std::string> safety = {"no_runtime_error", "output_nonempty",
                                       "contract_parse_ok"};
    double threshold = 1.0;

    void validate() const {
        if (threshold < 0.0 || threshold > 1.0)
            throw Error(ErrorKind::InvalidArgument, "threshold must lie in [0,1]");
        for (const auto& s : safety)
            if (!known_safety_invariants().count(s))
                throw Error(ErrorKind::InvalidArgument, "unknown safety invariant '" + s + "'");
    }

    double score_of(const std::string& output) const { return score.score(output); }

    static Objective from_json(const json& j) {
        Objective o;
        o.task = j.value("task", std::string{});
        for (const auto& a : j.value("attachments", json::array()))
            if (a.is_string()) o.attachments.push_back(a.get<std::string>());
        if (j.contains("success")) {
            const auto& s = j.at("success");
            const std::string kind = s.value("kind", std::string("exact_match"));
            if (kind == "exact_match") o.success.kind = SuccessSpec::Kind::ExactMatch;
            else if (kind == "substring") o.success.kind = SuccessSpec::Kind::Substring;
            else if (kind == "predicate_script")
                o.success.kind = SuccessSpec::Kind::PredicateScript;
            else throw Error(ErrorKind::ParseError, "unknown success kind '" + kind + "'");
            o.success.value = s.value("value", std::string{});
        }
        if (j.contains("score")) {
            const auto& s = j.at("score");
            const std::string kind = s.value("kind", std::string("exact_match"));
            if (kind == "exact_match") o.score.kind = ScoreSpec::Kind::ExactMatch;
            else if (kind == "substring") o.score.kind = ScoreSpec::Kind::Substring;
            else if (kind == "similarity") o.score.kind = ScoreSpec::Kind::Similarity;
            else throw Error(ErrorKind::ParseError, "unknown score kind '" + kind + "'");
            o.score.target = s.value("target", s.value("value", std::string{}));
        } else {
            o.score.kind = ScoreSpec::Kind::ExactMatch;
            o.score.target = o.success.value;
        }
        if (j.contains("safety")) {
            o.safety.clear();
            for (const auto& s : j.at("safety"))
                if (s.is_string()) o.safety.push_back(s.get<std::string>());
        }
        o.threshold = j.value("threshold", 1.0);
        o.validate();
        return o;
    }
};

// Quantitative score plus named safety flags. converged implies every
// safety flag passed.
struct Evaluation {
    double score = 0.0;
    std::map<std::string, bool> safety;
    bool converged = false;

    bool all_safety_pass() const {
        for (const auto& [_, ok] : safety)
            if (!ok) return false;
        return true;
    }
};

// The system under evolution: an entry resource plus the registries and
// gateway it executes against.
struct AgentSystem {
    RegistrySet* registries = nullptr;
    ModelGateway* gateway = nullptr;
    EntityKind entry_kind = EntityKind::Agent;
    std::string entry_name;
};

struct ExecutionResult {
    std::string output;
    bool error = false;
    std::string diagnostic;
};

inline std::string extract_answer(const json& out) {
    if (out.is_string()) return out.get<std::string>();
    if (out.is_object()) {
        if (out.contains("answer") && out["answer"].is_string())
            return out["answer"].get<std::string>();
        if (out.contains("text") && out["text"].is_string())
            return out["text"].get<std::string>();
    }
    return out.dump();
}

// Runs the system's entry resource against the objective task, recording
// into the supplied trace. Task-level failures are captured, not thrown.
inline ExecutionResult execute_system(const AgentSystem& system, RegistrySet& regs,
                                      const Objective& objective, Trace& trace) {
    RunContext ctx{system.gateway, &trace, &regs};
    json input = {{"task", objective.task}};
    if (!objective.attachments.empty()) input["attachments"] = objective.attachments;
    ExecutionResult result;
    try {
        const json out = regs.of(system.entry_kind).run(system.entry_name, input, ctx);
        result.output = extract_answer(out);
    } catch (const Error& e) {
        result.error = true;
        result.diagnostic = e.what();
    }
    return result;
}

using Executor = std::function<ExecutionResult(const AgentSystem&, RegistrySet&,
                                               const Objective&, Trace&)>;

// Transitive resource closure of the system entry: agents pull in their
// prompts and tools; delegating tools pull in their agents.
inline std::vector<std::pair<EntityKind, std::string>> system_closure(const AgentSystem& system) {
    std::vector<std::pair<EntityKind, std::string>> out;
    std::set<std::pair<EntityKind, std::string>> seen;
    std::vector<std::pair<EntityKind, std::string>> frontier = {
        {system.entry_kind, system.entry_name}};
    while (!frontier.empty()) {
        auto [kind, name] = frontier.back();
        frontier.pop_back();
        if (!seen.insert({kind, name}).second) continue;
        RegistrationRecord rec;
        try {
            rec = system.registries->of(kind).get_info(name);
        } catch (const Error&) {
            throw Error(ErrorKind::UnregisteredResource,
                        std::string(kind_name(kind)) + " '" + name + "' is not registered");
        }
        out.emplace_back(kind, name);
        if (kind == EntityKind::Agent) {
            for (const auto& p : RegistrySet::agent_prompt_names(rec))
                frontier.emplace_back(EntityKind::Prompt, p);
            for (const auto& t : RegistrySet::agent_tool_names(rec))
                frontier.emplace_back(EntityKind::Tool, t);
        } else if (kind == EntityKind::Tool) {
            const std::string source = rec.entity.mapping.value("source", std::string{});
            if (source.rfind("agent:", 0) == 0)
                frontier.emplace_back(EntityKind::Agent, source.substr(6));
        }
    }
    return out;
}

// Reflect + Select: maps an execution trace and the current variable view to
// update proposals. Implementations may consult models through the context.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual std::string name() const = 0;
    virtual std::pair<std::vector<Hypothesis>, std::vector<Proposal>> reflect(
        const Trace& trace, const VariableSet& variables, RunContext& ctx) = 0;
};

struct LoopResult {
    VariableSet state;                 // best committed state
    std::vector<Evaluation> evaluations;
    std::vector<Trace> traces;
    int iterations = 0;
    bool converged = false;
    double best_score = 0.0;
};

// Closed-loop engine: lifting, candidate staging against a registry shadow,
// gated commits and the iteration driver. One engine instance drives one
// loop and is single-threaded over its own state.
class SeplEngine {
public:
    SeplEngine(AgentSystem system, Objective objective)
        : system_(std::move(system)),
          objective_(std::move(objective)),
          executor_(&execute_system) {
        objective_.validate();
        if (!system_.registries)
            throw Error(ErrorKind::InvalidArgument, "system requires registries");
    }

    void set_executor(Executor executor) { executor_ = std::move(executor); }

    const AgentSystem& system() const { return system_; }
    const Objective& objective() const { return objective_; }
    double best_score() const { return best_score_; }
    void set_best_score(double s) { best_score_ = s; }

    // Projects the system's resource closure into the variable space. The
    // output artifact is always present; the trainable subspace is the set
    // of variables whose origin resource is marked trainable.
    VariableSet lift_variables() const {
        VariableSet vars;
        std::set<std::string> seen;
        for (const auto& [kind, name] : system_closure(system_)) {
            if (kind == EntityKind::Agent) continue;
            for (auto& v : system_.registries->of(kind).get_variables(name))
                if (seen.insert(v.id).second) vars.add(std::move(v));
        }
        return vars;
    }

    // Improve: apply proposals to a copy of the current state. Proposals
    // must target learnable variables or the output artifact; the live
    // registry is untouched until commit.
    VariableSet improve(const VariableSet& current, const std::vector<Proposal>& proposals) {
        VariableSet candidate = current;
        candidate.set_output_overridden(false);
        for (const auto& p : proposals) {
            EvolvableVariable* var = candidate.find(p.variable_id);
            if (!var)
                throw Error(ErrorKind::UnknownVariable, "no variable '" + p.variable_id + "'");
            if (!var->is_output() && !var->learnable)
                throw Error(ErrorKind::NotLearnable,
                            "variable '" + p.variable_id + "' is not learnable");
            var->value = p.new_value;
            if (var->is_output()) candidate.set_output_overridden(true);
        }
        return candidate;
    }

    // Evaluate: stage the candidate's resource-backed changes on a shadow
    // copy of the registries, execute there, and map the outcome to a score
    // plus safety flags. Execution failures yield score 0 with the
    // no_runtime_error flag failed; they never abort the loop.
    Evaluation evaluate(VariableSet& candidate, Trace& trace) {
        RegistrySet shadow = system_.registries->clone();
        const auto staged = staged_assignments(candidate);
        if (!staged.empty()) shadow.set_variables(staged);

        AgentSystem shadow_system = system_;
        shadow_system.registries = &shadow;
        const ExecutionResult exec = executor_(shadow_system, shadow, objective_, trace);

        const std::string output =
            candidate.output_overridden() ? candidate.output() : exec.output;
        candidate.set_output(output);

        Evaluation ev;
        ev.score = exec.error ? 0.0 : objective_.score_of(output);
        for (const auto& name : objective_.safety) {
            if (name == "no_runtime_error") ev.safety[name] = !exec.error;
            else if (name == "output_nonempty") ev.safety[name] = !trim(output).empty();
            else if (name == "contract_parse_ok") ev.safety[name] = contracts_parse(shadow);
        }
        ev.converged = ev.all_safety_pass() && ev.score >= objective_.threshold;
        if (!trace.closed())
            trace.record("sepl/evaluate", std::nullopt, TraceEventKind::Evaluation,
                         json{{"score", ev.score},
                              {"safety", ev.safety},
                              {"error", exec.error},
                              {"diagnostic", exec.diagnostic}});
        return ev;
    }

    // Commit: accept iff the score does not regress below the best committed
    // score and every safety flag passed. Accepted changes flush to the live
    // registry (one version bump per touched resource); rejected candidates
    // leave the live state bit-identical.
    bool commit(VariableSet& candidate, const Evaluation& evaluation, VariableSet& current,
                Trace& trace) {
        const bool accept = evaluation.all_safety_pass() && evaluation.score >= best_score_;
        if (accept) {
            const auto staged = staged_assignments(candidate);
            std::vector<std::string> bumped;
            if (!staged.empty()) {
                const auto versions = system_.registries->set_variables(staged);
                bumped.reserve(versions.size());
                for (const auto& v : versions) bumped.push_back(v.str());
            }
            best_score_ = evaluation.score;
            candidate.set_output_overridden(false);
            current = candidate;
            if (!trace.closed())
                trace.record("sepl/commit", std::nullopt, TraceEventKind::Commit,
                             json{{"score", evaluation.score},
                                  {"staged", staged.size()},
                                  {"versions", bumped}});
        } else {
            if (!trace.closed())
                trace.record("sepl/commit", std::nullopt, TraceEventKind::Rollback,
                             json{{"score", evaluation.score},
                                  {"best", best_score_},
                                  {"safety_ok", evaluation.all_safety_pass()}});
        }
        return accept;
    }

    // The evolutionary loop: reflect, select, improve, evaluate, commit,
    // re-execute; breaks on convergence. Task-level failures are absorbed
    // into evaluations; only configuration errors propagate.
    LoopResult run_loop(Optimizer& optimizer, int budget) {
        if (budget < 1) throw Error(ErrorKind::InvalidArgument, "budget must be >= 1");
        LoopResult result;
        VariableSet current = lift_variables();

        Trace baseline("baseline");
        Evaluation s0 = evaluate(current, baseline);
        baseline.close({current.output(), s0.converged});
        best_score_ = s0.score;
        result.evaluations.push_back(s0);
        result.traces.push_back(baseline);
        if (s0.converged) {
            result.state = current;
            result.converged = true;
            result.best_score = best_score_;
            return result;
        }

        Trace previous = result.traces.back();
        for (int t = 0; t < budget; ++t) {
            Trace iteration("iteration-" + std::to_string(t + 1));
            RunContext ctx{system_.gateway, &iteration, system_.registries};

            std::vector<Proposal> proposals;
            try {
                auto [hyps, props] = optimizer.reflect(previous, current, ctx);
                proposals = std::move(props);
            } catch (const Error& e) {
                iteration.record("sepl/reflect", std::nullopt, TraceEventKind::Decision,
                                 json{{"warning", "reflection failed"},
                                      {"error", e.message()}});
            }
            ++result.iterations;

            if (proposals.empty()) {
                iteration.record("sepl/reflect", std::nullopt, TraceEventKind::Decision,
                                 json{{"note", "no proposals"}});
                iteration.close({current.output(), false});
                result.traces.push_back(iteration);
                previous = result.traces.back();
                continue;
            }

            VariableSet candidate;
            try {
                candidate = improve(current, proposals);
            } catch (const Error& e) {
                iteration.record("sepl/improve", std::nullopt, TraceEventKind::Decision,
                                 json{{"warning", "invalid proposal batch"},
                                      {"error", e.message()}});
                iteration.close({current.output(), false});
                result.traces.push_back(iteration);
                previous = result.traces.back();
                continue;
            }

            Evaluation ev = evaluate(candidate, iteration);
            const bool accepted = commit(candidate, ev, current, iteration);
            iteration.close({current.output(), accepted && ev.converged});
            result.evaluations.push_back(ev);
            result.traces.push_back(iteration);

            if (accepted) {
                // Re-execute under the committed state so the next
                // reflection sees a trace of what is now live.
                Trace reexec("reexec-" + std::to_string(t + 1));
                AgentSystem live = system_;
                const ExecutionResult r =
                    executor_(live, *system_.registries, objective_, reexec);
                reexec.close({r.output, !r.error && objective_.success.holds(r.output)});
                result.traces.push_back(reexec);
            }
            previous = result.traces.back();

            if (accepted && ev.converged) {
                result.converged = true;
                break;
            }
        }
        result.state = current;
        result.best_score = best_score_;
        return result;
    }

    // Resource-backed deltas between a candidate and the live registry
    // heads: exactly the assignments a commit would flush.
    std::vector<VariableAssignment> staged_assignments(const VariableSet& candidate) const {
        std::vector<VariableAssignment> out;
        for (const auto& v : candidate.all()) {
            if (v.is_output()) continue;
            std::string live_value;
            for (const auto& lv : system_.registries->of(v.origin_kind)
                                      .get_variables(v.origin_name))
                if (lv.id == v.id) live_value = lv.value;
            if (v.value != live_value) out.push_back({v.id, v.value});
        }
        return out;
    }

private:
    bool contracts_parse(const RegistrySet& regs) const {
        try {
            for (EntityKind k : kAllKinds) {
                if (k == EntityKind::Agent) continue;
                const auto heads = regs.of(k).heads_in_order();
                if (heads.empty()) continue;
                parse_contract(contract_markdown(k, heads));
            }
            return true;
        } catch (const Error&) {
            return false;
        }
    }

    AgentSystem system_;
    Objective objective_;
    Executor executor_;
    double best_score_ = -std::numeric_limits<double>::infinity();
};

}  // namespace agp
