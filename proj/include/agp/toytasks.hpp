#pragma once

#include <memory>
#include <string>
#include <vector>

#include "agp/optimizers.hpp"
#include "agp/sepl.hpp"

namespace agp {

// Fully deterministic offline task: scripted model behavior, the records to
// install and the objective. The actor initially answers in the wrong shape;
// the scripted critique directs a prompt fix that makes it pass.
struct ToyTask {
    std::string name;
    Objective objective;
    std::vector<ScriptedRule> rules;
    RegistrationRecord prompt;
    RegistrationRecord agent;
    std::string reference_solution;  // y_sft for the penalty term
    double expected_converged_score = 1.0;
};

namespace toytasks {

inline constexpr const char* kActorModel = "scripted-actor";
inline constexpr const char* kCriticModel = "scripted-critic";
inline constexpr const char* kScriptedProvider = "scripted";

inline std::string proposal_block(const std::string& variable_id, const std::string& improved,
                                  const std::string& diagnosis) {
    return "HYPOTHESIS major targets=" + variable_id + " :: " + diagnosis + "\n" +
           "PROPOSAL " + variable_id + "\n<improved>\n" + improved + "\n</improved>\n";
}

inline ToyTask string_target() {
    ToyTask t;
    t.name = "string-target";
    t.objective.task = "What is 6 times 7?";
    t.objective.success = {SuccessSpec::Kind::ExactMatch, "42"};
    t.objective.score = {ScoreSpec::Kind::ExactMatch, "42"};
    t.reference_solution = "42";

    t.prompt.entity.name = "solver-prompt";
    t.prompt.entity.description = "instruction prompt for the solver";
    t.prompt.entity.mapping = {
        {"prompt_text", "You are a solver. Answer the question. Respond with just the number."}};
    t.prompt.entity.trainable = true;
    t.prompt.impl_descriptor = "builtin:prompt";

    t.agent.entity.name = "solver";
    t.agent.entity.description = "answers arithmetic questions";
    t.agent.entity.mapping = {{"prompt", "solver-prompt"}, {"model", kActorModel}};
    t.agent.impl_descriptor = "builtin:scripted_agent";

    const std::string var_id = "prompt/solver-prompt#entity.mapping.prompt_text";
    const std::string fixed_prompt =
        "You are a solver. Answer the question. Respond with digits only.";
    const std::string fix =
        proposal_block(var_id, fixed_prompt, "output is words but digits are expected");

    t.rules = {
        // textgrad rewrite requests
        {ScriptedRule::Match::Substring, "Improve the variable using the feedback",
         {"<improved>\n" + fixed_prompt + "\n</improved>"}},
        // textgrad critique (keyed on the produced answer)
        {ScriptedRule::Match::Substring, "produce a critique.\nanswer: forty two",
         {"the answer is written in words; digits are required"}},
        {ScriptedRule::Match::Substring, "produce a critique.\nanswer: 42", {"NO_ISSUES"}},
        // reflection critique, plain and RL-conditioned (both carry
        // "answer: <y>" directly above the errors block)
        {ScriptedRule::Match::Substring, "answer: forty two\nerrors:", {fix}},
        // grpo multi-candidate critique
        {ScriptedRule::Match::Substring, "answer: forty two\ngroup mean:", {fix}},
        // solution refinement
        {ScriptedRule::Match::Substring, "solution: forty two",
         {"PROPOSAL output\n<improved>\n42\n</improved>"}},
        // actor behavior, before and after the prompt fix
        {ScriptedRule::Match::Substring, "Respond with digits only", {"42"}},
        {ScriptedRule::Match::Substring, "just the number", {"forty two"}},
    };
    return t;
}

inline ToyTask arithmetic_format() {
    ToyTask t;
    t.name = "arithmetic-format";
    t.objective.task = "Compute 6 * 7.";
    t.objective.success = {SuccessSpec::Kind::ExactMatch, "42"};
    t.objective.score = {ScoreSpec::Kind::ExactMatch, "42"};
    t.reference_solution = "42";

    t.prompt.entity.name = "calc-prompt";
    t.prompt.entity.description = "instruction prompt for the calculator";
    t.prompt.entity.mapping = {
        {"prompt_text", "Compute the expression. Show your reasoning."}};
    t.prompt.entity.trainable = true;
    t.prompt.impl_descriptor = "builtin:prompt";

    t.agent.entity.name = "calc";
    t.agent.entity.description = "computes arithmetic expressions";
    t.agent.entity.mapping = {{"prompt", "calc-prompt"}, {"model", kActorModel}};
    t.agent.impl_descriptor = "builtin:scripted_agent";

    const std::string var_id = "prompt/calc-prompt#entity.mapping.prompt_text";
    const std::string fixed_prompt = "Compute the expression. Output only the final number.";
    const std::string fix = proposal_block(
        var_id, fixed_prompt, "the value is right but the output must be the bare number");

    t.rules = {
        {ScriptedRule::Match::Substring, "Improve the variable using the feedback",
         {"<improved>\n" + fixed_prompt + "\n</improved>"}},
        {ScriptedRule::Match::Substring, "produce a critique.\nanswer: The answer is 42",
         {"strip the prose; the output must be the bare number"}},
        {ScriptedRule::Match::Substring, "produce a critique.\nanswer: 42", {"NO_ISSUES"}},
        {ScriptedRule::Match::Substring, "answer: The answer is 42\nerrors:", {fix}},
        {ScriptedRule::Match::Substring, "answer: The answer is 42\ngroup mean:", {fix}},
        {ScriptedRule::Match::Substring, "solution: The answer is 42",
         {"PROPOSAL output\n<improved>\n42\n</improved>"}},
        {ScriptedRule::Match::Substring, "Output only the final number", {"42"}},
        {ScriptedRule::Match::Substring, "Show your reasoning", {"The answer is 42"}},
    };
    return t;
}

inline std::vector<std::string> names() { return {"string-target", "arithmetic-format"}; }

inline ToyTask by_name(const std::string& name) {
    if (name == "string-target") return string_target();
    if (name == "arithmetic-format") return arithmetic_format();
    throw Error(ErrorKind::NotFound, "no toy task '" + name + "'");
}

// Registers the task's records, wires the scripted backend and returns the
// runnable system.
inline AgentSystem install(const ToyTask& task, RegistrySet& regs, ModelGateway& gateway) {
    regs.of(EntityKind::Prompt).register_record(task.prompt);
    regs.of(EntityKind::Agent).register_record(task.agent);
    if (!gateway.has_backend(kScriptedProvider))
        gateway.register_backend(kScriptedProvider,
                                 std::make_shared<ScriptedBackend>(task.rules));
    gateway.set_route(kActorModel, RouteConfig::single(kScriptedProvider));
    gateway.set_route(kCriticModel, RouteConfig::single(kScriptedProvider));
    AgentSystem system;
    system.registries = &regs;
    system.gateway = &gateway;
    system.entry_kind = EntityKind::Agent;
    system.entry_name = task.agent.entity.name;
    return system;
}

}  // namespace toytasks

}  // namespace agp
