#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "agp/registry.hpp"

namespace agp {

// All inter-agent data moves as bus messages; per-topic delivery is FIFO per
// sender and the full history stays observable for auditing.
struct BusMessage {
    std::string topic;
    std::string sender;
    std::string correlation_id;
    json payload = json::object();
};

class MessageBus {
public:
    void post(BusMessage msg) {
        {
            std::lock_guard lk(mu_);
            history_.push_back(msg);
            queues_[msg.topic].push_back(std::move(msg));
        }
        cv_.notify_all();
    }

    std::optional<BusMessage> take(const std::string& topic, std::chrono::milliseconds timeout) {
        std::unique_lock lk(mu_);
        if (!cv_.wait_for(lk, timeout, [&] {
                auto it = queues_.find(topic);
                return it != queues_.end() && !it->second.empty();
            }))
            return std::nullopt;
        BusMessage msg = std::move(queues_[topic].front());
        queues_[topic].pop_front();
        return msg;
    }

    std::vector<BusMessage> history() const {
        std::lock_guard lk(mu_);
        return history_;
    }

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, std::deque<BusMessage>> queues_;
    std::vector<BusMessage> history_;
};

struct PlanStep {
    std::string id;
    std::string description;
    std::string agent;
    enum class Status { Pending, Done, Failed } status = Status::Pending;
};

struct Plan {
    std::string flowchart;
    std::vector<PlanStep> steps;
    int revision = 0;
};

// plan.md rendering: title line, fenced flowchart block, ordered checklist.
inline std::string plan_markdown(const std::string& task, const Plan& plan) {
    std::ostringstream out;
    out << "# Plan: " << task << " (rev " << plan.revision << ")\n\n";
    out << "```\n" << plan.flowchart << (plan.flowchart.empty() || plan.flowchart.back() == '\n'
                                             ? ""
                                             : "\n")
        << "```\n\n";
    for (const auto& s : plan.steps)
        out << "- [" << (s.status == PlanStep::Status::Done ? "x" : " ") << "] " << s.id << " ("
            << s.agent << "): " << s.description << "\n";
    return out.str();
}

struct SubtaskResult {
    std::string step_id;
    std::string agent;
    std::string correlation_id;
    bool ok = false;
    std::string answer;
    std::string error;
};

// Plan policy: produce the initial decomposition and, on each collect phase,
// decide completion or the next revision.
class Planner {
public:
    struct Review {
        bool complete = false;
        std::string final_answer;  // empty -> the deterministic summary is used
        Plan next_plan;
    };

    virtual ~Planner() = default;
    virtual Plan initial_plan(const std::string& task,
                              const std::vector<std::string>& agents) = 0;
    virtual Review review(const std::string& task, const Plan& plan,
                          const std::vector<SubtaskResult>& results) = 0;
};

// Fixed round script: plans[0] opens, each collect advances to the next
// plan, completion after the last one.
class ScriptedPlanner : public Planner {
public:
    explicit ScriptedPlanner(std::vector<Plan> rounds) : rounds_(std::move(rounds)) {}

    Plan initial_plan(const std::string&, const std::vector<std::string>&) override {
        if (rounds_.empty()) throw Error(ErrorKind::InvalidArgument, "planner has no rounds");
        next_ = 1;
        return rounds_[0];
    }

    Review review(const std::string&, const Plan&,
                  const std::vector<SubtaskResult>&) override {
        Review r;
        if (next_ >= rounds_.size()) {
            r.complete = true;
            return r;
        }
        r.complete = false;
        r.next_plan = rounds_[next_++];
        return r;
    }

private:
    std::vector<Plan> rounds_;
    std::size_t next_ = 1;
};

struct OrchestrationResult {
    std::string answer;
    bool complete = false;
    int rounds = 0;
    std::string summary;
    std::vector<SubtaskResult> results;
};

struct OrchestratorOptions {
    std::string plan_resource = "plan";
    std::chrono::milliseconds subtask_timeout{5000};
};

inline std::string extract_bus_answer(const json& out) {
    if (out.is_string()) return out.get<std::string>();
    if (out.is_object() && out.contains("answer") && out["answer"].is_string())
        return out["answer"].get<std::string>();
    return out.dump();
}

// Deterministic concatenation of a round's results.
inline std::string summarize_results(const std::vector<SubtaskResult>& results) {
    std::string out;
    for (const auto& r : results)
        out += r.step_id + " (" + r.agent + "): " + (r.ok ? r.answer : "FAILED: " + r.error) +
               "\n";
    return out;
}

// Collect-and-replan loop. Each round broadcasts the pending steps over the
// bus, sub-agents execute concurrently (one worker per agent), the
// orchestrator joins on the round's correlation ids, summarizes, updates the
// plan resource (one version per round) and asks the planner whether to
// stop. Sub-agent failures and timeouts surface as failed subtask results.
inline OrchestrationResult orchestrate(const std::string& task,
                                       const std::vector<std::string>& sub_agents,
                                       int max_rounds, Planner& planner, MessageBus& bus,
                                       RunContext ctx, OrchestratorOptions options = {}) {
    if (sub_agents.empty()) throw Error(ErrorKind::NoAgents, "no sub-agents registered");
    if (!ctx.registries)
        throw Error(ErrorKind::InvalidArgument, "orchestration requires registries");
    if (max_rounds < 1) throw Error(ErrorKind::InvalidArgument, "max_rounds must be >= 1");

    Registry& memory = ctx.registries->of(EntityKind::Memory);
    Plan plan = planner.initial_plan(task, sub_agents);

    auto upsert_plan = [&](const Plan& p) {
        const std::string markdown = plan_markdown(task, p);
        if (memory.contains(options.plan_resource)) {
            memory.update(options.plan_resource, markdown);
        } else {
            RegistrationRecord rec;
            rec.entity.name = options.plan_resource;
            rec.entity.description = "orchestration plan for: " + task;
            rec.entity.mapping = {{"payload", markdown}};
            rec.impl_descriptor = "builtin:text_memory";
            memory.register_record(rec);
        }
    };
    upsert_plan(plan);

    OrchestrationResult result;
    std::string last_summary;

    for (int round = 1; round <= max_rounds; ++round) {
        result.rounds = round;

        std::vector<PlanStep*> pending;
        for (auto& s : plan.steps)
            if (s.status == PlanStep::Status::Pending) pending.push_back(&s);

        std::map<std::string, int> per_agent;
        for (auto* s : pending) ++per_agent[s->agent];

        // broadcast
        std::map<std::string, PlanStep*> by_corr;
        for (auto* s : pending) {
            const std::string corr = "r" + std::to_string(round) + "/" + s->id;
            by_corr[corr] = s;
            bus.post({"tasks/" + s->agent, "orchestrator", corr,
                      json{{"step_id", s->id}, {"description", s->description},
                           {"task", task}}});
        }

        // concurrent sub-agent workers, one per assigned agent
        std::vector<std::thread> workers;
        for (const auto& [agent, count] : per_agent) {
            workers.emplace_back([&, agent = agent, count = count] {
                for (int i = 0; i < count; ++i) {
                    auto msg = bus.take("tasks/" + agent, options.subtask_timeout);
                    if (!msg) return;
                    json payload;
                    try {
                        const json out = ctx.registries->of(EntityKind::Agent)
                                             .run(agent,
                                                  json{{"task", msg->payload.value(
                                                                    "description",
                                                                    std::string{})}},
                                                  ctx);
                        payload = {{"ok", true},
                                   {"answer", extract_bus_answer(out)},
                                   {"step_id", msg->payload.value("step_id", std::string{})}};
                    } catch (const Error& e) {
                        payload = {{"ok", false},
                                   {"error", e.message()},
                                   {"step_id", msg->payload.value("step_id", std::string{})}};
                    }
                    bus.post({"results", agent, msg->correlation_id, std::move(payload)});
                }
            });
        }

        // barrier over the round's correlation ids
        std::vector<SubtaskResult> round_results;
        std::set<std::string> awaited;
        for (const auto& [corr, _] : by_corr) awaited.insert(corr);
        const auto deadline = std::chrono::steady_clock::now() + options.subtask_timeout;
        while (!awaited.empty()) {
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) break;
            auto msg = bus.take("results", remaining);
            if (!msg) break;
            if (!awaited.erase(msg->correlation_id)) continue;  // stale round
            SubtaskResult r;
            r.correlation_id = msg->correlation_id;
            r.agent = msg->sender;
            r.step_id = msg->payload.value("step_id", std::string{});
            r.ok = msg->payload.value("ok", false);
            r.answer = msg->payload.value("answer", std::string{});
            r.error = msg->payload.value("error", std::string{});
            round_results.push_back(std::move(r));
        }
        for (auto& w : workers) w.join();
        for (const auto& corr : awaited) {
            SubtaskResult r;
            r.correlation_id = corr;
            r.step_id = by_corr[corr]->id;
            r.agent = by_corr[corr]->agent;
            r.ok = false;
            r.error = "round timeout";
            round_results.push_back(std::move(r));
        }

        // mark statuses and summarize
        for (const auto& r : round_results) {
            if (auto it = by_corr.find(r.correlation_id); it != by_corr.end())
                it->second->status =
                    r.ok ? PlanStep::Status::Done : PlanStep::Status::Failed;
        }
        last_summary = summarize_results(round_results);
        for (auto& r : round_results) result.results.push_back(std::move(r));
        if (ctx.trace && !ctx.trace->closed())
            ctx.trace->record("orchestrator", std::nullopt, TraceEventKind::Decision,
                              json{{"round", round}, {"summary", last_summary}});

        // decide: complete or replan; either way the plan resource advances
        // one version this round
        const Planner::Review review = planner.review(task, plan, round_results);
        if (review.complete) {
            plan.revision += 1;
            upsert_plan(plan);
            result.complete = true;
            result.answer = review.final_answer.empty() ? last_summary : review.final_answer;
            result.summary = last_summary;
            return result;
        }
        plan = review.next_plan;
        plan.revision += 1;
        upsert_plan(plan);
    }

    result.complete = false;
    result.answer = last_summary;
    result.summary = last_summary;
    return result;
}

// Wraps a registered agent behind a tool record so tool-calling agents can
// invoke it like any native tool. The wrapper's run dispatches the agent and
// returns its final answer; unregistering the agent invalidates the wrapper.
inline RegistrationRecord wrap_agent_as_tool(RegistrySet& regs, const std::string& agent_name,
                                             std::string tool_name = "") {
    const RegistrationRecord agent = regs.of(EntityKind::Agent).get_info(agent_name);
    if (tool_name.empty()) tool_name = agent_name + "_tool";

    RegistrationRecord rec;
    rec.entity.name = tool_name;
    rec.entity.description = "delegates to agent '" + agent_name + "': " +
                             agent.entity.description;
    rec.entity.mapping = {{"source", "agent:" + agent_name}};
    rec.entity.trainable = false;
    rec.impl_descriptor = "builtin:agent_tool";
    rec.exports.push_back(
        {ExportForm::FunctionCallingSchema,
         json{{"name", tool_name},
              {"description", rec.entity.description},
              {"parameters",
               {{"type", "object"},
                {"properties", {{"task", {{"type", "string"}}}}},
                {"required", json::array({"task"})}}}}
             .dump()});
    rec.exports.push_back(
        {ExportForm::StructuredArgumentSchema,
         json::array({{{"name", "task"},
                       {"type", "string"},
                       {"description", "task payload forwarded to the agent"}}})
             .dump()});
    regs.of(EntityKind::Tool).register_record(rec);
    return regs.of(EntityKind::Tool).get_info(tool_name);
}

}  // namespace agp
