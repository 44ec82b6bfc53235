#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"

#include "agp/errors.hpp"
#include "agp/gateway.hpp"
#include "agp/toolscript.hpp"
#include "agp/tracer.hpp"

namespace agp {

class RegistrySet;

// Execution context threaded through run() calls: model access, the active
// trace (may be null), and the registry view resolving resource references.
struct RunContext {
    ModelGateway* gateway = nullptr;
    Trace* trace = nullptr;
    RegistrySet* registries = nullptr;
};

// A materialized resource. Instances own their runtime state; registration
// records are never touched by run(). Handles are not required to be
// shareable across threads — each executor materializes its own.
class Instance {
public:
    virtual ~Instance() = default;
    virtual json run(const json& input, RunContext& ctx) = 0;
    virtual json state() const { return json::object(); }
};

using InstancePtr = std::shared_ptr<Instance>;

// Renders "{placeholder}" occurrences from the input object; placeholders
// without a matching field are left verbatim.
class PromptInstance : public Instance {
public:
    explicit PromptInstance(std::string text) : text_(std::move(text)) {}

    json run(const json& input, RunContext&) override {
        return json{{"text", render(input)}};
    }

    std::string render(const json& input) const {
        std::string out;
        out.reserve(text_.size());
        std::size_t i = 0;
        while (i < text_.size()) {
            if (text_[i] == '{') {
                const auto close = text_.find('}', i + 1);
                if (close != std::string::npos) {
                    const std::string key = text_.substr(i + 1, close - i - 1);
                    if (input.is_object() && input.contains(key)) {
                        const json& v = input[key];
                        out += v.is_string() ? v.get<std::string>() : v.dump();
                        i = close + 1;
                        continue;
                    }
                }
            }
            out.push_back(text_[i++]);
        }
        return out;
    }

    const std::string& text() const { return text_; }

private:
    std::string text_;
};

class ToolInstance : public Instance {
public:
    explicit ToolInstance(toolscript::Program program) : program_(std::move(program)) {}

    json run(const json& input, RunContext&) override { return program_.run(input); }

private:
    toolscript::Program program_;
};

// Environment: step(action) -> observation over an instance-local state.
// Actions may set fields ({"set": {...}}) or read one ({"get": "key"}); the
// observation always reflects the post-step state.
class EnvironmentInstance : public Instance {
public:
    explicit EnvironmentInstance(json initial_state) : state_(std::move(initial_state)) {
        if (!state_.is_object()) state_ = json::object();
    }

    json run(const json& action, RunContext&) override {
        std::lock_guard lk(mu_);
        ++steps_;
        if (action.is_object() && action.contains("set") && action["set"].is_object()) {
            for (auto it = action["set"].begin(); it != action["set"].end(); ++it)
                state_[it.key()] = it.value();
        }
        json obs = {{"observation", state_}, {"step", steps_}};
        if (action.is_object() && action.contains("get") && action["get"].is_string()) {
            const std::string key = action["get"].get<std::string>();
            obs["value"] = state_.contains(key) ? state_[key] : json(nullptr);
        }
        return obs;
    }

    json state() const override {
        std::lock_guard lk(mu_);
        return state_;
    }

private:
    json state_;
    std::int64_t steps_ = 0;
    mutable std::mutex mu_;
};

// Memory: read/write/query dispatch. The record payload seeds the instance;
// writes land in instance state only, keeping the record passive.
class MemoryInstance : public Instance {
public:
    explicit MemoryInstance(std::string payload) : payload_(std::move(payload)) {}

    json run(const json& input, RunContext&) override {
        if (!input.is_object() || !input.contains("op") || !input["op"].is_string())
            throw Error(ErrorKind::ExecutionError, "memory input requires an 'op' field");
        const std::string op = input["op"].get<std::string>();
        std::lock_guard lk(mu_);
        if (op == "write") {
            if (!input.contains("key") || !input["key"].is_string())
                throw Error(ErrorKind::ExecutionError, "memory write requires a string key");
            entries_[input["key"].get<std::string>()] = input.value("value", json(nullptr));
            return json{{"ok", true}};
        }
        if (op == "read") {
            if (!input.contains("key") || !input["key"].is_string())
                throw Error(ErrorKind::ExecutionError, "memory read requires a string key");
            auto it = entries_.find(input["key"].get<std::string>());
            return json{{"value", it == entries_.end() ? json(nullptr) : it->second}};
        }
        if (op == "query") {
            const std::string needle = input.value("text", std::string{});
            json hits = json::array();
            if (!needle.empty() && payload_.find(needle) != std::string::npos)
                hits.push_back({{"source", "payload"}, {"text", payload_}});
            for (const auto& [k, v] : entries_) {
                const std::string text = v.is_string() ? v.get<std::string>() : v.dump();
                if (!needle.empty() && text.find(needle) != std::string::npos)
                    hits.push_back({{"source", k}, {"text", text}});
            }
            return json{{"matches", hits}};
        }
        throw Error(ErrorKind::ExecutionError, "unknown memory op '" + op + "'");
    }

    json state() const override {
        std::lock_guard lk(mu_);
        return json{{"payload", payload_}, {"entries", entries_}};
    }

private:
    std::string payload_;
    std::map<std::string, json> entries_;
    mutable std::mutex mu_;
};

}  // namespace agp
