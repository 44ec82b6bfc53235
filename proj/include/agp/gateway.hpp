#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "agp/errors.hpp"
#include "agp/tracer.hpp"

namespace agp {

struct ModelMessage {
    std::string role;
    std::string content;
};

struct ModelRequest {
    std::vector<ModelMessage> messages;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 0;  // 0 = provider default
    std::string tag;     // free-form label surfaced in trace events

    const std::string& last_user_message() const {
        for (auto it = messages.rbegin(); it != messages.rend(); ++it)
            if (it->role == "user") return it->content;
        static const std::string empty;
        return empty;
    }

    void validate() const {
        if (messages.empty())
            throw Error(ErrorKind::InvalidArgument, "request must carry at least one message");
        if (temperature < 0.0 || temperature > 2.0)
            throw Error(ErrorKind::InvalidArgument, "temperature out of range [0,2]");
        if (max_tokens < 0)
            throw Error(ErrorKind::InvalidArgument, "max_tokens must be non-negative");
    }
};

struct ModelResponse {
    std::string text;
    std::string provider;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual ModelResponse complete(const ModelRequest& request) = 0;
    // Backends unsafe for concurrent complete() calls return false and the
    // gateway serializes them.
    virtual bool concurrent_safe() const { return true; }
};

// Deterministic canned backend: rules are checked in order against the last
// user message; the first match wins. A rule may carry a response sequence
// indexed by its own call count (the last entry repeats).
struct ScriptedRule {
    enum class Match { Exact, Substring, Pattern };
    Match match = Match::Substring;
    std::string needle;
    std::vector<std::string> responses;
};

class ScriptedBackend : public ModelBackend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<ScriptedRule> rules) : rules_(std::move(rules)) {
        counts_.assign(rules_.size(), 0);
    }

    void add_rule(ScriptedRule rule) {
        std::lock_guard lk(mu_);
        rules_.push_back(std::move(rule));
        counts_.push_back(0);
    }

    void reset_counts() {
        std::lock_guard lk(mu_);
        std::fill(counts_.begin(), counts_.end(), 0);
    }

    ModelResponse complete(const ModelRequest& request) override {
        const std::string& msg = request.last_user_message();
        std::lock_guard lk(mu_);
        for (std::size_t i = 0; i < rules_.size(); ++i) {
            const auto& r = rules_[i];
            bool hit = false;
            switch (r.match) {
                case ScriptedRule::Match::Exact: hit = (msg == r.needle); break;
                case ScriptedRule::Match::Substring:
                    hit = msg.find(r.needle) != std::string::npos;
                    break;
                case ScriptedRule::Match::Pattern:
                    hit = std::regex_search(msg, std::regex(r.needle));
                    break;
            }
            if (!hit) continue;
            if (r.responses.empty())
                throw Error(ErrorKind::ExecutionError, "scripted rule has no responses");
            const std::size_t idx = std::min(counts_[i], r.responses.size() - 1);
            ++counts_[i];
            return {r.responses[idx], "scripted"};
        }
        throw Error(ErrorKind::ExecutionError, "no scripted rule matches message");
    }

private:
    std::vector<ScriptedRule> rules_;
    std::vector<std::size_t> counts_;
    std::mutex mu_;
};

struct RouteEntry {
    std::string provider;
    int priority = 0;
    double cost_weight = 1.0;
};

struct RouteConfig {
    std::vector<RouteEntry> chain;
    int retry_limit = 0;

    void validate() const {
        if (chain.empty()) throw Error(ErrorKind::InvalidArgument, "route chain must be non-empty");
        if (retry_limit < 0)
            throw Error(ErrorKind::InvalidArgument, "retry limit must be non-negative");
    }

    static RouteConfig single(const std::string& provider) {
        return RouteConfig{{RouteEntry{provider, 0, 1.0}}, 0};
    }
};

// Unified model access: named backends, ordered fallback chains with
// cost-aware ordering, and per-attempt trace events.
class ModelGateway {
public:
    void register_backend(const std::string& name, std::shared_ptr<ModelBackend> backend) {
        std::unique_lock lk(mu_);
        if (backends_.count(name))
            throw Error(ErrorKind::DuplicateName, "backend '" + name + "' already registered");
        backends_[name] = {std::move(backend), std::make_shared<std::mutex>()};
    }

    bool has_backend(const std::string& name) const {
        std::shared_lock lk(mu_);
        return backends_.count(name) > 0;
    }

    void set_route(const std::string& model_id, RouteConfig route) {
        route.validate();
        std::unique_lock lk(mu_);
        routes_[model_id] = std::move(route);
    }

    // Route lookup for a model id; unrouted models map to the single
    // provider of the same name.
    RouteConfig route_for(const std::string& model_id) const {
        std::shared_lock lk(mu_);
        auto it = routes_.find(model_id);
        if (it != routes_.end()) return it->second;
        return RouteConfig::single(model_id);
    }

    ModelResponse complete(const ModelRequest& request, Trace* trace = nullptr) {
        return complete(request, route_for(request.model_id), trace);
    }

    ModelResponse complete(const ModelRequest& request, const RouteConfig& route,
                           Trace* trace = nullptr) {
        request.validate();
        route.validate();

        std::vector<RouteEntry> chain = route.chain;
        std::stable_sort(chain.begin(), chain.end(), [](const RouteEntry& a, const RouteEntry& b) {
            if (a.priority != b.priority) return a.priority < b.priority;
            return a.cost_weight < b.cost_weight;
        });

        std::vector<std::string> diagnostics;
        for (const auto& entry : chain) {
            Entry backend;
            {
                std::shared_lock lk(mu_);
                auto it = backends_.find(entry.provider);
                if (it != backends_.end()) backend = it->second;
            }
            if (!backend.impl) {
                diagnostics.push_back(entry.provider + ": UnknownProvider");
                record_attempt(trace, request, entry.provider, 0, false, "UnknownProvider", "");
                continue;
            }
            for (int attempt = 0; attempt <= route.retry_limit; ++attempt) {
                try {
                    ModelResponse resp;
                    if (backend.impl->concurrent_safe()) {
                        resp = backend.impl->complete(request);
                    } else {
                        std::lock_guard serial(*backend.serializer);
                        resp = backend.impl->complete(request);
                    }
                    resp.provider = entry.provider;
                    record_attempt(trace, request, entry.provider, attempt, true, "", resp.text);
                    return resp;
                } catch (const Error& e) {
                    diagnostics.push_back(entry.provider + " attempt " +
                                          std::to_string(attempt) + ": " + e.message());
                    record_attempt(trace, request, entry.provider, attempt, false, e.message(),
                                   "");
                } catch (const std::exception& e) {
                    diagnostics.push_back(entry.provider + " attempt " +
                                          std::to_string(attempt) + ": " + e.what());
                    record_attempt(trace, request, entry.provider, attempt, false, e.what(), "");
                }
            }
        }
        std::string all;
        for (const auto& d : diagnostics) all += (all.empty() ? "" : "; ") + d;
        throw Error(ErrorKind::AllProvidersFailed, all);
    }

private:
    struct Entry {
        std::shared_ptr<ModelBackend> impl;
        std::shared_ptr<std::mutex> serializer;
    };

    static void record_attempt(Trace* trace, const ModelRequest& request,
                               const std::string& provider, int attempt, bool ok,
                               const std::string& error, const std::string& text) {
        if (!trace) return;
        json payload = {{"provider", provider},
                        {"attempt", attempt},
                        {"model", request.model_id},
                        {"tag", request.tag},
                        {"ok", ok}};
        if (ok)
            payload["response"] = text;
        else
            payload["error"] = error;
        trace->record("model/" + provider, std::nullopt, TraceEventKind::ModelCall,
                      std::move(payload));
    }

    mutable std::shared_mutex mu_;
    std::map<std::string, Entry> backends_;
    std::map<std::string, RouteConfig> routes_;
};

// A backend that always fails; handy for exercising fallback paths.
class FailingBackend : public ModelBackend {
public:
    explicit FailingBackend(std::string reason = "provider unavailable")
        : reason_(std::move(reason)) {}
    ModelResponse complete(const ModelRequest&) override {
        throw Error(ErrorKind::ExecutionError, reason_);
    }

private:
    std::string reason_;
};

}  // namespace agp
