#pragma once

#include <fstream>
#include <memory>
#include <string>

#include "agp/gateway.hpp"
#include "agp/http_backend.hpp"

namespace agp {

// Provider list schema: [{name, kind: scripted|http, base_url?, api_key_env?,
// rules?}]; scripted rules are {match: exact|substring|pattern, value,
// response | responses}.
inline std::vector<ScriptedRule> parse_scripted_rules(const json& rules) {
    std::vector<ScriptedRule> out;
    for (const auto& r : rules) {
        ScriptedRule rule;
        const std::string match = r.value("match", std::string("substring"));
        if (match == "exact") rule.match = ScriptedRule::Match::Exact;
        else if (match == "substring") rule.match = ScriptedRule::Match::Substring;
        else if (match == "pattern") rule.match = ScriptedRule::Match::Pattern;
        else throw Error(ErrorKind::ParseError, "unknown rule match '" + match + "'");
        rule.needle = r.value("value", std::string{});
        if (r.contains("responses")) {
            for (const auto& resp : r.at("responses"))
                rule.responses.push_back(resp.get<std::string>());
        } else if (r.contains("response")) {
            rule.responses.push_back(r.at("response").get<std::string>());
        }
        if (rule.responses.empty())
            throw Error(ErrorKind::ParseError, "scripted rule needs response(s)");
        out.push_back(std::move(rule));
    }
    return out;
}

inline void apply_gateway_config(ModelGateway& gateway, const json& section) {
    for (const auto& p : section.value("providers", json::array())) {
        const std::string name = p.value("name", std::string{});
        const std::string kind = p.value("kind", std::string{});
        if (name.empty()) throw Error(ErrorKind::ParseError, "provider requires a name");
        if (kind == "scripted") {
            gateway.register_backend(
                name, std::make_shared<ScriptedBackend>(
                          parse_scripted_rules(p.value("rules", json::array()))));
        } else if (kind == "http") {
            const std::string base_url = p.value("base_url", std::string{});
            if (base_url.empty())
                throw Error(ErrorKind::ParseError, "http provider requires base_url");
            gateway.register_backend(
                name, std::make_shared<HttpBackend>(base_url,
                                                    p.value("api_key_env", std::string{})));
        } else {
            throw Error(ErrorKind::ParseError, "unknown provider kind '" + kind + "'");
        }
    }
    if (section.contains("routes")) {
        for (auto it = section["routes"].begin(); it != section["routes"].end(); ++it) {
            RouteConfig route;
            const json& r = it.value();
            for (const auto& e : r.value("chain", json::array())) {
                RouteEntry entry;
                if (e.is_string()) {
                    entry.provider = e.get<std::string>();
                } else {
                    entry.provider = e.value("provider", std::string{});
                    entry.priority = e.value("priority", 0);
                    entry.cost_weight = e.value("cost_weight", 1.0);
                }
                route.chain.push_back(std::move(entry));
            }
            route.retry_limit = r.value("retry_limit", 0);
            gateway.set_route(it.key(), route);
        }
    }
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::PathError, "cannot open '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorKind::ParseError, "'" + path + "' is not valid JSON");
    return j;
}

}  // namespace agp
