#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agp/errors.hpp"
#include "agp/hash.hpp"
#include "agp/version.hpp"

namespace agp {

using json = nlohmann::json;

// The five managed entity kinds. Every record belongs to exactly one kind.
enum class EntityKind { Prompt, Agent, Tool, Environment, Memory };

inline constexpr std::array<EntityKind, 5> kAllKinds = {
    EntityKind::Prompt, EntityKind::Agent, EntityKind::Tool,
    EntityKind::Environment, EntityKind::Memory};

inline const char* kind_name(EntityKind k) {
    switch (k) {
        case EntityKind::Prompt: return "prompt";
        case EntityKind::Agent: return "agent";
        case EntityKind::Tool: return "tool";
        case EntityKind::Environment: return "environment";
        case EntityKind::Memory: return "memory";
    }
    return "unknown";
}

// Capitalized form used in contract headings.
inline const char* kind_title(EntityKind k) {
    switch (k) {
        case EntityKind::Prompt: return "Prompt";
        case EntityKind::Agent: return "Agent";
        case EntityKind::Tool: return "Tool";
        case EntityKind::Environment: return "Environment";
        case EntityKind::Memory: return "Memory";
    }
    return "Unknown";
}

inline std::optional<EntityKind> parse_kind(const std::string& s) {
    for (EntityKind k : kAllKinds)
        if (s == kind_name(k)) return k;
    return std::nullopt;
}

enum class ExportForm { FunctionCallingSchema, NaturalLanguageText, StructuredArgumentSchema };

inline const char* export_form_name(ExportForm f) {
    switch (f) {
        case ExportForm::FunctionCallingSchema: return "function_calling_schema";
        case ExportForm::NaturalLanguageText: return "natural_language_text";
        case ExportForm::StructuredArgumentSchema: return "structured_argument_schema";
    }
    return "unknown";
}

inline std::optional<ExportForm> parse_export_form(const std::string& s) {
    if (s == "function_calling_schema") return ExportForm::FunctionCallingSchema;
    if (s == "natural_language_text") return ExportForm::NaturalLanguageText;
    if (s == "structured_argument_schema") return ExportForm::StructuredArgumentSchema;
    return std::nullopt;
}

// Representation of a resource consumable by a model: a schema or text body.
struct ExportedRepresentation {
    ExportForm form = ExportForm::NaturalLanguageText;
    std::string body;

    bool operator==(const ExportedRepresentation&) const = default;
};

// Passive resource entity: name, description, behavior descriptor, the
// trainable marker gating evolution, and auxiliary metadata.
struct ResourceEntity {
    std::string name;
    std::string description;
    json mapping = json::object();  // kind-specific behavior fields
    bool trainable = false;
    std::map<std::string, std::string> metadata;

    bool operator==(const ResourceEntity&) const = default;
};

// The unit of registration, versioning and snapshotting.
struct RegistrationRecord {
    ResourceEntity entity;
    Version version{0, 1, 0};
    std::string impl_descriptor;  // loader id, import path or source reference
    std::map<std::string, std::string> init_params;
    std::vector<ExportedRepresentation> exports;

    bool operator==(const RegistrationRecord&) const = default;
};

inline json record_to_json(const RegistrationRecord& r) {
    json exports = json::array();
    for (const auto& e : r.exports)
        exports.push_back({{"form", export_form_name(e.form)}, {"body", e.body}});
    return json{{"name", r.entity.name},
                {"description", r.entity.description},
                {"mapping", r.entity.mapping},
                {"trainable", r.entity.trainable},
                {"metadata", r.entity.metadata},
                {"version", r.version.str()},
                {"impl_descriptor", r.impl_descriptor},
                {"init_params", r.init_params},
                {"exports", exports}};
}

inline RegistrationRecord record_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "record must be a JSON object");
    RegistrationRecord r;
    try {
        r.entity.name = j.at("name").get<std::string>();
        r.entity.description = j.value("description", std::string{});
        r.entity.mapping = j.value("mapping", json::object());
        r.entity.trainable = j.value("trainable", false);
        if (j.contains("metadata"))
            r.entity.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
        if (j.contains("version")) {
            auto v = Version::parse(j.at("version").get<std::string>());
            if (!v)
                throw Error(ErrorKind::ParseError,
                            "bad version string: " + j.at("version").dump());
            r.version = *v;
        }
        r.impl_descriptor = j.value("impl_descriptor", std::string{});
        if (j.contains("init_params"))
            r.init_params = j.at("init_params").get<std::map<std::string, std::string>>();
        for (const auto& e : j.value("exports", json::array())) {
            auto form = parse_export_form(e.at("form").get<std::string>());
            if (!form) throw Error(ErrorKind::ParseError, "unknown export form: " + e.dump());
            r.exports.push_back({*form, e.at("body").get<std::string>()});
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::ParseError, std::string("malformed record: ") + ex.what());
    }
    return r;
}

// Canonical encoding: sorted object keys, no insignificant whitespace.
// nlohmann::json's default object backing is a sorted map, so dump() is
// already canonical given a fixed structure.
inline std::string canonical_encode(const RegistrationRecord& r) {
    return record_to_json(r).dump();
}

// Content identity deliberately excludes the version field: a restored head
// carries a fresh version but identical content, and this digest is what the
// restore-identity check compares.
inline std::string record_content_hash(const RegistrationRecord& r) {
    json j = record_to_json(r);
    j.erase("version");
    return content_digest(j.dump());
}

// Kind-specific structural validation of the behavior mapping. The mapping
// must carry the primary field for its kind with the right type; extra keys
// are rejected so that update deltas stay within the declared surface.
inline const std::vector<std::string>& permitted_mapping_fields(EntityKind k) {
    static const std::vector<std::string> prompt = {"prompt_text"};
    static const std::vector<std::string> agent = {"prompt", "prompts", "tools", "model"};
    static const std::vector<std::string> tool = {"source"};
    static const std::vector<std::string> env = {"initial_state"};
    static const std::vector<std::string> mem = {"payload"};
    switch (k) {
        case EntityKind::Prompt: return prompt;
        case EntityKind::Agent: return agent;
        case EntityKind::Tool: return tool;
        case EntityKind::Environment: return env;
        case EntityKind::Memory: return mem;
    }
    return prompt;
}

// Primary evolvable field of the kind: where update(name, source_text) lands
// and what get_variables exposes.
inline const char* primary_mapping_field(EntityKind k) {
    switch (k) {
        case EntityKind::Prompt: return "prompt_text";
        case EntityKind::Agent: return "model";  // agents evolve via referenced resources
        case EntityKind::Tool: return "source";
        case EntityKind::Environment: return "initial_state";
        case EntityKind::Memory: return "payload";
    }
    return "";
}

inline void validate_record(EntityKind kind, const RegistrationRecord& r) {
    if (r.entity.name.empty())
        throw Error(ErrorKind::InvalidRecord, "resource name must be non-empty");
    if (!r.entity.mapping.is_object())
        throw Error(ErrorKind::InvalidRecord, "mapping must be an object");
    const auto& allowed = permitted_mapping_fields(kind);
    for (auto it = r.entity.mapping.begin(); it != r.entity.mapping.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw Error(ErrorKind::InvalidRecord,
                        "mapping field '" + it.key() + "' not permitted for kind " +
                            kind_name(kind));
    }
    switch (kind) {
        case EntityKind::Prompt:
            if (!r.entity.mapping.contains("prompt_text") ||
                !r.entity.mapping["prompt_text"].is_string())
                throw Error(ErrorKind::InvalidRecord, "prompt mapping requires string prompt_text");
            break;
        case EntityKind::Tool:
            if (!r.entity.mapping.contains("source") || !r.entity.mapping["source"].is_string())
                throw Error(ErrorKind::InvalidRecord, "tool mapping requires string source");
            break;
        case EntityKind::Memory:
            if (!r.entity.mapping.contains("payload") || !r.entity.mapping["payload"].is_string())
                throw Error(ErrorKind::InvalidRecord, "memory mapping requires string payload");
            break;
        case EntityKind::Environment:
            if (!r.entity.mapping.contains("initial_state") ||
                !r.entity.mapping["initial_state"].is_object())
                throw Error(ErrorKind::InvalidRecord,
                            "environment mapping requires object initial_state");
            break;
        case EntityKind::Agent: {
            const bool single = r.entity.mapping.contains("prompt");
            const bool multi = r.entity.mapping.contains("prompts");
            if (single && !r.entity.mapping["prompt"].is_string())
                throw Error(ErrorKind::InvalidRecord, "agent prompt must be a string");
            if (multi && !r.entity.mapping["prompts"].is_array())
                throw Error(ErrorKind::InvalidRecord, "agent prompts must be an array");
            if (!r.entity.mapping.contains("model") || !r.entity.mapping["model"].is_string())
                throw Error(ErrorKind::InvalidRecord, "agent mapping requires string model");
            break;
        }
    }
}

// Flatten a record to logical field paths for diffing. Paths follow the
// domain structure (entity.*, version, impl_descriptor, init_params.*,
// exports[i].*) rather than the serialized layout.
inline std::map<std::string, json> flatten_record(const RegistrationRecord& r) {
    std::map<std::string, json> out;
    out["entity.name"] = r.entity.name;
    out["entity.description"] = r.entity.description;
    out["entity.trainable"] = r.entity.trainable;
    for (auto it = r.entity.mapping.begin(); it != r.entity.mapping.end(); ++it)
        out["entity.mapping." + it.key()] = it.value();
    for (const auto& [k, v] : r.entity.metadata) out["entity.metadata." + k] = v;
    out["version"] = r.version.str();
    out["impl_descriptor"] = r.impl_descriptor;
    for (const auto& [k, v] : r.init_params) out["init_params." + k] = v;
    for (std::size_t i = 0; i < r.exports.size(); ++i) {
        const std::string base = "exports[" + std::to_string(i) + "]";
        out[base + ".form"] = export_form_name(r.exports[i].form);
        out[base + ".body"] = r.exports[i].body;
    }
    return out;
}

}  // namespace agp
