#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "agp/contract.hpp"
#include "agp/errors.hpp"
#include "agp/instance.hpp"
#include "agp/lineage.hpp"
#include "agp/record.hpp"
#include "agp/text.hpp"
#include "agp/variables.hpp"

namespace agp {

// Kind-specific loaders used by build(). The descriptor is raw source text
// for the kind: prompt template, tool script (or "agent:<name>" delegation),
// JSON config for agents, JSON object for environments, payload for memory.
inline InstancePtr materialize_instance(EntityKind kind, const RegistrationRecord& record);
inline InstancePtr build_instance(EntityKind kind, const std::string& descriptor,
                                  const std::map<std::string, std::string>& params);

struct RetrieveResult {
    std::string name;
    double score = 0.0;
};

// Pluggable retrieval scorer; the default is the lexical token-set overlap.
using RetrieveScorer = double (*)(const std::string& query, const RegistrationRecord& record);

inline double lexical_retrieve_scorer(const std::string& query, const RegistrationRecord& r) {
    std::string doc = r.entity.name + " " + r.entity.description;
    for (const auto& e : r.exports) doc += " " + e.body;
    return token_set_overlap(query, doc);
}

// Per-kind registry of active heads with full version lineage. Reads run
// concurrently; mutations are serialized per kind under the internal lock
// with linearizable semantics.
class Registry {
public:
    explicit Registry(EntityKind kind) : kind_(kind) {}

    Registry(const Registry& other) : kind_(other.kind_) {
        std::shared_lock lk(other.mu_);
        heads_ = other.heads_;
        order_ = other.order_;
        lineage_ = other.lineage_;
        scorer_ = other.scorer_;
        // live instances are deliberately not copied; clones materialize fresh
    }

    Registry& operator=(const Registry& other) {
        if (this == &other) return *this;
        Registry tmp(other);
        std::unique_lock lk(mu_);
        kind_ = tmp.kind_;
        heads_ = std::move(tmp.heads_);
        order_ = std::move(tmp.order_);
        lineage_ = tmp.lineage_;
        scorer_ = tmp.scorer_;
        live_.clear();
        return *this;
    }

    EntityKind kind() const { return kind_; }

    void set_retrieve_scorer(RetrieveScorer scorer) {
        std::unique_lock lk(mu_);
        scorer_ = scorer ? scorer : &lexical_retrieve_scorer;
    }

    // -- lifecycle & registration -------------------------------------------

    // Scans root for record files (*.json, one record per file) and
    // registers each well-formed one at version 0.1.0. Malformed files are
    // skipped and reported, never fatal.
    std::size_t init(const std::filesystem::path& root,
                     std::vector<std::string>* skip_reports = nullptr) {
        namespace fs = std::filesystem;
        if (!fs::exists(root) || !fs::is_directory(root))
            throw Error(ErrorKind::RootNotFound, "discovery root '" + root.string() + "'");
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        std::size_t count = 0;
        for (const auto& path : files) {
            try {
                std::ifstream in(path, std::ios::binary);
                if (!in) throw Error(ErrorKind::PathError, "unreadable");
                json j = json::parse(in, nullptr, false);
                if (j.is_discarded()) throw Error(ErrorKind::ParseError, "invalid JSON");
                RegistrationRecord rec = record_from_json(j);
                rec.version = Version{0, 1, 0};
                register_record(rec);
                ++count;
            } catch (const Error& e) {
                if (skip_reports)
                    skip_reports->push_back(path.string() + ": " + e.what());
            }
        }
        return count;
    }

    Version register_record(RegistrationRecord record) {
        validate_record(kind_, record);
        std::unique_lock lk(mu_);
        if (heads_.count(record.entity.name))
            throw Error(ErrorKind::DuplicateName,
                        "'" + record.entity.name + "' already registered");
        lineage_.append(record.entity.name, record, std::nullopt);
        order_.push_back(record.entity.name);
        heads_[record.entity.name] = std::move(record);
        return heads_[order_.back()].version;
    }

    RegistrationRecord unregister(const std::string& name) {
        std::unique_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        RegistrationRecord removed = std::move(it->second);
        heads_.erase(it);
        lineage_.erase(name);
        order_.erase(std::remove(order_.begin(), order_.end(), name), order_.end());
        live_.erase(name);
        return removed;
    }

    // -- retrieval & inspection ---------------------------------------------

    std::vector<std::string> list() const {
        std::shared_lock lk(mu_);
        std::vector<std::string> names;
        names.reserve(heads_.size());
        for (const auto& [n, _] : heads_) names.push_back(n);
        return names;  // heads_ is an ordered map: already lexicographic
    }

    RegistrationRecord get_info(const std::string& name) const {
        std::shared_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const {
        std::shared_lock lk(mu_);
        return heads_.count(name) > 0;
    }

    InstancePtr get(const std::string& name) { return live_instance(name); }

    json get_state(const std::string& name) {
        if (kind_ != EntityKind::Environment && kind_ != EntityKind::Memory)
            throw Error(ErrorKind::InvalidArgument,
                        std::string("get_state is not supported for kind ") + kind_name(kind_));
        return live_instance(name)->state();
    }

    std::vector<RetrieveResult> retrieve(const std::string& query, std::size_t k) const {
        if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
        std::shared_lock lk(mu_);
        std::vector<RetrieveResult> scored;
        scored.reserve(heads_.size());
        for (const auto& [name, rec] : heads_) scored.push_back({name, scorer_(query, rec)});
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.name < b.name;
        });
        if (scored.size() > k) scored.resize(k);
        return scored;
    }

    InstancePtr build(const std::string& descriptor,
                      const std::map<std::string, std::string>& params) const {
        return build_instance(kind_, descriptor, params);
    }

    // -- evolution & versioning ---------------------------------------------

    Version update(const std::string& name, const std::string& new_source) {
        std::unique_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        RegistrationRecord next = it->second;
        apply_source(next, new_source);
        return commit_update_locked(name, std::move(next));
    }

    // Delta: map of logical field path -> new value. Only description,
    // trainable, metadata.*, init_params.*, exports and the kind's mapping
    // fields may be touched.
    Version update_delta(const std::string& name, const json& delta) {
        if (!delta.is_object() || delta.empty())
            throw Error(ErrorKind::InvalidDelta, "delta must be a non-empty object");
        std::unique_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        RegistrationRecord next = it->second;
        for (auto d = delta.begin(); d != delta.end(); ++d)
            apply_delta_field(next, d.key(), d.value());
        validate_record(kind_, next);
        return commit_update_locked(name, std::move(next));
    }

    Version copy_to(const std::string& name, const std::string& new_name) {
        std::unique_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        if (heads_.count(new_name))
            throw Error(ErrorKind::DuplicateName, "'" + new_name + "' already registered");
        RegistrationRecord dup = it->second;
        dup.entity.name = new_name;
        dup.version = Version{0, 1, 0};
        lineage_.append(new_name, dup, std::nullopt);
        order_.push_back(new_name);
        heads_[new_name] = std::move(dup);
        return Version{0, 1, 0};
    }

    // Restores historical content as a NEW head version; lineage stays
    // append-only, no snapshot is deleted or rewritten.
    Version restore(const std::string& name, const Version& version) {
        std::unique_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        const Snapshot snap = lineage_.get(name, version);
        RegistrationRecord next = snap.record;
        next.version = next_version(it->second.version);
        return commit_update_locked(name, std::move(next));
    }

    std::vector<EvolvableVariable> get_variables(const std::string& name) const {
        if (kind_ == EntityKind::Agent)
            throw Error(ErrorKind::InvalidArgument,
                        "agent variables are resolved through the registry set");
        std::shared_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        return lift_record_variables(kind_, it->second);
    }

    std::vector<Version> set_variables(const std::vector<VariableAssignment>& assignments);

    // -- execution & contract -----------------------------------------------

    json run(const std::string& name, const json& input, RunContext& ctx) {
        InstancePtr inst;
        try {
            inst = live_instance(name);
        } catch (const Error& e) {
            if (ctx.trace && !ctx.trace->closed())
                ctx.trace->record(std::string(kind_name(kind_)) + "/" + name, std::nullopt,
                                  TraceEventKind::Error,
                                  json{{"resource", name}, {"error", e.message()}});
            throw;
        }
        const std::string span = std::string(kind_name(kind_)) + "/" + name;
        const TraceEventKind ev_kind = kind_ == EntityKind::Tool ? TraceEventKind::ToolCall
                                                                 : TraceEventKind::Decision;
        try {
            json out = inst->run(input, ctx);
            if (ctx.trace && !ctx.trace->closed())
                ctx.trace->record(span, std::nullopt, ev_kind,
                                  json{{"resource", name},
                                       {"kind", kind_name(kind_)},
                                       {"input", input},
                                       {"output", out},
                                       {"ok", true}});
            return out;
        } catch (const Error& e) {
            if (ctx.trace && !ctx.trace->closed())
                ctx.trace->record(span, std::nullopt, TraceEventKind::Error,
                                  json{{"resource", name},
                                       {"kind", kind_name(kind_)},
                                       {"input", input},
                                       {"error", e.message()}});
            if (e.kind() == ErrorKind::NotFound || e.kind() == ErrorKind::BuildFailure) throw;
            throw Error(ErrorKind::ExecutionError, std::string(kind_name(kind_)) + " '" + name +
                                                       "': " + e.message());
        }
    }

    std::string contract_markdown_all() const {
        std::shared_lock lk(mu_);
        std::vector<RegistrationRecord> recs;
        recs.reserve(order_.size());
        for (const auto& n : order_) recs.push_back(heads_.at(n));
        return contract_markdown(kind_, recs);
    }

    std::string contract_markdown_for(const std::string& name) const {
        RegistrationRecord rec = get_info(name);
        return contract_markdown(kind_, {rec});
    }

    void save_contract(const std::string& path, const std::string& name = "") const {
        save_contract_file(path, name.empty() ? contract_markdown_all()
                                              : contract_markdown_for(name));
    }

    Contract load_contract(const std::string& path) const { return load_contract_file(path); }

    // -- lineage access -------------------------------------------------------

    std::vector<HistoryEntry> history(const std::string& name) const {
        return lineage_.history(name);
    }
    Snapshot snapshot(const std::string& name, const Version& v) const {
        return lineage_.get(name, v);
    }
    std::vector<FieldChange> diff(const std::string& name, const Version& a,
                                  const Version& b) const {
        return lineage_.diff(name, a, b);
    }
    std::size_t lineage_length(const std::string& name) const { return lineage_.length(name); }

    // Heads in registration order (contracts, serialization).
    std::vector<RegistrationRecord> heads_in_order() const {
        std::shared_lock lk(mu_);
        std::vector<RegistrationRecord> out;
        out.reserve(order_.size());
        for (const auto& n : order_) out.push_back(heads_.at(n));
        return out;
    }

    std::vector<Snapshot> lineage_snapshots(const std::string& name) const {
        return lineage_.snapshots(name);
    }

    // Replaces the whole registry content; used by the persistence decoder.
    void reset_content(std::vector<RegistrationRecord> heads_in_registration_order,
                       std::map<std::string, std::vector<Snapshot>> lineages) {
        std::unique_lock lk(mu_);
        heads_.clear();
        order_.clear();
        live_.clear();
        lineage_ = LineageStore();
        for (auto& [name, snaps] : lineages)
            for (auto& s : snaps) lineage_.append_snapshot(std::move(s));
        for (auto& rec : heads_in_registration_order) {
            order_.push_back(rec.entity.name);
            heads_[rec.entity.name] = std::move(rec);
        }
    }

    // Live update of an existing record (the dynamic manager's hot swap).
    // Readers observe either the old or the new head, never a torn one.
    Version hot_swap(const RegistrationRecord& record) {
        validate_record(kind_, record);
        std::unique_lock lk(mu_);
        auto it = heads_.find(record.entity.name);
        if (it == heads_.end())
            throw Error(ErrorKind::NotFound, "'" + record.entity.name + "'");
        RegistrationRecord next = record;
        next.version = next_version(it->second.version);
        return commit_update_locked(record.entity.name, std::move(next));
    }

private:
    friend class RegistrySet;

    InstancePtr live_instance(const std::string& name) {
        {
            std::shared_lock lk(mu_);
            auto it = live_.find(name);
            if (it != live_.end()) return it->second;
            if (!heads_.count(name)) throw Error(ErrorKind::NotFound, "'" + name + "'");
        }
        std::unique_lock lk(mu_);
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        auto live = live_.find(name);
        if (live != live_.end()) return live->second;
        InstancePtr inst = materialize_instance(kind_, it->second);
        live_[name] = inst;
        return inst;
    }

    // Positions the source text in the kind's primary mapping field. For
    // agents and environments the source is a JSON document.
    void apply_source(RegistrationRecord& rec, const std::string& source) const {
        switch (kind_) {
            case EntityKind::Prompt: rec.entity.mapping["prompt_text"] = source; break;
            case EntityKind::Tool: rec.entity.mapping["source"] = source; break;
            case EntityKind::Memory: rec.entity.mapping["payload"] = source; break;
            case EntityKind::Environment: {
                json j = json::parse(source, nullptr, false);
                if (j.is_discarded() || !j.is_object())
                    throw Error(ErrorKind::InvalidDelta,
                                "environment source must be a JSON object");
                rec.entity.mapping["initial_state"] = j;
                break;
            }
            case EntityKind::Agent: {
                json j = json::parse(source, nullptr, false);
                if (j.is_discarded() || !j.is_object())
                    throw Error(ErrorKind::InvalidDelta, "agent source must be a JSON object");
                rec.entity.mapping = j;
                validate_record(kind_, rec);
                break;
            }
        }
    }

    void apply_delta_field(RegistrationRecord& rec, const std::string& path,
                           const json& value) const {
        auto need_string = [&]() -> std::string {
            if (!value.is_string())
                throw Error(ErrorKind::InvalidDelta, "'" + path + "' requires a string value");
            return value.get<std::string>();
        };
        if (path == "entity.description") {
            rec.entity.description = need_string();
        } else if (path == "entity.trainable") {
            if (!value.is_boolean())
                throw Error(ErrorKind::InvalidDelta, "'entity.trainable' requires a boolean");
            rec.entity.trainable = value.get<bool>();
        } else if (path.rfind("entity.metadata.", 0) == 0) {
            rec.entity.metadata[path.substr(16)] = need_string();
        } else if (path.rfind("init_params.", 0) == 0) {
            rec.init_params[path.substr(12)] = need_string();
        } else if (path.rfind("entity.mapping.", 0) == 0) {
            const std::string field = path.substr(15);
            const auto& allowed = permitted_mapping_fields(kind_);
            if (std::find(allowed.begin(), allowed.end(), field) == allowed.end())
                throw Error(ErrorKind::InvalidDelta, "mapping field '" + field +
                                                         "' not permitted for kind " +
                                                         kind_name(kind_));
            rec.entity.mapping[field] = value;
        } else if (path == "exports") {
            if (!value.is_array())
                throw Error(ErrorKind::InvalidDelta, "'exports' requires an array");
            std::vector<ExportedRepresentation> exports;
            for (const auto& e : value) {
                auto form = parse_export_form(e.value("form", std::string{}));
                if (!form || !e.contains("body") || !e["body"].is_string())
                    throw Error(ErrorKind::InvalidDelta, "bad export entry: " + e.dump());
                exports.push_back({*form, e["body"].get<std::string>()});
            }
            rec.exports = std::move(exports);
        } else {
            throw Error(ErrorKind::InvalidDelta, "field '" + path + "' may not be updated");
        }
    }

    // Precondition: unique lock held, name present.
    Version commit_update_locked(const std::string& name, RegistrationRecord next) {
        auto it = heads_.find(name);
        if (next.version <= it->second.version) next.version = next_version(it->second.version);
        lineage_.append(name, next, it->second.version);
        it->second = std::move(next);
        live_.erase(name);
        return it->second.version;
    }

    static std::vector<EvolvableVariable> lift_record_variables(EntityKind kind,
                                                                const RegistrationRecord& rec) {
        std::vector<EvolvableVariable> out;
        auto push = [&](const std::string& field, std::string value, std::string role) {
            EvolvableVariable v;
            v.id = EvolvableVariable::make_id(kind, rec.entity.name, field);
            v.origin_kind = kind;
            v.origin_name = rec.entity.name;
            v.field_path = field;
            v.value = std::move(value);
            v.learnable = rec.entity.trainable;
            v.role_description = std::move(role);
            out.push_back(std::move(v));
        };
        switch (kind) {
            case EntityKind::Prompt:
                push("entity.mapping.prompt_text",
                     rec.entity.mapping.value("prompt_text", std::string{}),
                     "prompt text of prompt '" + rec.entity.name + "': " +
                         rec.entity.description);
                break;
            case EntityKind::Tool:
                push("entity.mapping.source", rec.entity.mapping.value("source", std::string{}),
                     "tool source of tool '" + rec.entity.name + "': " + rec.entity.description);
                break;
            case EntityKind::Memory:
                push("entity.mapping.payload",
                     rec.entity.mapping.value("payload", std::string{}),
                     "memory payload of memory '" + rec.entity.name + "'");
                break;
            case EntityKind::Environment:
                push("entity.mapping.initial_state",
                     rec.entity.mapping.value("initial_state", json::object()).dump(),
                     "initial state of environment '" + rec.entity.name + "'");
                break;
            case EntityKind::Agent:
                break;  // agents expose variables only through their references
        }
        return out;
    }

    struct ParsedAssignment {
        std::string name;
        std::string field;
        std::string value;
    };

    // Validation and application under an already-held unique lock; used by
    // both the public set_variables and the cross-kind batch in RegistrySet.
    void validate_assignment_locked(const std::string& name, const std::string& field) const {
        auto it = heads_.find(name);
        if (it == heads_.end()) throw Error(ErrorKind::NotFound, "'" + name + "'");
        bool liftable = false;
        for (const auto& v : lift_record_variables(kind_, it->second))
            if (v.field_path == field) liftable = true;
        if (!liftable)
            throw Error(ErrorKind::UnknownVariable,
                        "'" + name + "' has no variable at field '" + field + "'");
        if (!it->second.entity.trainable)
            throw Error(ErrorKind::NotLearnable,
                        "'" + name + "' is not trainable; variable updates rejected");
    }

    Version apply_assignments_locked(const std::string& name,
                                     const std::vector<ParsedAssignment>& group) {
        auto it = heads_.find(name);
        RegistrationRecord next = it->second;
        for (const auto& a : group) {
            const std::string field = a.field.substr(std::string("entity.mapping.").size());
            if (kind_ == EntityKind::Environment) {
                json j = json::parse(a.value, nullptr, false);
                if (j.is_discarded() || !j.is_object())
                    throw Error(ErrorKind::InvalidDelta,
                                "environment state must be a JSON object");
                next.entity.mapping[field] = j;
            } else {
                next.entity.mapping[field] = a.value;
            }
        }
        return commit_update_locked(name, std::move(next));
    }

    EntityKind kind_;
    std::map<std::string, RegistrationRecord> heads_;
    std::vector<std::string> order_;  // registration order
    LineageStore lineage_;
    std::map<std::string, InstancePtr> live_;
    RetrieveScorer scorer_ = &lexical_retrieve_scorer;
    mutable std::shared_mutex mu_;
};

struct ParsedVariableId {
    EntityKind kind;
    std::string name;
    std::string field;
};

inline ParsedVariableId parse_variable_id(const std::string& id) {
    const auto slash = id.find('/');
    const auto hash = id.find('#');
    if (slash == std::string::npos || hash == std::string::npos || hash < slash)
        throw Error(ErrorKind::UnknownVariable, "malformed variable id '" + id + "'");
    auto kind = parse_kind(id.substr(0, slash));
    if (!kind) throw Error(ErrorKind::UnknownVariable, "bad kind in variable id '" + id + "'");
    return {*kind, id.substr(slash + 1, hash - slash - 1), id.substr(hash + 1)};
}

// The five kind registries behind one facade, plus the cross-kind operations
// (agent variable closure, atomic variable batches, cloning for shadow
// evaluation).
class RegistrySet {
public:
    RegistrySet()
        : regs_{Registry(EntityKind::Prompt), Registry(EntityKind::Agent),
                Registry(EntityKind::Tool), Registry(EntityKind::Environment),
                Registry(EntityKind::Memory)} {}

    RegistrySet(const RegistrySet& other)
        : regs_{other.of(EntityKind::Prompt), other.of(EntityKind::Agent),
                other.of(EntityKind::Tool), other.of(EntityKind::Environment),
                other.of(EntityKind::Memory)} {}

    Registry& of(EntityKind k) { return regs_[index(k)]; }
    const Registry& of(EntityKind k) const { return regs_[index(k)]; }

    RegistrySet clone() const { return RegistrySet(*this); }

    // Discovery layout: one subdirectory per kind under the root.
    std::size_t init(const std::filesystem::path& root,
                     std::vector<std::string>* skip_reports = nullptr) {
        namespace fs = std::filesystem;
        if (!fs::exists(root) || !fs::is_directory(root))
            throw Error(ErrorKind::RootNotFound, "discovery root '" + root.string() + "'");
        std::size_t count = 0;
        for (EntityKind k : kAllKinds) {
            const fs::path sub = root / kind_name(k);
            if (fs::exists(sub) && fs::is_directory(sub)) count += of(k).init(sub, skip_reports);
        }
        return count;
    }

    // One variable per evolvable field. Agents contribute the variables of
    // every referenced prompt and tool (trainability follows each referenced
    // resource's own flag).
    std::vector<EvolvableVariable> get_variables(EntityKind kind, const std::string& name) const {
        if (kind != EntityKind::Agent) return of(kind).get_variables(name);
        const RegistrationRecord rec = of(EntityKind::Agent).get_info(name);
        std::vector<EvolvableVariable> out;
        std::set<std::string> seen;
        auto absorb = [&](EntityKind k, const std::string& ref) {
            for (auto& v : of(k).get_variables(ref))
                if (seen.insert(v.id).second) out.push_back(std::move(v));
        };
        for (const auto& p : agent_prompt_names(rec)) absorb(EntityKind::Prompt, p);
        for (const auto& t : agent_tool_names(rec)) absorb(EntityKind::Tool, t);
        return out;
    }

    // Atomic cross-kind batch: every assignment must target a learnable
    // variable or the whole batch is rejected; each touched resource gets
    // exactly one new version.
    std::vector<Version> set_variables(const std::vector<VariableAssignment>& assignments) {
        if (assignments.empty()) return {};
        std::map<EntityKind, std::map<std::string, std::vector<Registry::ParsedAssignment>>>
            grouped;
        std::vector<std::pair<EntityKind, std::string>> touch_order;
        for (const auto& a : assignments) {
            const ParsedVariableId pid = parse_variable_id(a.variable_id);
            if (pid.field.rfind("entity.mapping.", 0) != 0)
                throw Error(ErrorKind::UnknownVariable,
                            "variable '" + a.variable_id + "' is not resource-backed");
            auto& group = grouped[pid.kind][pid.name];
            if (group.empty()) touch_order.emplace_back(pid.kind, pid.name);
            group.push_back({pid.name, pid.field, a.value});
        }
        // Lock involved kinds in a fixed order, validate everything, then
        // apply; this is what makes the batch all-or-nothing.
        std::vector<std::unique_lock<std::shared_mutex>> locks;
        for (EntityKind k : kAllKinds)
            if (grouped.count(k)) locks.emplace_back(of(k).mu_);
        for (const auto& [kind, by_name] : grouped)
            for (const auto& [name, group] : by_name)
                for (const auto& a : group)
                    of(kind).validate_assignment_locked(name, a.field);
        std::map<std::pair<EntityKind, std::string>, Version> versions;
        for (const auto& [kind, by_name] : grouped)
            for (const auto& [name, group] : by_name)
                versions[{kind, name}] = of(kind).apply_assignments_locked(name, group);
        std::vector<Version> out;
        out.reserve(touch_order.size());
        for (const auto& key : touch_order) out.push_back(versions.at(key));
        return out;
    }

    json run(EntityKind kind, const std::string& name, const json& input, RunContext& ctx) {
        return of(kind).run(name, input, ctx);
    }

    static std::vector<std::string> agent_prompt_names(const RegistrationRecord& rec) {
        std::vector<std::string> out;
        if (rec.entity.mapping.contains("prompts"))
            for (const auto& p : rec.entity.mapping["prompts"])
                if (p.is_string()) out.push_back(p.get<std::string>());
        if (rec.entity.mapping.contains("prompt") && rec.entity.mapping["prompt"].is_string())
            out.push_back(rec.entity.mapping["prompt"].get<std::string>());
        return out;
    }

    static std::vector<std::string> agent_tool_names(const RegistrationRecord& rec) {
        std::vector<std::string> out;
        if (rec.entity.mapping.contains("tools"))
            for (const auto& t : rec.entity.mapping["tools"])
                if (t.is_string()) out.push_back(t.get<std::string>());
        return out;
    }

private:
    static constexpr std::size_t index(EntityKind k) { return static_cast<std::size_t>(k); }

    std::array<Registry, 5> regs_;
};

// Single-kind batch: validates every assignment before applying any, then
// bumps each touched resource exactly once.
inline std::vector<Version> Registry::set_variables(
    const std::vector<VariableAssignment>& assignments) {
    if (assignments.empty()) return {};
    std::map<std::string, std::vector<ParsedAssignment>> by_name;
    std::vector<std::string> touch_order;
    for (const auto& a : assignments) {
        const ParsedVariableId pid = parse_variable_id(a.variable_id);
        if (pid.kind != kind_)
            throw Error(ErrorKind::UnknownVariable,
                        "variable '" + a.variable_id + "' belongs to another kind");
        if (pid.field.rfind("entity.mapping.", 0) != 0)
            throw Error(ErrorKind::UnknownVariable,
                        "variable '" + a.variable_id + "' is not resource-backed");
        if (by_name[pid.name].empty()) touch_order.push_back(pid.name);
        by_name[pid.name].push_back({pid.name, pid.field, a.value});
    }
    std::unique_lock lk(mu_);
    for (const auto& [name, group] : by_name)
        for (const auto& a : group) validate_assignment_locked(name, a.field);
    std::map<std::string, Version> versions;
    for (const auto& [name, group] : by_name)
        versions[name] = apply_assignments_locked(name, group);
    std::vector<Version> out;
    out.reserve(touch_order.size());
    for (const auto& name : touch_order) out.push_back(versions.at(name));
    return out;
}

// -- agent & delegation instances -------------------------------------------

// Decision policy: renders its prompts against the input, appends the tool
// contract when tools are attached, and asks the configured model. A
// response of the form "CALL <tool> <json>" dispatches one tool call and
// returns its result as the answer.
class AgentInstance : public Instance {
public:
    AgentInstance(std::string name, std::vector<std::string> prompts,
                  std::vector<std::string> tools, std::string model)
        : name_(std::move(name)),
          prompts_(std::move(prompts)),
          tools_(std::move(tools)),
          model_(std::move(model)) {}

    json run(const json& input, RunContext& ctx) override {
        if (!ctx.registries)
            throw Error(ErrorKind::ExecutionError, "agent requires a registry context");
        if (!ctx.gateway)
            throw Error(ErrorKind::ExecutionError, "agent requires a model gateway");

        std::string message;
        for (const auto& pname : prompts_) {
            const RegistrationRecord rec = ctx.registries->of(EntityKind::Prompt).get_info(pname);
            PromptInstance prompt(rec.entity.mapping.value("prompt_text", std::string{}));
            if (!message.empty()) message += "\n\n";
            message += prompt.render(input);
        }
        if (!tools_.empty()) {
            std::vector<RegistrationRecord> recs;
            for (const auto& t : tools_)
                recs.push_back(ctx.registries->of(EntityKind::Tool).get_info(t));
            message += "\n\n" + contract_markdown(EntityKind::Tool, recs);
        }
        const std::string task = input.is_object() && input.contains("task") &&
                                         input["task"].is_string()
                                     ? input["task"].get<std::string>()
                                     : input.dump();
        if (!message.empty()) message += "\n\n";
        message += task;

        ModelRequest req;
        req.messages.push_back({"user", message});
        req.model_id = model_;
        req.tag = "agent:" + name_;
        const ModelResponse resp = ctx.gateway->complete(req, ctx.trace);

        std::string answer = resp.text;
        if (answer.rfind("CALL ", 0) == 0) {
            const auto space = answer.find(' ', 5);
            const std::string tool =
                space == std::string::npos ? answer.substr(5) : answer.substr(5, space - 5);
            json args = json::object();
            if (space != std::string::npos) {
                args = json::parse(answer.substr(space + 1), nullptr, false);
                if (args.is_discarded())
                    throw Error(ErrorKind::ExecutionError,
                                "agent '" + name_ + "': unparseable tool arguments");
            }
            if (ctx.trace && !ctx.trace->closed())
                ctx.trace->record("agent/" + name_, std::nullopt, TraceEventKind::Decision,
                                  json{{"agent", name_}, {"call", tool}, {"args", args}});
            const json result = ctx.registries->of(EntityKind::Tool).run(tool, args, ctx);
            answer = result.is_string() ? result.get<std::string>() : result.dump();
        }
        return json{{"answer", answer}};
    }

private:
    std::string name_;
    std::vector<std::string> prompts_;
    std::vector<std::string> tools_;
    std::string model_;
};

// Tool facade over a registered agent ("agent:<name>" tool source): runs the
// agent with the tool payload and returns its final answer.
class AgentToolInstance : public Instance {
public:
    explicit AgentToolInstance(std::string agent_name) : agent_(std::move(agent_name)) {}

    json run(const json& input, RunContext& ctx) override {
        if (!ctx.registries)
            throw Error(ErrorKind::ExecutionError, "agent tool requires a registry context");
        return ctx.registries->of(EntityKind::Agent).run(agent_, input, ctx);
    }

private:
    std::string agent_;
};

inline InstancePtr build_instance(EntityKind kind, const std::string& descriptor,
                                  const std::map<std::string, std::string>& params) {
    (void)params;  // builtin loaders take no constructor arguments yet
    switch (kind) {
        case EntityKind::Prompt:
            return std::make_shared<PromptInstance>(descriptor);
        case EntityKind::Tool: {
            if (descriptor.rfind("agent:", 0) == 0)
                return std::make_shared<AgentToolInstance>(descriptor.substr(6));
            return std::make_shared<ToolInstance>(toolscript::Program::compile(descriptor));
        }
        case EntityKind::Memory:
            return std::make_shared<MemoryInstance>(descriptor);
        case EntityKind::Environment: {
            json j = json::parse(descriptor, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw Error(ErrorKind::BuildFailure,
                            "environment descriptor must be a JSON object");
            return std::make_shared<EnvironmentInstance>(j);
        }
        case EntityKind::Agent: {
            json j = json::parse(descriptor, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw Error(ErrorKind::BuildFailure, "agent descriptor must be a JSON object");
            RegistrationRecord probe;
            probe.entity.name = "candidate";
            probe.entity.mapping = j;
            validate_record(EntityKind::Agent, probe);
            std::vector<std::string> prompts = RegistrySet::agent_prompt_names(probe);
            std::vector<std::string> tools = RegistrySet::agent_tool_names(probe);
            return std::make_shared<AgentInstance>("candidate", std::move(prompts),
                                                   std::move(tools),
                                                   j.value("model", std::string{}));
        }
    }
    throw Error(ErrorKind::BuildFailure, "unknown kind");
}

inline InstancePtr materialize_instance(EntityKind kind, const RegistrationRecord& record) {
    try {
        switch (kind) {
            case EntityKind::Prompt:
                return std::make_shared<PromptInstance>(
                    record.entity.mapping.value("prompt_text", std::string{}));
            case EntityKind::Tool: {
                const std::string source = record.entity.mapping.value("source", std::string{});
                if (source.rfind("agent:", 0) == 0)
                    return std::make_shared<AgentToolInstance>(source.substr(6));
                return std::make_shared<ToolInstance>(toolscript::Program::compile(source));
            }
            case EntityKind::Memory:
                return std::make_shared<MemoryInstance>(
                    record.entity.mapping.value("payload", std::string{}));
            case EntityKind::Environment:
                return std::make_shared<EnvironmentInstance>(
                    record.entity.mapping.value("initial_state", json::object()));
            case EntityKind::Agent:
                return std::make_shared<AgentInstance>(
                    record.entity.name, RegistrySet::agent_prompt_names(record),
                    RegistrySet::agent_tool_names(record),
                    record.entity.mapping.value("model", std::string{}));
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::BuildFailure)
            throw Error(ErrorKind::BuildFailure,
                        "'" + record.entity.name + "': " + e.message());
        throw;
    }
    throw Error(ErrorKind::BuildFailure, "unknown kind");
}

}  // namespace agp
