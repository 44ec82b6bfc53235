#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agp/errors.hpp"
#include "agp/record.hpp"

namespace agp {

// A resource field (or the run output artifact) lifted into the homogeneous
// optimization view. Learnability mirrors the origin resource's trainable
// flag; the output artifact is always present and always writable.
struct EvolvableVariable {
    std::string id;           // "<kind>/<name>#<field path>" or "output"
    EntityKind origin_kind = EntityKind::Prompt;
    std::string origin_name;  // empty for the output artifact
    std::string field_path;   // e.g. "entity.mapping.prompt_text"
    std::string value;
    bool learnable = false;
    std::string role_description;
    std::vector<std::string> gradients;  // textual-gradient buffer

    bool is_output() const { return id == "output"; }

    static std::string make_id(EntityKind kind, const std::string& name,
                               const std::string& field_path) {
        return std::string(kind_name(kind)) + "/" + name + "#" + field_path;
    }

    static EvolvableVariable output_artifact() {
        EvolvableVariable v;
        v.id = "output";
        v.origin_name = "";
        v.field_path = "output";
        v.learnable = true;
        v.role_description = "final output artifact of the system run";
        return v;
    }
};

struct VariableAssignment {
    std::string variable_id;
    std::string value;
};

// Ordered collection of lifted variables; the output artifact appears
// exactly once.
class VariableSet {
public:
    VariableSet() { vars_.push_back(EvolvableVariable::output_artifact()); }

    static VariableSet empty_without_output() {
        VariableSet s;
        s.vars_.clear();
        return s;
    }

    void add(EvolvableVariable v) {
        if (find(v.id))
            throw Error(ErrorKind::DuplicateName, "variable '" + v.id + "' already lifted");
        vars_.push_back(std::move(v));
    }

    const EvolvableVariable* find(const std::string& id) const {
        for (const auto& v : vars_)
            if (v.id == id) return &v;
        return nullptr;
    }

    EvolvableVariable* find(const std::string& id) {
        for (auto& v : vars_)
            if (v.id == id) return &v;
        return nullptr;
    }

    EvolvableVariable& at(const std::string& id) {
        if (auto* v = find(id)) return *v;
        throw Error(ErrorKind::UnknownVariable, "no variable '" + id + "'");
    }

    const EvolvableVariable& at(const std::string& id) const {
        if (auto* v = find(id)) return *v;
        throw Error(ErrorKind::UnknownVariable, "no variable '" + id + "'");
    }

    const std::string& output() const { return at("output").value; }
    void set_output(std::string v) { at("output").value = std::move(v); }

    std::vector<std::string> trainable_ids() const {
        std::vector<std::string> out;
        for (const auto& v : vars_)
            if (v.learnable && !v.is_output()) out.push_back(v.id);
        return out;
    }

    const std::vector<EvolvableVariable>& all() const { return vars_; }
    std::vector<EvolvableVariable>& all() { return vars_; }
    std::size_t size() const { return vars_.size(); }

    // Set when a proposal wrote the output artifact directly (solution
    // refinement); evaluation then scores the override instead of the
    // freshly executed output.
    bool output_overridden() const { return output_overridden_; }
    void set_output_overridden(bool v) { output_overridden_ = v; }

private:
    std::vector<EvolvableVariable> vars_;
    bool output_overridden_ = false;
};

}  // namespace agp
