#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agp/record.hpp"

namespace agp {

struct ArgSpec {
    std::string name;
    std::string type;
    std::string description;

    bool operator==(const ArgSpec&) const = default;
};

struct ContractEntry {
    std::string name;
    Version version;
    std::string description;
    std::vector<ArgSpec> args;
    std::string preconditions;
    std::string constraints;

    bool operator==(const ContractEntry&) const = default;
};

struct Contract {
    EntityKind kind = EntityKind::Tool;
    std::vector<ContractEntry> entries;

    bool operator==(const Contract&) const = default;
};

namespace detail {

inline std::string single_line(const std::string& s) {
    std::string out = s;
    for (auto& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

inline std::vector<ArgSpec> args_from_record(const RegistrationRecord& r) {
    std::vector<ArgSpec> out;
    for (const auto& e : r.exports) {
        if (e.form != ExportForm::StructuredArgumentSchema) continue;
        json j = json::parse(e.body, nullptr, false);
        if (j.is_discarded() || !j.is_array()) continue;
        for (const auto& a : j) {
            if (!a.is_object()) continue;
            out.push_back({a.value("name", std::string{}), a.value("type", std::string{}),
                           a.value("description", std::string{})});
        }
    }
    return out;
}

}  // namespace detail

inline ContractEntry contract_entry_from_record(const RegistrationRecord& r) {
    ContractEntry e;
    e.name = r.entity.name;
    e.version = r.version;
    e.description = detail::single_line(r.entity.description);
    e.args = detail::args_from_record(r);
    auto meta = [&](const char* key) {
        auto it = r.entity.metadata.find(key);
        return it == r.entity.metadata.end() ? std::string("none")
                                             : detail::single_line(it->second);
    };
    e.preconditions = meta("preconditions");
    e.constraints = meta("constraints");
    return e;
}

// Render the consolidated capability/constraint markdown: a kind heading
// followed by one section per resource in registration order.
inline std::string contract_markdown(EntityKind kind,
                                     const std::vector<RegistrationRecord>& records) {
    std::ostringstream out;
    out << "# " << kind_title(kind) << " Contract\n";
    for (const auto& r : records) {
        const ContractEntry e = contract_entry_from_record(r);
        out << "\n## " << e.name << " (v" << e.version.str() << ")\n";
        out << "**Description**: " << e.description << "\n";
        if (e.args.empty()) {
            out << "**Arguments**: none\n";
        } else {
            out << "**Arguments**:\n";
            for (const auto& a : e.args)
                out << "- " << a.name << ": " << a.type << " \xE2\x80\x94 " << a.description
                    << "\n";
        }
        out << "**Preconditions**: " << e.preconditions << "\n";
        out << "**Constraints**: " << e.constraints << "\n";
    }
    return out.str();
}

inline Contract parse_contract(const std::string& text) {
    Contract c;
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    ContractEntry* cur = nullptr;
    bool in_args = false;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            if (line.rfind("# ", 0) != 0) fail("expected '# <Kind> Contract' header");
            const std::string rest = line.substr(2);
            const std::string suffix = " Contract";
            if (rest.size() <= suffix.size() ||
                rest.substr(rest.size() - suffix.size()) != suffix)
                fail("expected '# <Kind> Contract' header");
            std::string kind_text = rest.substr(0, rest.size() - suffix.size());
            for (auto& ch : kind_text) ch = static_cast<char>(std::tolower(
                static_cast<unsigned char>(ch)));
            auto k = parse_kind(kind_text);
            if (!k) fail("unknown kind '" + kind_text + "'");
            c.kind = *k;
            have_header = true;
            continue;
        }
        if (line.rfind("## ", 0) == 0) {
            const std::string rest = line.substr(3);
            const auto open = rest.rfind(" (v");
            if (open == std::string::npos || rest.back() != ')')
                fail("section heading must be '## <name> (v<version>)'");
            ContractEntry e;
            e.name = rest.substr(0, open);
            const std::string vtext = rest.substr(open + 3, rest.size() - open - 4);
            auto v = Version::parse(vtext);
            if (!v) fail("bad version '" + vtext + "'");
            e.version = *v;
            c.entries.push_back(std::move(e));
            cur = &c.entries.back();
            in_args = false;
            continue;
        }
        if (!cur) fail("content before first section");
        auto field = [&](const char* label) -> std::optional<std::string> {
            const std::string prefix = std::string("**") + label + "**:";
            if (line.rfind(prefix, 0) != 0) return std::nullopt;
            std::string v = line.substr(prefix.size());
            if (!v.empty() && v.front() == ' ') v.erase(0, 1);
            return v;
        };
        if (auto v = field("Description")) {
            cur->description = *v;
            in_args = false;
        } else if (auto a = field("Arguments")) {
            // "none" or empty means a bulleted list follows on later lines
            in_args = (*a != "none");
        } else if (auto p = field("Preconditions")) {
            cur->preconditions = *p;
            in_args = false;
        } else if (auto cns = field("Constraints")) {
            cur->constraints = *cns;
            in_args = false;
        } else if (line.rfind("- ", 0) == 0) {
            if (!in_args) fail("argument bullet outside Arguments block");
            const std::string body = line.substr(2);
            const auto colon = body.find(": ");
            if (colon == std::string::npos) fail("argument bullet must be '- name: type — desc'");
            const std::string dash = " \xE2\x80\x94 ";
            const auto sep = body.find(dash, colon + 2);
            if (sep == std::string::npos) fail("argument bullet must be '- name: type — desc'");
            ArgSpec a;
            a.name = body.substr(0, colon);
            a.type = body.substr(colon + 2, sep - colon - 2);
            a.description = body.substr(sep + dash.size());
            cur->args.push_back(std::move(a));
        } else {
            fail("unrecognized line: " + line);
        }
    }
    if (!have_header) throw Error(ErrorKind::ParseError, "empty contract document");
    return c;
}

inline void save_contract_file(const std::string& path, const std::string& markdown) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::PathError, "cannot open '" + path + "' for writing");
    out << markdown;
    if (!out) throw Error(ErrorKind::PathError, "write failed for '" + path + "'");
}

inline Contract load_contract_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::PathError, "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_contract(buf.str());
}

}  // namespace agp
