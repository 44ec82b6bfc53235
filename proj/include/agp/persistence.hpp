#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "agp/hash.hpp"
#include "agp/registry.hpp"

namespace agp {

inline constexpr int kSnapshotFormatVersion = 1;

namespace detail {

inline json snapshot_to_json(const Snapshot& s) {
    return json{{"version", s.version.str()},
                {"content_hash", s.content_hash},
                {"record", record_to_json(s.record)},
                {"parent", s.parent ? json(s.parent->str()) : json(nullptr)},
                {"created_at", s.created_at_ms}};
}

inline Snapshot snapshot_from_json(const std::string& name, const json& j) {
    Snapshot s;
    s.resource_name = name;
    auto v = Version::parse(j.at("version").get<std::string>());
    if (!v) throw Error(ErrorKind::ParseError, "bad snapshot version");
    s.version = *v;
    s.record = record_from_json(j.at("record"));
    s.content_hash = j.at("content_hash").get<std::string>();
    if (record_content_hash(s.record) != s.content_hash)
        throw Error(ErrorKind::ParseError,
                    "content hash mismatch for '" + name + "' at " + s.version.str());
    if (!j.at("parent").is_null()) {
        auto p = Version::parse(j.at("parent").get<std::string>());
        if (!p) throw Error(ErrorKind::ParseError, "bad snapshot parent version");
        s.parent = *p;
    }
    s.created_at_ms = j.at("created_at").get<std::int64_t>();
    return s;
}

}  // namespace detail

// Serializes active heads (in registration order) and all lineages to the
// canonical document form. Object keys are sorted, so identical registry
// state always encodes to identical bytes.
inline std::string encode_registry(const Registry& registry) {
    json heads = json::array();
    for (const auto& rec : registry.heads_in_order()) heads.push_back(record_to_json(rec));
    json lineages = json::object();
    for (const auto& rec : registry.heads_in_order()) {
        json chain = json::array();
        for (const auto& s : registry.lineage_snapshots(rec.entity.name))
            chain.push_back(detail::snapshot_to_json(s));
        lineages[rec.entity.name] = std::move(chain);
    }
    json doc = {{"format_version", kSnapshotFormatVersion},
                {"kind", kind_name(registry.kind())},
                {"heads", std::move(heads)},
                {"lineages", std::move(lineages)}};
    return doc.dump();
}

inline Registry decode_registry(const std::string& bytes) {
    json doc = json::parse(bytes, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw Error(ErrorKind::ParseError, "registry document is not valid JSON");
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
        throw Error(ErrorKind::ParseError, "missing format_version");
    const int fv = doc["format_version"].get<int>();
    if (fv != kSnapshotFormatVersion)
        throw Error(ErrorKind::UnsupportedFormatVersion,
                    "format_version " + std::to_string(fv) + " is not supported");
    auto kind = parse_kind(doc.value("kind", std::string{}));
    if (!kind) throw Error(ErrorKind::ParseError, "missing or unknown kind");

    Registry registry(*kind);
    try {
        std::vector<RegistrationRecord> heads;
        for (const auto& h : doc.at("heads")) heads.push_back(record_from_json(h));
        std::map<std::string, std::vector<Snapshot>> lineages;
        for (auto it = doc.at("lineages").begin(); it != doc.at("lineages").end(); ++it) {
            std::vector<Snapshot> chain;
            for (const auto& s : it.value())
                chain.push_back(detail::snapshot_from_json(it.key(), s));
            lineages[it.key()] = std::move(chain);
        }
        registry.reset_content(std::move(heads), std::move(lineages));
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::ParseError, std::string("malformed registry document: ") +
                                               ex.what());
    }
    return registry;
}

// Canonical digest of a registry's full state (heads + lineage hashes);
// the identity used by rollback and equivalence checks.
inline std::string registry_state_digest(const Registry& registry) {
    return content_digest(encode_registry(registry));
}

inline std::string registry_set_digest(const RegistrySet& regs) {
    std::string combined;
    for (EntityKind k : kAllKinds) combined += registry_state_digest(regs.of(k));
    return content_digest(combined);
}

// Live update through the registry's serialized-mutation path; concurrent
// readers observe the old or the new head, never a torn record.
inline Version hot_swap(Registry& registry, const RegistrationRecord& record) {
    return registry.hot_swap(record);
}

inline void save_registry_file(const Registry& registry, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::PathError, "cannot open '" + path.string() + "'");
    out << encode_registry(registry);
    if (!out) throw Error(ErrorKind::PathError, "write failed for '" + path.string() + "'");
}

inline Registry load_registry_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::PathError, "cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_registry(bytes);
}

// Directory layout: one <kind>.json document per kind.
inline void save_registry_set(const RegistrySet& regs, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (EntityKind k : kAllKinds)
        save_registry_file(regs.of(k), dir / (std::string(kind_name(k)) + ".json"));
}

inline void load_registry_set(RegistrySet& regs, const std::filesystem::path& dir) {
    for (EntityKind k : kAllKinds) {
        const auto path = dir / (std::string(kind_name(k)) + ".json");
        if (!std::filesystem::exists(path)) continue;
        Registry loaded = load_registry_file(path);
        if (loaded.kind() != k)
            throw Error(ErrorKind::ParseError,
                        "kind mismatch in '" + path.string() + "'");
        regs.of(k) = loaded;
    }
}

}  // namespace agp
