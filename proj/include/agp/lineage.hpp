#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agp/record.hpp"

namespace agp {

// Immutable snapshot of a record at one version. Timestamps are
// informational and excluded from content identity.
struct Snapshot {
    std::string resource_name;
    Version version;
    std::string content_hash;
    RegistrationRecord record;
    std::optional<Version> parent;
    std::int64_t created_at_ms = 0;
};

struct HistoryEntry {
    Version version;
    std::string content_hash;
    std::optional<Version> parent;
    std::int64_t created_at_ms = 0;
};

struct FieldChange {
    std::string field;
    json old_value;
    json new_value;
};

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// Append-only store of per-resource version histories. Versions within a
// lineage are strictly increasing and each snapshot's parent is the version
// that preceded it.
class LineageStore {
public:
    LineageStore() = default;

    LineageStore(const LineageStore& other) {
        std::lock_guard lk(other.mu_);
        table_ = other.table_;
    }
    LineageStore& operator=(const LineageStore& other) {
        if (this == &other) return *this;
        std::scoped_lock lk(mu_, other.mu_);
        table_ = other.table_;
        return *this;
    }

    Snapshot append(const std::string& name, const RegistrationRecord& record,
                    std::optional<Version> parent) {
        std::lock_guard lk(mu_);
        auto& chain = table_[name];
        if (!chain.empty() && record.version <= chain.back().version)
            throw Error(ErrorKind::NonMonotonicVersion,
                        name + ": version " + record.version.str() +
                            " does not advance past " + chain.back().version.str());
        const std::optional<Version> tail =
            chain.empty() ? std::nullopt : std::optional<Version>(chain.back().version);
        if (parent != tail)
            throw Error(ErrorKind::InvalidArgument,
                        name + ": parent must be the current lineage tail");
        Snapshot s;
        s.resource_name = name;
        s.version = record.version;
        s.content_hash = record_content_hash(record);
        s.record = record;
        s.parent = tail;
        s.created_at_ms = now_ms();
        chain.push_back(s);
        return s;
    }

    // Raw append used when restoring a serialized store; trusts the caller's
    // parent and timestamp but still enforces monotonicity.
    void append_snapshot(Snapshot s) {
        std::lock_guard lk(mu_);
        auto& chain = table_[s.resource_name];
        if (!chain.empty() && s.version <= chain.back().version)
            throw Error(ErrorKind::NonMonotonicVersion,
                        s.resource_name + ": version " + s.version.str() +
                            " does not advance past " + chain.back().version.str());
        chain.push_back(std::move(s));
    }

    bool contains(const std::string& name) const {
        std::lock_guard lk(mu_);
        return table_.count(name) > 0;
    }

    std::vector<HistoryEntry> history(const std::string& name) const {
        std::lock_guard lk(mu_);
        auto it = table_.find(name);
        if (it == table_.end())
            throw Error(ErrorKind::NotFound, "no lineage for resource '" + name + "'");
        std::vector<HistoryEntry> out;
        out.reserve(it->second.size());
        for (const auto& s : it->second)
            out.push_back({s.version, s.content_hash, s.parent, s.created_at_ms});
        return out;
    }

    Snapshot get(const std::string& name, const Version& v) const {
        std::lock_guard lk(mu_);
        auto it = table_.find(name);
        if (it == table_.end())
            throw Error(ErrorKind::NotFound, "no lineage for resource '" + name + "'");
        for (const auto& s : it->second)
            if (s.version == v) return s;
        throw Error(ErrorKind::VersionNotFound,
                    name + " has no snapshot at version " + v.str());
    }

    std::vector<Snapshot> snapshots(const std::string& name) const {
        std::lock_guard lk(mu_);
        auto it = table_.find(name);
        if (it == table_.end())
            throw Error(ErrorKind::NotFound, "no lineage for resource '" + name + "'");
        return it->second;
    }

    std::size_t length(const std::string& name) const {
        std::lock_guard lk(mu_);
        auto it = table_.find(name);
        return it == table_.end() ? 0 : it->second.size();
    }

    void erase(const std::string& name) {
        std::lock_guard lk(mu_);
        table_.erase(name);
    }

    std::vector<std::string> names() const {
        std::lock_guard lk(mu_);
        std::vector<std::string> out;
        out.reserve(table_.size());
        for (const auto& [k, _] : table_) out.push_back(k);
        return out;
    }

    // Field-level change set between two stored versions. Empty iff the
    // records are equal; swapping the arguments swaps old/new.
    std::vector<FieldChange> diff(const std::string& name, const Version& a,
                                  const Version& b) const {
        RegistrationRecord ra, rb;
        {
            std::lock_guard lk(mu_);
            auto it = table_.find(name);
            if (it == table_.end())
                throw Error(ErrorKind::NotFound, "no lineage for resource '" + name + "'");
            const Snapshot* sa = nullptr;
            const Snapshot* sb = nullptr;
            for (const auto& s : it->second) {
                if (s.version == a) sa = &s;
                if (s.version == b) sb = &s;
            }
            if (!sa) throw Error(ErrorKind::VersionNotFound, name + "@" + a.str());
            if (!sb) throw Error(ErrorKind::VersionNotFound, name + "@" + b.str());
            ra = sa->record;
            rb = sb->record;
        }
        return diff_records(ra, rb);
    }

    // Content-level diff: the version field is bookkeeping, not content, and
    // is excluded (a restore produces a new version with identical content
    // and an empty diff against its source).
    static std::vector<FieldChange> diff_records(const RegistrationRecord& a,
                                                 const RegistrationRecord& b) {
        auto fa = flatten_record(a);
        auto fb = flatten_record(b);
        fa.erase("version");
        fb.erase("version");
        std::vector<FieldChange> out;
        for (const auto& [path, va] : fa) {
            auto it = fb.find(path);
            if (it == fb.end())
                out.push_back({path, va, json{}});
            else if (it->second != va)
                out.push_back({path, va, it->second});
        }
        for (const auto& [path, vb] : fb)
            if (!fa.count(path)) out.push_back({path, json{}, vb});
        return out;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<Snapshot>> table_;
};

}  // namespace agp
