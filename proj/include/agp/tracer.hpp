#pragma once

#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "agp/errors.hpp"
#include "agp/lineage.hpp"

namespace agp {

enum class TraceEventKind { ModelCall, ToolCall, Decision, Error, Evaluation, Commit, Rollback };

inline const char* trace_event_kind_name(TraceEventKind k) {
    switch (k) {
        case TraceEventKind::ModelCall: return "model_call";
        case TraceEventKind::ToolCall: return "tool_call";
        case TraceEventKind::Decision: return "decision";
        case TraceEventKind::Error: return "error";
        case TraceEventKind::Evaluation: return "evaluation";
        case TraceEventKind::Commit: return "commit";
        case TraceEventKind::Rollback: return "rollback";
    }
    return "unknown";
}

inline std::optional<TraceEventKind> parse_trace_event_kind(const std::string& s) {
    if (s == "model_call") return TraceEventKind::ModelCall;
    if (s == "tool_call") return TraceEventKind::ToolCall;
    if (s == "decision") return TraceEventKind::Decision;
    if (s == "error") return TraceEventKind::Error;
    if (s == "evaluation") return TraceEventKind::Evaluation;
    if (s == "commit") return TraceEventKind::Commit;
    if (s == "rollback") return TraceEventKind::Rollback;
    return std::nullopt;
}

struct TraceEvent {
    std::string span_id;
    std::optional<std::string> parent_span;
    std::uint64_t seq = 0;
    TraceEventKind kind = TraceEventKind::Decision;
    json payload = json::object();
    std::int64_t ts_ms = 0;

    bool operator==(const TraceEvent&) const = default;
};

struct TraceOutcome {
    std::string final_answer;
    bool success = false;

    bool operator==(const TraceOutcome&) const = default;
};

// Ordered execution event log. Events may arrive from multiple threads;
// sequence numbering under the internal mutex is the serialization point.
// Append-only while open, immutable after close().
class Trace {
public:
    Trace() = default;
    explicit Trace(std::string trace_id) : trace_id_(std::move(trace_id)) {}

    Trace(const Trace& other) {
        std::lock_guard lk(other.mu_);
        trace_id_ = other.trace_id_;
        events_ = other.events_;
        outcome_ = other.outcome_;
        closed_ = other.closed_;
        spans_ = other.spans_;
    }
    Trace& operator=(const Trace& other) {
        if (this == &other) return *this;
        Trace tmp(other);
        std::lock_guard lk(mu_);
        trace_id_ = std::move(tmp.trace_id_);
        events_ = std::move(tmp.events_);
        outcome_ = std::move(tmp.outcome_);
        closed_ = tmp.closed_;
        spans_ = std::move(tmp.spans_);
        return *this;
    }

    const std::string& trace_id() const { return trace_id_; }

    std::uint64_t record(const std::string& span_id, std::optional<std::string> parent_span,
                         TraceEventKind kind, json payload) {
        std::lock_guard lk(mu_);
        if (closed_) throw Error(ErrorKind::TraceClosed, "trace " + trace_id_ + " is closed");
        if (parent_span && !spans_.count(*parent_span))
            throw Error(ErrorKind::InvalidArgument,
                        "parent span '" + *parent_span + "' does not exist");
        TraceEvent ev;
        ev.span_id = span_id;
        ev.parent_span = std::move(parent_span);
        ev.seq = next_seq_++;
        ev.kind = kind;
        ev.payload = std::move(payload);
        ev.ts_ms = now_ms();
        spans_.insert(span_id);
        events_.push_back(std::move(ev));
        return events_.back().seq;
    }

    void close(TraceOutcome outcome) {
        std::lock_guard lk(mu_);
        outcome_ = std::move(outcome);
        closed_ = true;
    }

    bool closed() const {
        std::lock_guard lk(mu_);
        return closed_;
    }

    std::vector<TraceEvent> events() const {
        std::lock_guard lk(mu_);
        return events_;
    }

    std::size_t size() const {
        std::lock_guard lk(mu_);
        return events_.size();
    }

    std::size_t count(TraceEventKind kind) const {
        std::lock_guard lk(mu_);
        std::size_t n = 0;
        for (const auto& e : events_)
            if (e.kind == kind) ++n;
        return n;
    }

    TraceOutcome outcome() const {
        std::lock_guard lk(mu_);
        return outcome_;
    }

    bool operator==(const Trace& other) const {
        std::scoped_lock lk(mu_, other.mu_);
        return trace_id_ == other.trace_id_ && events_ == other.events_ &&
               outcome_ == other.outcome_;
    }

private:
    friend Trace load_trace(const std::string& path);

    std::string trace_id_ = "trace";
    std::vector<TraceEvent> events_;
    TraceOutcome outcome_;
    bool closed_ = false;
    std::uint64_t next_seq_ = 0;
    std::set<std::string> spans_;
    mutable std::mutex mu_;
};

// JSONL export: one header line carrying trace id and outcome, then one line
// per event. Returns the number of lines written.
inline std::size_t export_trace(const Trace& trace, const std::string& path) {
    if (!trace.closed())
        throw Error(ErrorKind::InvalidArgument, "trace must be closed before export");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::PathError, "cannot open '" + path + "' for writing");
    const TraceOutcome oc = trace.outcome();
    json header = {{"trace_id", trace.trace_id()},
                   {"outcome", {{"final_answer", oc.final_answer}, {"success", oc.success}}}};
    out << header.dump() << "\n";
    std::size_t lines = 1;
    for (const auto& e : trace.events()) {
        json j = {{"seq", e.seq},
                  {"span", e.span_id},
                  {"parent", e.parent_span ? json(*e.parent_span) : json(nullptr)},
                  {"kind", trace_event_kind_name(e.kind)},
                  {"payload", e.payload},
                  {"ts", e.ts_ms}};
        out << j.dump() << "\n";
        ++lines;
    }
    if (!out) throw Error(ErrorKind::PathError, "write failed for '" + path + "'");
    return lines;
}

inline Trace load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::PathError, "cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    Trace t;
    bool have_header = false;
    TraceOutcome outcome;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(lineno) + ": invalid JSON");
        try {
            if (!have_header) {
                t.trace_id_ = j.at("trace_id").get<std::string>();
                outcome.final_answer = j.at("outcome").at("final_answer").get<std::string>();
                outcome.success = j.at("outcome").at("success").get<bool>();
                have_header = true;
                continue;
            }
            TraceEvent ev;
            ev.seq = j.at("seq").get<std::uint64_t>();
            ev.span_id = j.at("span").get<std::string>();
            if (!j.at("parent").is_null()) ev.parent_span = j.at("parent").get<std::string>();
            auto kind = parse_trace_event_kind(j.at("kind").get<std::string>());
            if (!kind)
                throw Error(ErrorKind::ParseError,
                            "line " + std::to_string(lineno) + ": unknown event kind");
            ev.kind = *kind;
            ev.payload = j.at("payload");
            ev.ts_ms = j.at("ts").get<std::int64_t>();
            if (!t.events_.empty() && ev.seq <= t.events_.back().seq)
                throw Error(ErrorKind::ParseError,
                            "line " + std::to_string(lineno) + ": sequence not increasing");
            t.events_.push_back(std::move(ev));
        } catch (const json::exception& ex) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    if (!have_header) throw Error(ErrorKind::ParseError, "missing header line");
    t.outcome_ = std::move(outcome);
    t.closed_ = true;
    t.next_seq_ = t.events_.empty() ? 0 : t.events_.back().seq + 1;
    for (const auto& e : t.events_) t.spans_.insert(e.span_id);
    return t;
}

}  // namespace agp
