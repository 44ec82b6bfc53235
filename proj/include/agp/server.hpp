#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "agp/contract.hpp"
#include "agp/gateway.hpp"
#include "agp/persistence.hpp"
#include "agp/registry.hpp"

namespace agp {

struct RpcRequest {
    json id = nullptr;
    std::string method;  // "<kind>.<operator>"
    json params = json::object();

    static RpcRequest from_json(const json& j) {
        if (!j.is_object()) throw Error(ErrorKind::InvalidParams, "request must be an object");
        RpcRequest r;
        r.id = j.value("id", json(nullptr));
        if (!j.contains("method") || !j["method"].is_string())
            throw Error(ErrorKind::InvalidParams, "request requires a string method");
        r.method = j["method"].get<std::string>();
        r.params = j.value("params", json::object());
        if (!r.params.is_object())
            throw Error(ErrorKind::InvalidParams, "params must be an object");
        return r;
    }
};

struct RpcResponse {
    json id = nullptr;
    json result;
    bool has_error = false;
    int error_code = 0;
    std::string error_message;
    json error_data;

    json to_json() const {
        json j = {{"jsonrpc", "2.0"}, {"id", id}};
        if (has_error)
            j["error"] = {{"code", error_code}, {"message", error_message}, {"data", error_data}};
        else
            j["result"] = result;
        return j;
    }
};

// Stable numeric codes: the JSON-RPC reserved codes for protocol faults,
// a fixed -32000 - <enum index> block for domain error kinds.
inline int rpc_error_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::MethodNotFound: return -32601;
        case ErrorKind::InvalidParams: return -32602;
        case ErrorKind::ParseError: return -32700;
        default: return -32000 - static_cast<int>(k);
    }
}

// The server-side operator surface: every context-manager routine of every
// kind behind one dispatch entry point. Handlers delegate to the registry
// contracts; mutation serialization stays with the registries themselves.
class ControlPlane {
public:
    explicit ControlPlane(RegistrySet* registries, ModelGateway* gateway = nullptr)
        : regs_(registries), gateway_(gateway) {
        if (!regs_) throw Error(ErrorKind::InvalidArgument, "registries required");
    }

    struct MethodInfo {
        std::string method;
        std::map<std::string, std::string> params;  // name -> type
    };

    // Cross product of kinds and operators, minus operators a kind does not
    // support (get_state exists only for environment and memory).
    std::vector<MethodInfo> catalogue() const {
        std::vector<MethodInfo> out;
        for (EntityKind k : kAllKinds) {
            const std::string prefix = std::string(kind_name(k)) + ".";
            auto add = [&](const char* op, std::map<std::string, std::string> params) {
                out.push_back({prefix + op, std::move(params)});
            };
            add("init", {{"root", "string"}});
            add("build", {{"descriptor", "string"}, {"params", "object?"}});
            add("register", {{"record", "object"}});
            add("unregister", {{"name", "string"}});
            add("get", {{"name", "string"}});
            add("get_info", {{"name", "string"}});
            add("list", {});
            add("retrieve", {{"query", "string"}, {"k", "integer"}});
            if (k == EntityKind::Environment || k == EntityKind::Memory)
                add("get_state", {{"name", "string"}});
            add("update", {{"name", "string"}, {"source", "string?"}, {"delta", "object?"}});
            add("copy", {{"name", "string"}, {"new_name", "string"}});
            add("restore", {{"name", "string"}, {"version", "string"}});
            add("get_variables", {{"name", "string"}});
            add("set_variables", {{"assignments", "array"}});
            add("run", {{"name", "string"}, {"input", "object"}});
            add("history", {{"name", "string"}});
            add("diff", {{"name", "string"}, {"a", "string"}, {"b", "string"}});
            add("save_contract", {{"path", "string"}, {"name", "string?"}});
            add("load_contract", {{"path", "string"}});
            add("save_to_json", {{"path", "string"}});
            add("load_from_json", {{"path", "string"}});
        }
        return out;
    }

    json catalogue_json() const {
        json out = json::array();
        for (const auto& m : catalogue())
            out.push_back({{"method", m.method}, {"params", m.params}});
        return out;
    }

    RpcResponse dispatch(const RpcRequest& request) {
        RpcResponse resp;
        resp.id = request.id;
        try {
            resp.result = invoke(request.method, request.params);
        } catch (const Error& e) {
            resp.has_error = true;
            resp.error_code = rpc_error_code(e.kind());
            resp.error_message = e.message();
            resp.error_data = {{"kind", error_kind_name(e.kind())}};
        } catch (const std::exception& e) {
            resp.has_error = true;
            resp.error_code = -32603;
            resp.error_message = e.what();
            resp.error_data = {{"kind", "Internal"}};
        }
        return resp;
    }

    RpcResponse dispatch_text(const std::string& body) {
        RpcResponse resp;
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded()) {
            resp.has_error = true;
            resp.error_code = -32700;
            resp.error_message = "request body is not valid JSON";
            return resp;
        }
        try {
            return dispatch(RpcRequest::from_json(j));
        } catch (const Error& e) {
            resp.id = j.is_object() ? j.value("id", json(nullptr)) : json(nullptr);
            resp.has_error = true;
            resp.error_code = rpc_error_code(e.kind());
            resp.error_message = e.message();
            resp.error_data = {{"kind", error_kind_name(e.kind())}};
            return resp;
        }
    }

private:
    static std::string want_string(const json& params, const char* key) {
        if (!params.contains(key) || !params[key].is_string())
            throw Error(ErrorKind::InvalidParams, std::string("missing string param '") + key +
                                                      "'");
        return params[key].get<std::string>();
    }

    static Version want_version(const json& params, const char* key) {
        auto v = Version::parse(want_string(params, key));
        if (!v) throw Error(ErrorKind::InvalidParams, std::string("bad version in '") + key + "'");
        return *v;
    }

    json invoke(const std::string& method, const json& params) {
        const auto dot = method.find('.');
        if (dot == std::string::npos)
            throw Error(ErrorKind::MethodNotFound, "method '" + method + "' is not catalogued");
        auto kind = parse_kind(method.substr(0, dot));
        if (!kind)
            throw Error(ErrorKind::MethodNotFound, "method '" + method + "' is not catalogued");
        const std::string op = method.substr(dot + 1);
        Registry& reg = regs_->of(*kind);

        if (op == "init") {
            std::vector<std::string> skipped;
            const std::size_t count = reg.init(want_string(params, "root"), &skipped);
            return json{{"count", count}, {"skipped", skipped}};
        }
        if (op == "build") {
            std::map<std::string, std::string> init;
            if (params.contains("params"))
                init = params["params"].get<std::map<std::string, std::string>>();
            reg.build(want_string(params, "descriptor"), init);
            return json{{"buildable", true}};
        }
        if (op == "register") {
            if (!params.contains("record"))
                throw Error(ErrorKind::InvalidParams, "missing 'record'");
            const Version v = reg.register_record(record_from_json(params["record"]));
            return json{{"version", v.str()}};
        }
        if (op == "unregister")
            return record_to_json(reg.unregister(want_string(params, "name")));
        if (op == "get") {
            const std::string name = want_string(params, "name");
            const RegistrationRecord rec = reg.get_info(name);
            InstancePtr inst = reg.get(name);
            return json{{"name", name},
                        {"kind", kind_name(*kind)},
                        {"version", rec.version.str()},
                        {"state", inst->state()}};
        }
        if (op == "get_info") return record_to_json(reg.get_info(want_string(params, "name")));
        if (op == "list") return json(reg.list());
        if (op == "retrieve") {
            if (!params.contains("k") || !params["k"].is_number_integer())
                throw Error(ErrorKind::InvalidParams, "missing integer param 'k'");
            const auto k = params["k"].get<std::int64_t>();
            if (k < 1) throw Error(ErrorKind::InvalidParams, "k must be >= 1");
            json out = json::array();
            for (const auto& r :
                 reg.retrieve(want_string(params, "query"), static_cast<std::size_t>(k)))
                out.push_back({{"name", r.name}, {"score", r.score}});
            return out;
        }
        if (op == "get_state") {
            if (*kind != EntityKind::Environment && *kind != EntityKind::Memory)
                throw Error(ErrorKind::MethodNotFound,
                            "method '" + method + "' is not catalogued");
            return reg.get_state(want_string(params, "name"));
        }
        if (op == "update") {
            const std::string name = want_string(params, "name");
            Version v;
            if (params.contains("delta"))
                v = reg.update_delta(name, params["delta"]);
            else
                v = reg.update(name, want_string(params, "source"));
            return json{{"version", v.str()}};
        }
        if (op == "copy") {
            const Version v =
                reg.copy_to(want_string(params, "name"), want_string(params, "new_name"));
            return json{{"version", v.str()}};
        }
        if (op == "restore") {
            const Version v =
                reg.restore(want_string(params, "name"), want_version(params, "version"));
            return json{{"version", v.str()}};
        }
        if (op == "get_variables") {
            json out = json::array();
            for (const auto& v : regs_->get_variables(*kind, want_string(params, "name")))
                out.push_back({{"id", v.id},
                               {"origin", v.origin_name},
                               {"field", v.field_path},
                               {"value", v.value},
                               {"learnable", v.learnable},
                               {"role", v.role_description}});
            return out;
        }
        if (op == "set_variables") {
            if (!params.contains("assignments") || !params["assignments"].is_array())
                throw Error(ErrorKind::InvalidParams, "missing array param 'assignments'");
            std::vector<VariableAssignment> assignments;
            for (const auto& a : params["assignments"])
                assignments.push_back({a.value("variable_id", std::string{}),
                                       a.value("value", std::string{})});
            json out = json::array();
            for (const auto& v : reg.set_variables(assignments)) out.push_back(v.str());
            return out;
        }
        if (op == "run") {
            RunContext ctx{gateway_, nullptr, regs_};
            return reg.run(want_string(params, "name"), params.value("input", json::object()),
                           ctx);
        }
        if (op == "history") {
            json out = json::array();
            for (const auto& h : reg.history(want_string(params, "name")))
                out.push_back({{"version", h.version.str()},
                               {"content_hash", h.content_hash},
                               {"parent", h.parent ? json(h.parent->str()) : json(nullptr)},
                               {"created_at", h.created_at_ms}});
            return out;
        }
        if (op == "diff") {
            json out = json::array();
            for (const auto& d : reg.diff(want_string(params, "name"),
                                          want_version(params, "a"), want_version(params, "b")))
                out.push_back({{"field", d.field}, {"old", d.old_value}, {"new", d.new_value}});
            return out;
        }
        if (op == "save_contract") {
            const std::string path = want_string(params, "path");
            reg.save_contract(path, params.value("name", std::string{}));
            return json{{"path", path}};
        }
        if (op == "load_contract") {
            const Contract c = reg.load_contract(want_string(params, "path"));
            json entries = json::array();
            for (const auto& e : c.entries) {
                json args = json::array();
                for (const auto& a : e.args)
                    args.push_back(
                        {{"name", a.name}, {"type", a.type}, {"description", a.description}});
                entries.push_back({{"name", e.name},
                                   {"version", e.version.str()},
                                   {"description", e.description},
                                   {"args", args},
                                   {"preconditions", e.preconditions},
                                   {"constraints", e.constraints}});
            }
            return json{{"kind", kind_name(c.kind)}, {"entries", entries}};
        }
        if (op == "save_to_json") {
            const std::string path = want_string(params, "path");
            save_registry_file(reg, path);
            return json{{"path", path}};
        }
        if (op == "load_from_json") {
            Registry loaded = load_registry_file(want_string(params, "path"));
            if (loaded.kind() != *kind)
                throw Error(ErrorKind::InvalidParams, "document kind does not match method kind");
            reg = loaded;
            return json{{"count", reg.list().size()}};
        }
        throw Error(ErrorKind::MethodNotFound, "method '" + method + "' is not catalogued");
    }

    RegistrySet* regs_;
    ModelGateway* gateway_;
};

// Loopback-friendly HTTP wrapper: POST /rpc with the request schema, GET
// /catalogue for the method list. Shutdown drains in-flight handlers.
class RpcServer {
public:
    RpcServer(RegistrySet* registries, ModelGateway* gateway = nullptr)
        : plane_(registries, gateway) {}

    ~RpcServer() { stop(); }

    // Binds host:port (port 0 picks an ephemeral port) and serves on a
    // background thread until stop().
    void start(const std::string& host, int port) {
        server_ = std::make_unique<httplib::Server>();
        server_->Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
            const RpcResponse out = plane_.dispatch_text(req.body);
            res.set_content(out.to_json().dump(), "application/json");
        });
        server_->Get("/catalogue", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(plane_.catalogue_json().dump(), "application/json");
        });
        if (port == 0) {
            port_ = server_->bind_to_any_port(host);
            if (port_ < 0) throw Error(ErrorKind::BindError, "cannot bind " + host);
        } else {
            if (!server_->bind_to_port(host, port))
                throw Error(ErrorKind::BindError,
                            "cannot bind " + host + ":" + std::to_string(port));
            port_ = port;
        }
        host_ = host;
        thread_ = std::thread([this] { server_->listen_after_bind(); });
        server_->wait_until_ready();
    }

    void stop() {
        if (server_) server_->stop();
        if (thread_.joinable()) thread_.join();
        server_.reset();
    }

    int port() const { return port_; }
    std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }
    ControlPlane& plane() { return plane_; }

private:
    ControlPlane plane_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_ = "127.0.0.1";
    int port_ = -1;
};

// Minimal client for the wire protocol; used by tests and the CLI.
class RpcClient {
public:
    explicit RpcClient(const std::string& host, int port) : client_(host, port) {}

    RpcResponse call(const std::string& method, const json& params,
                     const json& id = json(nullptr)) {
        json req = {{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}};
        auto res = client_.Post("/rpc", req.dump(), "application/json");
        if (!res)
            throw Error(ErrorKind::ExecutionError, "rpc transport failure");
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorKind::ParseError, "bad rpc response");
        RpcResponse out;
        out.id = j.value("id", json(nullptr));
        if (j.contains("error")) {
            out.has_error = true;
            out.error_code = j["error"].value("code", 0);
            out.error_message = j["error"].value("message", std::string{});
            out.error_data = j["error"].value("data", json());
        } else {
            out.result = j.value("result", json());
        }
        return out;
    }

    json catalogue() {
        auto res = client_.Get("/catalogue");
        if (!res) throw Error(ErrorKind::ExecutionError, "rpc transport failure");
        return json::parse(res->body);
    }

private:
    httplib::Client client_;
};

}  // namespace agp
