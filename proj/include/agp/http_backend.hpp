#pragma once

#include <cstdlib>
#include <string>

#include "httplib.h"

#include "agp/gateway.hpp"

namespace agp {

// HTTP provider behind the backend interface: POST <base_url>/complete with
// the request JSON, expect {"text": ...}. The API key is read from the named
// environment variable only, never from configuration values.
class HttpBackend : public ModelBackend {
public:
    HttpBackend(std::string base_url, std::string api_key_env = "",
                std::string path = "/complete")
        : base_url_(std::move(base_url)),
          api_key_env_(std::move(api_key_env)),
          path_(std::move(path)) {}

    ModelResponse complete(const ModelRequest& request) override {
        json messages = json::array();
        for (const auto& m : request.messages)
            messages.push_back({{"role", m.role}, {"content", m.content}});
        json body = {{"model", request.model_id},
                     {"messages", messages},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_tokens}};

        httplib::Client client(base_url_);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(10, 0);
        httplib::Headers headers;
        if (!api_key_env_.empty()) {
            const char* key = std::getenv(api_key_env_.c_str());
            if (!key)
                throw Error(ErrorKind::ExecutionError,
                            "api key env '" + api_key_env_ + "' is not set");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res)
            throw Error(ErrorKind::ExecutionError,
                        "transport failure contacting " + base_url_);
        if (res->status != 200)
            throw Error(ErrorKind::ExecutionError,
                        base_url_ + " returned status " + std::to_string(res->status));
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("text") || !j["text"].is_string())
            throw Error(ErrorKind::ExecutionError, "malformed completion payload");
        return {j["text"].get<std::string>(), base_url_};
    }

private:
    std::string base_url_;
    std::string api_key_env_;
    std::string path_;
};

}  // namespace agp
