#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "uavicl/errors.hpp"
#include "uavicl/llm_backend.hpp"

namespace uavicl::icl {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("backend.base_url", "missing scheme in " + url);
    const auto slash = url.find('/', scheme + 3);
    SplitUrl s{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
    while (!s.path.empty() && s.path.back() == '/') s.path.pop_back();
    return s;
}

}  // namespace

void EndpointConfig::validate() const {
    if (base_url.empty()) throw ConfigError("backend.base_url", "required for the live backend");
    split_url(base_url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (base_url.rfind("https://", 0) == 0)
        throw ConfigError("backend.base_url", "https is unavailable in this build");
#endif
    if (model.empty()) throw ConfigError("backend.model", "required for the live backend");
    if (timeout_ms <= 0) throw ConfigError("backend.timeout_ms", "must be > 0");
    if (retries < 0) throw ConfigError("backend.retries", "must be >= 0");
    const char* key = std::getenv(api_key_env.c_str());
    if (!key || !*key) throw ConfigError("backend.api_key_env", api_key_env + " is not set");
}

HttpChatBackend::HttpChatBackend(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    api_key_ = std::getenv(cfg_.api_key_env.c_str());
}

BackendReply HttpChatBackend::complete(const ChatRequest& req) {
    const SplitUrl url = split_url(cfg_.base_url);
    const nlohmann::json body = {
        {"model", cfg_.model},
        {"messages", {{{"role", "system"}, {"content", req.system}}, {{"role", "user"}, {"content", req.user}}}},
        {"temperature", 0}};
    const std::string payload = body.dump();
    const auto secs = std::chrono::milliseconds(cfg_.timeout_ms);

    const auto t0 = std::chrono::steady_clock::now();
    std::string last_error;
    const int max_attempts = 1 + cfg_.retries;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        httplib::Client cli(url.origin);
        cli.set_connection_timeout(secs);
        cli.set_read_timeout(secs);
        cli.set_write_timeout(secs);
        cli.set_bearer_token_auth(api_key_);
        auto res = cli.Post(url.path + "/chat/completions", payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw BackendError(BackendErrorKind::auth, attempt,
                               "authentication rejected (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendError(BackendErrorKind::protocol, attempt, "HTTP " + std::to_string(res->status));
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        try {
            BackendReply r;
            r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            r.latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            r.attempts = attempt;
            return r;
        } catch (const nlohmann::json::exception&) {
            throw BackendError(BackendErrorKind::protocol, attempt, "response lacks choices[0].message.content");
        }
    }
    throw BackendError(BackendErrorKind::transport, max_attempts, last_error);
}

LlmReply query_backend(LlmBackend& backend, const TaskPrompt& prompt, int n_sensors) {
    const BackendReply r = backend.complete({prompt.system_text, prompt.user_text()});
    LlmReply out;
    out.raw_text = r.text;
    out.latency_ms = r.latency_ms;
    out.attempts = r.attempts;
    auto parsed = parse_schedule(r.text, n_sensors);
    out.parsed = std::move(parsed.schedule);
    out.parse_error = std::move(parsed.error);
    return out;
}

}  // namespace uavicl::icl
