#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "uavicl/icl.hpp"

namespace uavicl::icl {

struct ChatRequest {
    std::string system;
    std::string user;
};

struct BackendReply {
    std::string text;
    double latency_ms = 0.0;
    int attempts = 1;
};

enum class BackendErrorKind { transport, auth, protocol };

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorKind kind, int attempts, const std::string& what)
        : std::runtime_error(what), kind_(kind), attempts_(attempts) {}
    BackendErrorKind kind() const noexcept { return kind_; }
    int attempts() const noexcept { return attempts_; }

private:
    BackendErrorKind kind_;
    int attempts_;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string name() const = 0;
    // Returns the model's text or throws BackendError.
    virtual BackendReply complete(const ChatRequest& req) = 0;
};

struct MockConfig {
    double w_q = 0.6;
    double w_gamma = 0.4;
    // Restrict to above-threshold sensors whenever one exists before scoring.
    bool threshold_screen = true;
    // Reported latency is modelled so traces stay reproducible.
    double latency_base_ms = 0.0;
    double latency_per_kchar_ms = 0.0;
};

// Deterministic stand-in that reads the serialized prompt text only.
std::string mock_complete(const std::string& prompt_text, const MockConfig& cfg);

class MockBackend final : public LlmBackend {
public:
    explicit MockBackend(MockConfig cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "mock"; }
    BackendReply complete(const ChatRequest& req) override;

private:
    MockConfig cfg_;
};

struct EndpointConfig {
    std::string base_url;  // e.g. https://host/v1; /chat/completions is appended
    std::string model;
    int timeout_ms = 30000;
    int retries = 2;
    std::string api_key_env = "LLM_API_KEY";

    // Throws ConfigError; checks the key variable is set.
    void validate() const;
};

// Chat-completions client. Transport errors, 429 and 5xx are retried; 401/403
// raise auth errors immediately.
class HttpChatBackend final : public LlmBackend {
public:
    explicit HttpChatBackend(EndpointConfig cfg);
    std::string name() const override { return "http"; }
    BackendReply complete(const ChatRequest& req) override;

private:
    EndpointConfig cfg_;
    std::string api_key_;
};

struct LlmReply {
    std::string raw_text;
    std::optional<ParsedSchedule> parsed;
    std::string parse_error;
    double latency_ms = 0.0;
    int attempts = 1;
};

LlmReply query_backend(LlmBackend& backend, const TaskPrompt& prompt, int n_sensors);

}  // namespace uavicl::icl
