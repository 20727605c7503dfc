#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dcc/prompting.hpp"

namespace dcc {

struct SamplingParams {
    double temperature = 0.6;
    double top_p = 0.95;
    int max_new_tokens = 1024;
    int n = 1;  // completions per request
    std::optional<uint64_t> seed;
};

// Identifies a request for seed derivation and mock lookup. `step` is 0
// except in the separate-trace mode, where it indexes the three calls.
struct RequestTag {
    std::string instance_id;
    int attempt = 0;
    int step = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    // Returns exactly params.n completion strings, byte-exact as produced.
    // Throws Transport/BackendRejected/Timeout.
    virtual std::vector<std::string> complete(const MessageList& messages,
                                              const SamplingParams& params,
                                              const RequestTag& tag) = 0;
    virtual std::string name() const = 0;
    // True when identical inputs always yield identical outputs (mock); used
    // to decide whether wall-clock fields may enter the manifest.
    virtual bool deterministic() const = 0;
};

// Scripted completions keyed by (instance_id, attempt, step), with step 0 as
// the plain (instance_id, attempt) form. Lookup is total: misses fall back to
// default_completion, so any call schedule yields the same per-call outputs.
struct MockScript {
    std::map<std::tuple<std::string, int, int>, std::string> responses;
    std::string default_completion;
    uint64_t seed = 0;

    void set(const std::string& instance_id, int attempt, std::string completion, int step = 0);
    const std::string& lookup(const std::string& instance_id, int attempt, int step = 0) const;
};

MockScript mock_script_from_json(const nlohmann::json& j);
nlohmann::json mock_script_to_json(const MockScript& script);
MockScript load_mock_script(const std::string& path);

// Pure scripted lookup.
std::string mock_complete(const std::string& instance_id, int attempt_index,
                          const MockScript& script, int step = 0);

class MockBackend : public Backend {
public:
    explicit MockBackend(MockScript script) : script_(std::move(script)) {}
    std::vector<std::string> complete(const MessageList& messages, const SamplingParams& params,
                                      const RequestTag& tag) override;
    std::string name() const override { return "mock"; }
    bool deterministic() const override { return true; }

private:
    MockScript script_;
};

struct HttpBackendConfig {
    std::string api_base;  // e.g. "http://localhost:8000/v1"
    std::string api_key;   // optional bearer token
    std::string model;
    int timeout_s = 120;
    int retry_budget = 3;     // total tries, including the first
    int max_inflight = 8;     // concurrent outstanding requests
    int backoff_base_ms = 250;
    int backoff_cap_ms = 4000;
};

// Sink for verbatim wire logging; receives one JSON object per HTTP exchange
// (request, response, status, retries used).
using WireLogSink = std::function<void(const nlohmann::json&)>;

// Chat-completions client. POSTs {model, messages, temperature, top_p,
// max_tokens, n, seed?} and reads choices[i].message.content. 429 and 5xx
// responses and transport failures retry with capped exponential backoff up
// to the budget; other 4xx fail immediately as BackendRejected with the body
// captured. Safe to share across workers; a counting semaphore bounds
// in-flight requests at max_inflight.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config, WireLogSink sink = nullptr);
    ~HttpBackend() override;
    std::vector<std::string> complete(const MessageList& messages, const SamplingParams& params,
                                      const RequestTag& tag) override;
    std::string name() const override { return "http"; }
    bool deterministic() const override { return false; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

nlohmann::json messages_to_json(const MessageList& messages);

}  // namespace dcc
