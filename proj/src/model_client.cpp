#include "dcc/model_client.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "dcc/errors.hpp"

namespace dcc {

void MockScript::set(const std::string& instance_id, int attempt, std::string completion, int step) {
    responses[{instance_id, attempt, step}] = std::move(completion);
}

const std::string& MockScript::lookup(const std::string& instance_id, int attempt, int step) const {
    auto it = responses.find({instance_id, attempt, step});
    return it == responses.end() ? default_completion : it->second;
}

MockScript mock_script_from_json(const nlohmann::json& j) {
    MockScript script;
    script.default_completion = j.value("default_completion", std::string{});
    script.seed = j.value("seed", uint64_t{0});
    if (j.contains("responses")) {
        for (const auto& r : j.at("responses")) {
            script.set(r.at("instance_id").get<std::string>(), r.value("attempt", 0),
                       r.at("completion").get<std::string>(), r.value("step", 0));
        }
    }
    return script;
}

nlohmann::json mock_script_to_json(const MockScript& script) {
    nlohmann::json j;
    j["default_completion"] = script.default_completion;
    j["seed"] = script.seed;
    j["responses"] = nlohmann::json::array();
    for (const auto& [key, completion] : script.responses) {
        const auto& [id, attempt, step] = key;
        nlohmann::json r{{"instance_id", id}, {"attempt", attempt}, {"completion", completion}};
        if (step != 0) r["step"] = step;
        j["responses"].push_back(std::move(r));
    }
    return j;
}

MockScript load_mock_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DccError(Errc::Io, "cannot open mock script " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DccError(Errc::FormatError, path + ": " + e.what());
    }
    return mock_script_from_json(j);
}

std::string mock_complete(const std::string& instance_id, int attempt_index,
                          const MockScript& script, int step) {
    return script.lookup(instance_id, attempt_index, step);
}

std::vector<std::string> MockBackend::complete(const MessageList& messages,
                                               const SamplingParams& params,
                                               const RequestTag& tag) {
    if (messages.empty()) throw DccError(Errc::EmptyPrompt, "empty message list");
    std::vector<std::string> out(static_cast<size_t>(params.n),
                                 script_.lookup(tag.instance_id, tag.attempt, tag.step));
    return out;
}

nlohmann::json messages_to_json(const MessageList& messages) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : messages) {
        arr.push_back(nlohmann::json{{"role", m.role}, {"content", m.content}});
    }
    return arr;
}

namespace {

// Splits "http://host:port/prefix" into origin and path prefix.
void split_api_base(const std::string& base, std::string* origin, std::string* prefix) {
    auto scheme_end = base.find("://");
    size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base.find('/', host_start);
    if (path_start == std::string::npos) {
        *origin = base;
        *prefix = "";
        return;
    }
    *origin = base.substr(0, path_start);
    *prefix = base.substr(path_start);
    while (!prefix->empty() && prefix->back() == '/') prefix->pop_back();
}

// Minimal counting semaphore; std::counting_semaphore's template max would
// fix the bound at compile time.
class Semaphore {
public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int count_;
};

}  // namespace

struct HttpBackend::Impl {
    HttpBackendConfig config;
    WireLogSink sink;
    std::string origin;
    std::string path;
    Semaphore inflight;
    std::mutex sink_mu;

    Impl(HttpBackendConfig cfg, WireLogSink s)
        : config(std::move(cfg)), sink(std::move(s)), inflight(std::max(1, config.max_inflight)) {
        split_api_base(config.api_base, &origin, &path);
        path += "/chat/completions";
    }

    void log(const nlohmann::json& event) {
        if (!sink) return;
        std::lock_guard lock(sink_mu);
        sink(event);
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config, WireLogSink sink)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(sink))) {
    if (impl_->config.api_base.empty()) {
        throw DccError(Errc::Config, "http backend requires an api base url");
    }
}

HttpBackend::~HttpBackend() = default;

std::vector<std::string> HttpBackend::complete(const MessageList& messages,
                                               const SamplingParams& params,
                                               const RequestTag& tag) {
    if (messages.empty()) throw DccError(Errc::EmptyPrompt, "empty message list");

    nlohmann::json request{{"model", impl_->config.model},
                           {"messages", messages_to_json(messages)},
                           {"temperature", params.temperature},
                           {"top_p", params.top_p},
                           {"max_tokens", params.max_new_tokens},
                           {"n", params.n}};
    if (params.seed) request["seed"] = *params.seed;
    const std::string body = request.dump();

    impl_->inflight.acquire();
    struct Release {
        Semaphore& sem;
        ~Release() { sem.release(); }
    } release{impl_->inflight};

    const int budget = std::max(1, impl_->config.retry_budget);
    std::string last_error;
    bool timed_out = false;
    for (int attempt = 0; attempt < budget; ++attempt) {
        if (attempt > 0) {
            int delay = impl_->config.backoff_base_ms << (attempt - 1);
            delay = std::min(delay, impl_->config.backoff_cap_ms);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        // One client per call: httplib clients are not safe for concurrent use.
        httplib::Client client(impl_->origin);
        client.set_connection_timeout(impl_->config.timeout_s, 0);
        client.set_read_timeout(impl_->config.timeout_s, 0);
        client.set_write_timeout(impl_->config.timeout_s, 0);
        httplib::Headers headers;
        if (!impl_->config.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + impl_->config.api_key);
        }
        auto res = client.Post(impl_->path, headers, body, "application/json");
        if (!res) {
            timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                        res.error() == httplib::Error::Read || res.error() == httplib::Error::Write;
            last_error = httplib::to_string(res.error());
            continue;
        }
        timed_out = false;
        if (res->status == 429 || res->status >= 500) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400) {
            impl_->log({{"event", "http_call"},
                        {"instance_id", tag.instance_id},
                        {"attempt", tag.attempt},
                        {"step", tag.step},
                        {"status", res->status},
                        {"retries", attempt},
                        {"request", request},
                        {"response_body", res->body}});
            throw DccError(Errc::BackendRejected,
                           "status " + std::to_string(res->status) + ": " + res->body);
        }
        nlohmann::json response;
        try {
            response = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("unparseable response body: ") + e.what();
            continue;
        }
        std::vector<std::string> completions;
        if (response.contains("choices")) {
            for (const auto& choice : response["choices"]) {
                if (choice.contains("message") && choice["message"].contains("content")) {
                    completions.push_back(choice["message"]["content"].get<std::string>());
                }
            }
        }
        if (static_cast<int>(completions.size()) != params.n) {
            last_error = "expected " + std::to_string(params.n) + " choices, got " +
                         std::to_string(completions.size());
            continue;
        }
        impl_->log({{"event", "http_call"},
                    {"instance_id", tag.instance_id},
                    {"attempt", tag.attempt},
                    {"step", tag.step},
                    {"status", res->status},
                    {"retries", attempt},
                    {"request", request},
                    {"response", response}});
        return completions;
    }
    impl_->log({{"event", "http_failure"},
                {"instance_id", tag.instance_id},
                {"attempt", tag.attempt},
                {"step", tag.step},
                {"retries", budget - 1},
                {"error", last_error}});
    if (timed_out) {
        throw DccError(Errc::Timeout, "request timed out after " + std::to_string(budget) +
                                          " tries: " + last_error);
    }
    throw DccError(Errc::Transport,
                   "request failed after " + std::to_string(budget) + " tries: " + last_error);
}

}  // namespace dcc
