#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>

namespace medrag {

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{5000};

    /// Delay before retry number `attempt` (1-based).
    [[nodiscard]] std::chrono::milliseconds backoff(int attempt) const;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Minimal JSON-over-HTTP POST client. `url` is `http[s]://host[:port]/path`.
class HttpJsonClient {
public:
    HttpJsonClient(std::string url, std::chrono::milliseconds timeout, RetryPolicy retry = {});

    /// Posts `body` and returns the first non-retryable response. Connection
    /// failures, 429 and 5xx are retried with exponential backoff; once
    /// retries are exhausted a TransportError is thrown.
    HttpResponse post(const std::string& body, const std::map<std::string, std::string>& headers = {}) const;

    /// Replaces the sleep used between retries (tests use a no-op).
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

    [[nodiscard]] const std::string& url() const { return url_; }

private:
    std::string url_;
    std::string scheme_host_port_;
    std::string path_;
    std::chrono::milliseconds timeout_;
    RetryPolicy retry_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
};

/// Value of an environment variable, or empty when unset.
std::string env_or_empty(const std::string& name);

}  // namespace medrag
