#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "medrag/http.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "medrag/errors.hpp"

namespace medrag {

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 1; i < attempt; ++i) ms *= multiplier;
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
}

HttpJsonClient::HttpJsonClient(std::string url, std::chrono::milliseconds timeout, RetryPolicy retry)
    : url_(std::move(url)), timeout_(timeout), retry_(retry), sleeper_([](auto d) { std::this_thread::sleep_for(d); }) {
    auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL needs a scheme: " + url_);
    }
    auto path_start = url_.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = url_;
        path_ = "/";
    } else {
        scheme_host_port_ = url_.substr(0, path_start);
        path_ = url_.substr(path_start);
    }
}

HttpResponse HttpJsonClient::post(const std::string& body, const std::map<std::string, std::string>& headers) const {
    httplib::Client client(scheme_host_port_);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    std::string last_error;
    for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(retry_.backoff(attempt));
        auto res = client.Post(path_, hdrs, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        return {res->status, res->body};
    }
    throw TransportError("POST " + url_ + " failed after " + std::to_string(retry_.max_retries + 1) +
                         " attempts: " + last_error);
}

std::string env_or_empty(const std::string& name) {
    if (name.empty()) return {};
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string{};
}

}  // namespace medrag
