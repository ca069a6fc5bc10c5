#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "zfdt/clients.hpp"
#include "zfdt/errors.hpp"

namespace zfdt {

using json = nlohmann::json;

InFlightLimiter::InFlightLimiter(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("max_in_flight must be at least 1");
}

void InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_use_ < capacity_; });
    ++in_use_;
    peak_ = std::max(peak_, in_use_);
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_use_;
    }
    cv_.notify_one();
}

int InFlightLimiter::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

class RemoteTransport {
public:
    explicit RemoteTransport(const RemoteConfig& config) : config_(config), limiter_(config.max_in_flight) {
        const auto scheme_end = config.base_url.find("://");
        if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + config.base_url);
        const auto path_start = config.base_url.find('/', scheme_end + 3);
        host_ = config.base_url.substr(0, path_start);
        if (path_start != std::string::npos) prefix_ = config.base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        if (config.attempts < 1) throw ConfigError("attempts must be at least 1");
    }

    json post(const std::string& path, const json& body) {
        httplib::Headers headers;
        if (!config_.api_key_env.empty()) {
            if (const char* token = std::getenv(config_.api_key_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + token);
            }
        }
        const std::string payload = body.dump();
        std::string last_error;
        bool rate_limited = false;
        for (int attempt = 0; attempt < config_.attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
            }
            httplib::Client client(host_);
            client.set_connection_timeout(config_.timeout_s, 0);
            client.set_read_timeout(config_.timeout_s, 0);
            client.set_write_timeout(config_.timeout_s, 0);
            limiter_.acquire();
            auto res = client.Post(prefix_ + path, headers, payload, "application/json");
            limiter_.release();
            if (!res) {
                last_error = "POST " + path + " failed: " + httplib::to_string(res.error());
                rate_limited = false;
                continue;
            }
            if (res->status == 429) {
                last_error = "POST " + path + " rate limited";
                rate_limited = true;
                continue;
            }
            rate_limited = false;
            if (res->status >= 500) {
                last_error = "POST " + path + " returned HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                throw ClientError("POST " + path + " returned HTTP " + std::to_string(res->status), attempt + 1);
            }
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                last_error = "POST " + path + " returned invalid JSON: " + e.what();
            }
        }
        if (rate_limited) throw RetryableError(last_error, config_.attempts);
        throw ClientError(last_error, config_.attempts);
    }

    int peak() const { return limiter_.peak(); }

private:
    RemoteConfig config_;
    InFlightLimiter limiter_;
    std::string host_;
    std::string prefix_;
};

RemoteGenerator::RemoteGenerator(RemoteConfig config)
    : config_(std::move(config)), transport_(std::make_unique<RemoteTransport>(config_)) {}

RemoteGenerator::~RemoteGenerator() = default;

int RemoteGenerator::peak_in_flight() const { return transport_->peak(); }

std::string RemoteGenerator::generate_impl(std::string_view prompt, const GenerationParams& params) const {
    json body = {
        {"model", config_.model},
        {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
        {"temperature", params.temperature},
        {"max_tokens", params.max_output_tokens},
    };
    const json reply = transport_->post("/chat/completions", body);
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string() || content.get_ref<const std::string&>().empty()) {
            throw ClientError("chat completion returned no text", 1);
        }
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ClientError(std::string("malformed chat completion: ") + e.what(), 1);
    }
}

RemoteEncoder::RemoteEncoder(RemoteConfig config)
    : config_(std::move(config)), transport_(std::make_unique<RemoteTransport>(config_)) {
    if (config_.dimension == 0) throw ConfigError("remote encoder needs a positive dimension");
}

RemoteEncoder::~RemoteEncoder() = default;

std::vector<double> RemoteEncoder::encode_impl(std::string_view text) const {
    const json reply = transport_->post("/embeddings", {{"model", config_.embedding_model}, {"input", std::string(text)}});
    try {
        return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ClientError(std::string("malformed embedding response: ") + e.what(), 1);
    }
}

}  // namespace zfdt
