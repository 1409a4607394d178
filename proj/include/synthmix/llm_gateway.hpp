#pragma once

#include "synthmix/error.hpp"
#include "synthmix/promptgen.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

namespace synthmix {

struct GenerationConfig {
    std::string model_name = "gpt-3.5-turbo";
    double temperature = 0.7;
    std::optional<int> max_output_tokens;
    std::chrono::milliseconds request_timeout{60'000};
    int max_retries = 3;

    void validate() const;
};

struct CompletionResult {
    std::string raw_text;
    std::string model_name;
    std::string request_fingerprint;
    bool cached = false;
};

/// 429, 5xx, timeouts, dropped connections. Retried by the gateway.
class TransientBackendError : public Error {
public:
    using Error::Error;
};

class AuthError : public Error {
public:
    using Error::Error;
};

class MalformedResponseError : public Error {
public:
    using Error::Error;
};

/// Non-retryable backend failure (4xx other than auth/429), or retries exhausted.
class BackendError : public Error {
public:
    using Error::Error;
};

/// One chat-completion round trip. Implementations throw the error types above.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string send(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce) = 0;
};

/// Hash of (model, messages, temperature, nonce) as lowercase hex SHA-256.
std::string request_fingerprint(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce);

struct GatewayOptions {
    /// One JSON file per fingerprint. Empty disables the disk cache; the
    /// in-memory cache is always on.
    std::filesystem::path cache_dir;
    int max_in_flight = 4;
    std::chrono::milliseconds base_backoff{1000};
    double backoff_jitter = 0.25;
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Cache, retry and in-flight limiting in front of a Backend. Thread-safe.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

    CompletionResult complete(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce = {});

    /// Backend attempts, including failed ones.
    std::uint64_t backend_calls() const noexcept { return backend_calls_.load(); }
    std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }
    std::uint64_t retries() const noexcept { return retries_.load(); }

private:
    std::optional<std::string> lookup(const std::string& fingerprint);
    void store(const std::string& fingerprint, const ChatPrompt& prompt, const GenerationConfig& config,
               std::string_view nonce, const std::string& raw);

    std::shared_ptr<Backend> backend_;
    GatewayOptions options_;
    std::counting_semaphore<1024> in_flight_;
    std::mutex cache_mutex_;
    std::map<std::string, std::string> memory_cache_;
    std::atomic<std::uint64_t> backend_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
    std::atomic<std::uint64_t> retries_{0};
};

/// Backend speaking the common chat-completions wire format over HTTP(S).
class HttpBackend final : public Backend {
public:
    /// base_url like "https://api.openai.com" or "http://127.0.0.1:8080".
    HttpBackend(std::string base_url, std::string api_key, std::string path = "/v1/chat/completions");

    /// Reads SYNTHMIX_BASE_URL (default https://api.openai.com) and SYNTHMIX_API_KEY.
    static std::shared_ptr<HttpBackend> from_env();

    std::string send(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::string path_;
};

/// Request body for the chat-completions wire format.
std::string chat_request_body(const ChatPrompt& prompt, const GenerationConfig& config);
/// choices[0].message.content, or MalformedResponseError.
std::string chat_response_text(std::string_view body);

} // namespace synthmix
