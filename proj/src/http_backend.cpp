#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "synthmix/llm_gateway.hpp"

#include <cstdlib>

namespace synthmix {

HttpBackend::HttpBackend(std::string base_url, std::string api_key, std::string path)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), path_(std::move(path)) {
    if (base_url_.empty()) throw ConfigError("HTTP backend needs a base URL");
    if (path_.empty() || path_.front() != '/') throw ConfigError("HTTP backend path must start with '/'");
}

std::shared_ptr<HttpBackend> HttpBackend::from_env() {
    const char* url = std::getenv("SYNTHMIX_BASE_URL");
    const char* key = std::getenv("SYNTHMIX_API_KEY");
    if (!key || !*key) throw ConfigError("SYNTHMIX_API_KEY is not set");
    const char* path = std::getenv("SYNTHMIX_CHAT_PATH");
    return std::make_shared<HttpBackend>(url && *url ? url : "https://api.openai.com", key,
                                         path && *path ? path : "/v1/chat/completions");
}

std::string HttpBackend::send(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view) {
    httplib::Client client(base_url_);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config.request_timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_, headers, chat_request_body(prompt, config), "application/json");
    if (!res) throw TransientBackendError("request failed: " + httplib::to_string(res.error()));

    const int status = res->status;
    if (status == 401 || status == 403) throw AuthError("backend rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 429 || status >= 500) throw TransientBackendError("HTTP " + std::to_string(status));
    if (status != 200) throw BackendError("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    return chat_response_text(res->body);
}

} // namespace synthmix
