#include "synthmix/llm_gateway.hpp"

#include "synthmix/hash.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <thread>

namespace synthmix {

using nlohmann::json;

namespace {

json messages_json(const ChatPrompt& prompt) {
    return json::array({{{"role", "system"}, {"content", prompt.system_message}},
                        {{"role", "user"}, {"content", prompt.user_message}}});
}

// Releases a semaphore slot on scope exit.
class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<1024>& sem_;
};

} // namespace

void GenerationConfig::validate() const {
    if (model_name.empty()) throw ConfigError("model_name must be non-empty");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (max_output_tokens && *max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
}

std::string request_fingerprint(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce) {
    json key;
    key["model"] = config.model_name;
    key["messages"] = messages_json(prompt);
    key["temperature"] = config.temperature;
    key["nonce"] = nonce;
    return hash::sha256_hex(key.dump());
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)),
      in_flight_(std::max(1, std::min(options_.max_in_flight, 1024))) {
    if (!backend_) throw ConfigError("gateway needs a backend");
    if (options_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (!options_.cache_dir.empty()) std::filesystem::create_directories(options_.cache_dir);
}

std::optional<std::string> Gateway::lookup(const std::string& fp) {
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = memory_cache_.find(fp); it != memory_cache_.end()) return it->second;
    }
    if (options_.cache_dir.empty()) return std::nullopt;
    const auto path = options_.cache_dir / (fp + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    json doc = json::parse(jsonio::read_file(path), nullptr, false);
    if (doc.is_discarded()) return std::nullopt; // torn write from a killed run; refetch
    auto raw = doc["response"]["raw_text"].get<std::string>();
    std::lock_guard lock(cache_mutex_);
    memory_cache_.emplace(fp, raw);
    return raw;
}

void Gateway::store(const std::string& fp, const ChatPrompt& prompt, const GenerationConfig& config,
                    std::string_view nonce, const std::string& raw) {
    {
        std::lock_guard lock(cache_mutex_);
        memory_cache_.insert_or_assign(fp, raw);
    }
    if (options_.cache_dir.empty()) return;
    json doc;
    doc["request"] = {{"model", config.model_name},
                      {"messages", messages_json(prompt)},
                      {"temperature", config.temperature},
                      {"nonce", nonce}};
    doc["response"] = {{"raw_text", raw}, {"model", config.model_name}};
    jsonio::write_file_atomic(options_.cache_dir / (fp + ".json"), doc.dump(2) + "\n");
}

CompletionResult Gateway::complete(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce) {
    config.validate();
    CompletionResult result;
    result.model_name = config.model_name;
    result.request_fingerprint = request_fingerprint(prompt, config, nonce);

    if (auto hit = lookup(result.request_fingerprint)) {
        ++cache_hits_;
        result.raw_text = std::move(*hit);
        result.cached = true;
        return result;
    }

    Rng jitter(hash::sha256_u64(result.request_fingerprint));
    for (int attempt = 0;; ++attempt) {
        try {
            std::string raw;
            {
                SlotGuard slot(in_flight_);
                ++backend_calls_;
                raw = backend_->send(prompt, config, nonce);
            }
            store(result.request_fingerprint, prompt, config, nonce, raw);
            result.raw_text = std::move(raw);
            return result;
        } catch (const TransientBackendError& e) {
            if (attempt >= config.max_retries)
                throw BackendError("gave up after " + std::to_string(attempt + 1) + " attempts: " + e.what());
            ++retries_;
            const double scale = std::ldexp(1.0, attempt) * (1.0 + options_.backoff_jitter * (2.0 * jitter.uniform01() - 1.0));
            options_.sleep(std::chrono::milliseconds(
                static_cast<std::int64_t>(std::llround(static_cast<double>(options_.base_backoff.count()) * scale))));
        }
    }
}

std::string chat_request_body(const ChatPrompt& prompt, const GenerationConfig& config) {
    json body;
    body["model"] = config.model_name;
    body["messages"] = messages_json(prompt);
    body["temperature"] = config.temperature;
    if (config.max_output_tokens) body["max_tokens"] = *config.max_output_tokens;
    return body.dump();
}

std::string chat_response_text(std::string_view body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw MalformedResponseError("backend response is not JSON");
    try {
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw MalformedResponseError("choices[0].message.content is not a string");
        return content.get<std::string>();
    } catch (const json::exception&) {
        throw MalformedResponseError("backend response lacks choices[0].message.content");
    }
}

} // namespace synthmix
