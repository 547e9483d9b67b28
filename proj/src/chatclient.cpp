#include "drivekit/chatclient.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"

namespace drivekit::chat {

using json = nlohmann::json;

const char* to_string(Role role) {
    switch (role) {
        case Role::system:
            return "system";
        case Role::user:
            return "user";
        case Role::assistant:
            break;
    }
    return "assistant";
}

void validate(const ChatRequest& request) {
    if (request.messages.empty()) throw ValidationError(request.model_name, "chat request has no messages");
    if (!(request.temperature >= 0.0)) throw ValidationError(request.model_name, "temperature must be >= 0");
}

namespace {

json messages_json(const ChatRequest& request) {
    json out = json::array();
    for (const auto& m : request.messages) out.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return out;
}

bool retryable_status(int status) {
    return status == 429 || status == 503;
}

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint url needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpTransport final : public Transport {
public:
    std::optional<HttpResult> post(const std::string& url, const std::string& body,
                                   const std::vector<std::pair<std::string, std::string>>& headers,
                                   std::chrono::milliseconds timeout) override {
        const auto parts = split_url(url);
        httplib::Client client(parts.origin);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(parts.path, h, body, "application/json");
        if (!res) return std::nullopt;
        return HttpResult{res->status, res->body};
    }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() {
    return std::make_shared<HttpTransport>();
}

std::string request_body(const ChatRequest& request) {
    return json{
        {"model", request.model_name},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
        {"messages", messages_json(request)},
    }
        .dump();
}

std::string cache_key(const ChatRequest& request) {
    // json objects keep keys sorted, so dump() is canonical.
    return io::sha256_hex(request_body(request));
}

ChatResponse decode_response(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DecodeError("response body is not a JSON object");
    try {
        const auto& choices = j.at("choices");
        if (!choices.is_array() || choices.empty()) throw DecodeError("response has no choices");
        const auto& choice = choices.at(0);
        ChatResponse out;
        out.finish_reason = choice.value("finish_reason", std::string{});
        const auto& message = choice.at("message");
        auto content = message.find("content");
        if (content == message.end() || !content->is_string()) throw DecodeError("choice has no text content");
        out.text = content->get<std::string>();
        if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
            out.usage.prompt_tokens = usage->value("prompt_tokens", 0L);
            out.usage.completion_tokens = usage->value("completion_tokens", 0L);
            out.usage.total_tokens = usage->value("total_tokens", 0L);
        }
        return out;
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed response: ") + e.what());
    }
}

void Permits::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
}

void Permits::release() {
    {
        std::lock_guard lock(mutex_);
        ++available_;
    }
    cv_.notify_one();
}

ChatClient::ChatClient(EndpointConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), permits_(config_.parallelism) {
    if (config_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (!config_.cache_dir.empty()) std::filesystem::create_directories(config_.cache_dir);
}

std::shared_ptr<std::mutex> ChatClient::key_lock(const std::string& key) {
    std::lock_guard guard(locks_mutex_);
    auto& slot = key_locks_[key];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

std::optional<ChatResponse> ChatClient::load_cached(const std::string& key) {
    if (config_.cache_dir.empty()) {
        std::lock_guard guard(memory_mutex_);
        auto it = memory_cache_.find(key);
        if (it == memory_cache_.end()) return std::nullopt;
        return it->second;
    }
    const auto path = config_.cache_dir / (key + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    json entry = json::parse(io::read_file(path), nullptr, false);
    // A torn or foreign file is a miss; the next success overwrites it.
    if (entry.is_discarded() || !entry.contains("response")) return std::nullopt;
    const auto& r = entry["response"];
    ChatResponse out;
    out.text = r.value("text", std::string{});
    out.finish_reason = r.value("finish_reason", std::string{});
    out.usage.prompt_tokens = r.value("prompt_tokens", 0L);
    out.usage.completion_tokens = r.value("completion_tokens", 0L);
    out.usage.total_tokens = r.value("total_tokens", 0L);
    return out;
}

void ChatClient::store(const std::string& key, const ChatRequest& request, const ChatResponse& response) {
    if (config_.cache_dir.empty()) {
        std::lock_guard guard(memory_mutex_);
        memory_cache_.emplace(key, response);
        return;
    }
    json entry = {
        {"key", key},
        {"request", json::parse(request_body(request))},
        {"response",
         {
             {"text", response.text},
             {"finish_reason", response.finish_reason},
             {"prompt_tokens", response.usage.prompt_tokens},
             {"completion_tokens", response.usage.completion_tokens},
             {"total_tokens", response.usage.total_tokens},
         }},
    };
    io::write_file_atomic(config_.cache_dir / (key + ".json"), entry.dump(2) + "\n");
}

ChatResponse ChatClient::send(const ChatRequest& request) {
    std::vector<std::pair<std::string, std::string>> headers;
    if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token) {
        headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }
    const std::string body = request_body(request);

    std::optional<HttpResult> last;
    auto delay = config_.backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        permits_.acquire();
        ++network_calls_;
        try {
            last = transport_->post(config_.url, body, headers, config_.timeout);
        } catch (...) {
            permits_.release();
            throw;
        }
        permits_.release();

        if (last && last->status >= 200 && last->status < 300) {
            ChatResponse response = decode_response(last->body);
            response.retries = attempt - 1;
            return response;
        }
        if (last && !retryable_status(last->status)) throw ServiceError(last->status, last->body);
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
    if (!last) {
        throw TransportError("no response from " + config_.url + " after " + std::to_string(config_.max_attempts) +
                             " attempts");
    }
    throw ServiceError(last->status, last->body);
}

ChatResponse ChatClient::complete(const ChatRequest& request) {
    validate(request);
    const std::string key = cache_key(request);
    auto lock_ptr = key_lock(key);
    std::lock_guard guard(*lock_ptr);
    if (auto cached = load_cached(key)) {
        ++cache_hits_;
        cached->from_cache = true;
        return *cached;
    }
    ChatResponse response = send(request);
    store(key, request, response);
    return response;
}

}  // namespace drivekit::chat
