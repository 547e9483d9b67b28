#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drivekit::chat {

enum class Role { system, user, assistant };

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::string model_name;
    double temperature = 0.0;
    std::vector<Message> messages;
    int max_tokens = 1024;

    bool operator==(const ChatRequest&) const = default;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string finish_reason;
    Usage usage;
    bool from_cache = false;
    int retries = 0;
};

/// Where and how to send requests. The bearer token is read from the
/// environment variable named by `auth_env` at call time, never stored.
struct EndpointConfig {
    std::string url = "https://api.openai.com/v1/chat/completions";
    std::string auth_env = "DRIVEKIT_API_KEY";
    std::filesystem::path cache_dir;  // empty: in-memory cache only
    int max_attempts = 5;
    std::chrono::milliseconds backoff{500};  // doubles after each retry
    std::chrono::milliseconds timeout{120000};
    std::size_t parallelism = 4;  // in-flight request permits
};

const char* to_string(Role role);

/// Throws ValidationError when messages are empty or temperature is negative.
void validate(const ChatRequest& request);

/// JSON chat-completion body: {"model", "temperature", "max_tokens", "messages": [{"role", "content"}]}.
std::string request_body(const ChatRequest& request);

/// Hex SHA-256 over the canonical (sorted-key) JSON of model, temperature,
/// max_tokens and messages.
std::string cache_key(const ChatRequest& request);

/// Reads choices[0].message.content, choices[0].finish_reason and usage.
/// Throws DecodeError.
ChatResponse decode_response(std::string_view body);

struct HttpResult {
    int status = 0;
    std::string body;
};

/// One POST. Returns nullopt on a transport-level failure (connect, timeout).
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::optional<HttpResult> post(const std::string& url, const std::string& body,
                                           const std::vector<std::pair<std::string, std::string>>& headers,
                                           std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<Transport> make_http_transport();

/// Counting semaphore with a runtime permit count.
class Permits {
public:
    explicit Permits(std::size_t count) : available_(count == 0 ? 1 : count) {}
    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t available_;
};

/// Chat-completion client with a content-addressed response cache and
/// bounded retries. Safe to share across threads.
class ChatClient {
public:
    explicit ChatClient(EndpointConfig config, std::shared_ptr<Transport> transport = make_http_transport());

    /// Cache hit: returns the stored response without touching the network.
    /// Miss: sends the request (retrying transport errors and 429/503 with
    /// exponential backoff), stores the success, returns it.
    ChatResponse complete(const ChatRequest& request);

    const EndpointConfig& config() const noexcept { return config_; }
    std::size_t network_calls() const noexcept { return network_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

private:
    std::optional<ChatResponse> load_cached(const std::string& key);
    void store(const std::string& key, const ChatRequest& request, const ChatResponse& response);
    ChatResponse send(const ChatRequest& request);
    std::shared_ptr<std::mutex> key_lock(const std::string& key);

    EndpointConfig config_;
    std::shared_ptr<Transport> transport_;
    Permits permits_;
    std::atomic<std::size_t> network_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
    std::mutex memory_mutex_;
    std::map<std::string, ChatResponse> memory_cache_;
};

}  // namespace drivekit::chat
