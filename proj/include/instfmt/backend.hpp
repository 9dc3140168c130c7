#pragma once

// Clients for external model endpoints speaking the OpenAI-style completions
// schema. One client serves both roles: sampling completions for format
// transfer, and scoring a fixed continuation (echo + logprobs) for
// perplexity. Requests pass through a content-addressed cache, a sliding
// window rate limiter and an in-flight bound before reaching a Transport.

#include "instfmt/clock.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace instfmt {

using json = nlohmann::json;

inline constexpr std::size_t kDefaultMaxTokens = 1024;

struct CompletionRequest {
    std::string prompt;
    std::size_t max_tokens = kDefaultMaxTokens;
    double temperature = 1.0;
    std::size_t n = 1;
    std::vector<std::string> stop;
    std::optional<std::uint64_t> seed;
    std::string request_id;

    void validate() const;
};

struct ScoreRequest {
    std::string prefix;
    std::string continuation;
    std::string request_id;

    void validate() const;
};

struct ScoreResponse {
    std::vector<double> token_logprobs;
    std::vector<std::string> token_texts;
    /// Set when the tokenizer merged text across the prefix/continuation
    /// boundary, so token_texts do not concatenate to the continuation.
    bool boundary_adjusted = false;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    /// Exactly request.n texts, each cut at the first stop sequence.
    virtual std::vector<std::string> complete(const CompletionRequest& request) = 0;
};

class ScoreBackend {
public:
    virtual ~ScoreBackend() = default;
    virtual ScoreResponse score(const ScoreRequest& request) = 0;
};

/// Cut `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string text, const std::vector<std::string>& stop);

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
    int status = 0;  // 0: no response (connection failure, timeout)
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(std::string_view path, const std::string& body) = 0;
    /// Identifies the endpoint in cache keys.
    virtual std::string endpoint() const = 0;
};

/// HTTP(S) transport. `base_url` like "https://api.openai.com/v1".
std::shared_ptr<Transport> make_http_transport(const std::string& base_url,
                                               const std::string& bearer_token,
                                               double timeout_seconds);

enum class MockCompletionMode {
    Seeded,  // pick one of the prompt's demonstration targets by hash(prompt, seed)
    Echo,    // return the final source text of the transfer prompt
    Fixed,   // return mock_text (or a scripted per-prompt text)
};

enum class MockScoreMode {
    Hashed,   // deterministic pseudo-random logprob per token
    Uniform,  // every token gets mock_logprob
};

struct MockOptions {
    MockCompletionMode completion = MockCompletionMode::Seeded;
    MockScoreMode scoring = MockScoreMode::Hashed;
    double uniform_logprob = -0.6931471805599453;  // ln 0.5
    std::string fixed_text;
    /// sha256(prompt) -> completion, consulted before `completion` mode.
    std::map<std::string, std::string> scripted;
    /// One in `garbage_every` seeded completions is unparseable (0 disables).
    unsigned garbage_every = 6;
};

/// In-process endpoint answering with completions-schema JSON. Tokenizes on
/// whitespace boundaries: each token is a run of spaces followed by a run of
/// non-space bytes.
class MockTransport : public Transport {
public:
    explicit MockTransport(MockOptions opts = {}, std::string name = "mock://default");

    HttpResponse post(std::string_view path, const std::string& body) override;
    std::string endpoint() const override { return name_; }

    std::size_t calls() const noexcept { return calls_.load(); }

    static std::vector<std::string> tokenize(std::string_view text);

private:
    std::string complete_one(const std::string& prompt, std::uint64_t seed) const;
    MockOptions opts_;
    std::string name_;
    std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Dispatch controls

/// At most `rate` dispatches in any half-open one-second window.
class RateLimiter {
public:
    RateLimiter(double rate_per_second, Clock& clock);
    void acquire();
    /// Dispatch times recorded so far (test hook).
    std::vector<Clock::time_point> history() const;

private:
    std::size_t rate_;
    Clock& clock_;
    mutable std::mutex mu_;
    std::deque<Clock::time_point> window_;
    std::vector<Clock::time_point> history_;
};

class InFlightLimiter {
public:
    explicit InFlightLimiter(std::size_t limit);

    class Guard {
    public:
        explicit Guard(InFlightLimiter& l);
        ~Guard();
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        InFlightLimiter& l_;
    };

    std::size_t max_observed() const;

private:
    std::size_t limit_;
    std::size_t active_ = 0;
    std::size_t max_observed_ = 0;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

struct RetryPolicy {
    unsigned max_attempts = 5;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};

    std::chrono::milliseconds backoff(unsigned retry_number) const;  // 1-based
};

// ---------------------------------------------------------------------------
// Cache

/// Content-addressed response store: <dir>/objects/<k[0:2]>/<k>.json plus an
/// append-only <dir>/manifest.jsonl. Concurrent readers, serialized writers.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& key);
    void put(const std::string& key, std::string_view kind, const std::string& endpoint,
             const json& request, const std::string& response_body);

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path object_path(const std::string& key) const;
    std::filesystem::path dir_;
    std::shared_mutex mu_;
    std::unordered_map<std::string, std::string> memo_;
};

// ---------------------------------------------------------------------------
// Client

struct EndpointConfig {
    std::string kind = "mock";  // "http" or "mock"
    std::string base_url;
    std::string api_key_env;
    std::string model = "mock";
    double rate_limit = 0.0;  // requests per second, 0 = unlimited
    std::size_t max_in_flight = 4;
    RetryPolicy retry;
    double timeout_seconds = 120.0;
    bool supports_logprobs = true;
    MockOptions mock;

    static EndpointConfig from_json(const json& j);
};

struct ClientStats {
    std::size_t network_requests = 0;  // transport calls, retries included
    std::size_t cache_hits = 0;
    std::size_t retries = 0;
};

class EndpointClient : public CompletionBackend, public ScoreBackend {
public:
    EndpointClient(EndpointConfig config, std::shared_ptr<Transport> transport,
                   std::shared_ptr<ResponseCache> cache = nullptr, Clock* clock = nullptr);

    std::vector<std::string> complete(const CompletionRequest& request) override;
    ScoreResponse score(const ScoreRequest& request) override;

    ClientStats stats() const;
    std::size_t max_in_flight_observed() const { return in_flight_.max_observed(); }
    const RateLimiter* rate_limiter() const { return limiter_.get(); }

private:
    std::string call(std::string_view path, std::string_view kind, const json& body,
                     const std::string& request_id);
    std::string next_request_id(std::string_view kind);

    EndpointConfig config_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<ResponseCache> cache_;
    Clock& clock_;
    std::unique_ptr<RateLimiter> limiter_;
    InFlightLimiter in_flight_;
    std::atomic<std::size_t> network_{0}, hits_{0}, retries_{0}, ids_{0};
};

/// Completion and scoring endpoints of one named backend profile.
struct BackendProfile {
    std::string name;
    EndpointConfig completion;
    EndpointConfig scoring;
};

/// Built-in profiles: "mock" (seeded completions, hashed scores) and
/// "mock-echo" (echo completions, uniform ln 0.5 scores).
std::map<std::string, BackendProfile> builtin_profiles();

/// Parse {"profiles": {name: {"completion": {...}, "scoring": {...}}}}.
/// Built-ins are included unless overridden.
std::map<std::string, BackendProfile> load_profiles(const json& config);

struct Backends {
    std::shared_ptr<EndpointClient> completion;
    std::shared_ptr<EndpointClient> scoring;
    std::shared_ptr<Transport> completion_transport;
    std::shared_ptr<Transport> scoring_transport;
};

/// Build clients for a profile. Throws CapabilityError when the scoring
/// endpoint does not support echo logprobs, before any request is made.
/// `max_in_flight` overrides both endpoints' bound when nonzero.
Backends make_backends(const BackendProfile& profile, std::shared_ptr<ResponseCache> cache,
                       std::size_t max_in_flight = 0, Clock* clock = nullptr);

}  // namespace instfmt
