#include "instfmt/backend.hpp"

#include "instfmt/errors.hpp"
#include "instfmt/hashing.hpp"
#include "instfmt/jsonl.hpp"
#include "instfmt/rng.hpp"
#include "instfmt/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace instfmt {

void CompletionRequest::validate() const {
    if (max_tokens < 1) throw ValidationError("completion request: max_tokens must be >= 1");
    if (!(temperature >= 0.0)) throw ValidationError("completion request: temperature must be >= 0");
    if (n < 1) throw ValidationError("completion request: n must be >= 1");
}

void ScoreRequest::validate() const {
    if (continuation.empty()) throw ValidationError("score request: empty continuation");
}

std::string truncate_at_stop(std::string text, const std::vector<std::string>& stop) {
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) continue;
        const auto pos = text.find(s);
        if (pos != std::string::npos) cut = std::min(cut, pos);
    }
    text.resize(cut);
    return text;
}

// ---------------------------------------------------------------------------
// Clock

Clock::time_point SteadyClock::now() {
    return std::chrono::time_point_cast<duration>(std::chrono::steady_clock::now());
}

void SteadyClock::sleep_for(duration d) {
    if (d > duration::zero()) std::this_thread::sleep_for(d);
}

Clock& system_clock() {
    static SteadyClock clock;
    return clock;
}

// ---------------------------------------------------------------------------
// Mock transport

namespace {

struct TransferPromptView {
    std::vector<std::string> targets;
    std::optional<std::string> final_source;
};

TransferPromptView view_transfer_prompt(std::string_view prompt) {
    constexpr std::string_view kA = "Task description A:";
    constexpr std::string_view kB = "\nTask description B:";
    TransferPromptView v;
    std::size_t start = 0;
    std::vector<std::string_view> blocks;
    while (true) {
        const auto pos = prompt.find("\n\nExample ", start);
        blocks.push_back(prompt.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 2;
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto block = blocks[i];
        const auto a = block.find(kA);
        const auto b = block.find(kB);
        if (a == std::string_view::npos || b == std::string_view::npos || b < a) continue;
        const auto target = trim(block.substr(b + kB.size()));
        if (i + 1 == blocks.size() && target.empty())
            v.final_source = std::string(trim(block.substr(a + kA.size(), b - a - kA.size())));
        else if (!target.empty())
            v.targets.emplace_back(target);
    }
    return v;
}

double hashed_logprob(std::uint64_t state) {
    return -(0.02 + static_cast<double>(mix64(state) % 3000) / 1000.0);
}

std::string excerpt(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

}  // namespace

MockTransport::MockTransport(MockOptions opts, std::string name)
    : opts_(std::move(opts)), name_(std::move(name)) {}

std::vector<std::string> MockTransport::tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

std::string MockTransport::complete_one(const std::string& prompt, std::uint64_t seed) const {
    if (!opts_.scripted.empty()) {
        if (auto it = opts_.scripted.find(sha256_hex(prompt)); it != opts_.scripted.end())
            return it->second;
    }
    switch (opts_.completion) {
        case MockCompletionMode::Fixed: return opts_.fixed_text;
        case MockCompletionMode::Echo: {
            auto v = view_transfer_prompt(prompt);
            return " " + (v.final_source ? *v.final_source : prompt);
        }
        case MockCompletionMode::Seeded: {
            const std::uint64_t h = mix64(fnv1a(prompt) ^ mix64(seed));
            if (opts_.garbage_every != 0 && h % opts_.garbage_every == 0)
                return " Sorry, I am not able to rewrite this task description.";
            auto v = view_transfer_prompt(prompt);
            if (v.targets.empty()) return " mock completion " + std::to_string(h % 100000);
            return " " + v.targets[(h >> 8) % v.targets.size()];
        }
    }
    return {};
}

HttpResponse MockTransport::post(std::string_view path, const std::string& body) {
    ++calls_;
    json req;
    try {
        req = json::parse(body);
    } catch (const json::parse_error&) {
        return {400, R"({"error":"bad json"})"};
    }
    if (!path.ends_with("/completions")) return {404, R"({"error":"not found"})"};
    const std::string prompt = req.value("prompt", std::string());
    const bool echo = req.value("echo", false);
    json choices = json::array();
    if (echo) {
        const auto tokens = tokenize(prompt);
        json toks = json::array(), lps = json::array(), offs = json::array();
        std::uint64_t state = 14695981039346656037ull;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            state = fnv1a(tokens[i], state);
            toks.push_back(tokens[i]);
            offs.push_back(offset);
            if (i == 0)
                lps.push_back(nullptr);
            else if (opts_.scoring == MockScoreMode::Uniform)
                lps.push_back(opts_.uniform_logprob);
            else
                lps.push_back(hashed_logprob(state));
            offset += tokens[i].size();
        }
        choices.push_back({{"index", 0},
                           {"text", prompt},
                           {"logprobs", {{"tokens", toks}, {"token_logprobs", lps}, {"text_offset", offs}}}});
    } else {
        const std::size_t n = req.value("n", std::size_t{1});
        const std::uint64_t seed = req.value("seed", std::uint64_t{0});
        std::vector<std::string> stop;
        if (auto it = req.find("stop"); it != req.end() && it->is_array())
            for (const auto& s : *it) stop.push_back(s.get<std::string>());
        for (std::size_t i = 0; i < n; ++i)
            choices.push_back({{"index", i}, {"text", truncate_at_stop(complete_one(prompt, seed + i), stop)}});
    }
    json resp = {{"id", "mock-" + sha256_hex(body).substr(0, 12)},
                 {"object", "text_completion"},
                 {"model", req.value("model", std::string("mock"))},
                 {"choices", choices}};
    return {200, resp.dump()};
}

// ---------------------------------------------------------------------------
// Dispatch controls

RateLimiter::RateLimiter(double rate_per_second, Clock& clock)
    : rate_(static_cast<std::size_t>(std::max(1.0, std::floor(rate_per_second)))), clock_(clock) {}

void RateLimiter::acquire() {
    using namespace std::chrono;
    while (true) {
        Clock::duration wait{};
        {
            std::lock_guard lk(mu_);
            const auto now = clock_.now();
            while (!window_.empty() && window_.front() <= now - seconds(1)) window_.pop_front();
            if (window_.size() < rate_) {
                window_.push_back(now);
                history_.push_back(now);
                return;
            }
            wait = window_.front() + seconds(1) - now;
        }
        clock_.sleep_for(wait);
    }
}

std::vector<Clock::time_point> RateLimiter::history() const {
    std::lock_guard lk(mu_);
    return history_;
}

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(std::max<std::size_t>(1, limit)) {}

InFlightLimiter::Guard::Guard(InFlightLimiter& l) : l_(l) {
    std::unique_lock lk(l_.mu_);
    l_.cv_.wait(lk, [&] { return l_.active_ < l_.limit_; });
    ++l_.active_;
    l_.max_observed_ = std::max(l_.max_observed_, l_.active_);
}

InFlightLimiter::Guard::~Guard() {
    {
        std::lock_guard lk(l_.mu_);
        --l_.active_;
    }
    l_.cv_.notify_one();
}

std::size_t InFlightLimiter::max_observed() const {
    std::lock_guard lk(mu_);
    return max_observed_;
}

std::chrono::milliseconds RetryPolicy::backoff(unsigned retry_number) const {
    double ms = static_cast<double>(initial_backoff.count()) *
                std::pow(multiplier, static_cast<double>(retry_number == 0 ? 0 : retry_number - 1));
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_ / "objects");
}

std::filesystem::path ResponseCache::object_path(const std::string& key) const {
    return dir_ / "objects" / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
    {
        std::shared_lock lk(mu_);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    const auto path = object_path(key);
    std::string body;
    {
        std::shared_lock lk(mu_);
        if (!std::filesystem::exists(path)) return std::nullopt;
        try {
            body = json::parse(read_file(path)).at("response").get<std::string>();
        } catch (const std::exception& e) {
            spdlog::warn("cache: ignoring unreadable entry {}: {}", path.string(), e.what());
            return std::nullopt;
        }
    }
    std::unique_lock lk(mu_);
    memo_.emplace(key, body);
    return body;
}

void ResponseCache::put(const std::string& key, std::string_view kind, const std::string& endpoint,
                        const json& request, const std::string& response_body) {
    std::unique_lock lk(mu_);
    if (memo_.contains(key)) return;
    const auto path = object_path(key);
    std::filesystem::create_directories(path.parent_path());
    const json entry = {{"key", key}, {"kind", kind}, {"endpoint", endpoint},
                        {"request", request}, {"response", response_body}};
    auto tmp = path;
    tmp += ".tmp";
    write_file(tmp, entry.dump(1) + "\n");
    std::filesystem::rename(tmp, path);
    std::ofstream manifest(dir_ / "manifest.jsonl", std::ios::app);
    manifest << json{{"key", key}, {"kind", kind}, {"endpoint", endpoint}}.dump() << '\n';
    memo_.emplace(key, response_body);
}

// ---------------------------------------------------------------------------
// Client

EndpointConfig EndpointConfig::from_json(const json& j) {
    EndpointConfig c;
    c.kind = j.value("kind", std::string("http"));
    if (c.kind != "http" && c.kind != "mock")
        throw ValidationError("endpoint kind must be 'http' or 'mock', got '" + c.kind + "'");
    c.base_url = j.value("base_url", std::string());
    c.api_key_env = j.value("api_key_env", std::string());
    c.model = j.value("model", c.kind == "mock" ? std::string("mock") : std::string());
    c.rate_limit = j.value("rate_limit", 0.0);
    c.max_in_flight = j.value("max_in_flight", std::size_t{4});
    c.timeout_seconds = j.value("timeout_seconds", 120.0);
    c.supports_logprobs = j.value("supports_logprobs", true);
    if (auto r = j.find("retry"); r != j.end()) {
        c.retry.max_attempts = r->value("max_attempts", c.retry.max_attempts);
        c.retry.initial_backoff = std::chrono::milliseconds(
            r->value("initial_backoff_ms", static_cast<std::int64_t>(c.retry.initial_backoff.count())));
        c.retry.multiplier = r->value("multiplier", c.retry.multiplier);
        c.retry.max_backoff = std::chrono::milliseconds(
            r->value("max_backoff_ms", static_cast<std::int64_t>(c.retry.max_backoff.count())));
    }
    if (c.retry.max_attempts < 1) throw ValidationError("retry.max_attempts must be >= 1");
    if (c.rate_limit < 0) throw ValidationError("rate_limit must be >= 0");
    if (c.max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
    if (auto m = j.find("mock"); m != j.end()) {
        const auto mode = m->value("completion", std::string("seeded"));
        if (mode == "seeded") c.mock.completion = MockCompletionMode::Seeded;
        else if (mode == "echo") c.mock.completion = MockCompletionMode::Echo;
        else if (mode == "fixed") c.mock.completion = MockCompletionMode::Fixed;
        else throw ValidationError("mock.completion must be seeded, echo or fixed");
        const auto scoring = m->value("scoring", std::string("hashed"));
        if (scoring == "hashed") c.mock.scoring = MockScoreMode::Hashed;
        else if (scoring == "uniform") c.mock.scoring = MockScoreMode::Uniform;
        else throw ValidationError("mock.scoring must be hashed or uniform");
        c.mock.uniform_logprob = m->value("uniform_logprob", c.mock.uniform_logprob);
        c.mock.fixed_text = m->value("fixed_text", std::string());
        c.mock.garbage_every = m->value("garbage_every", c.mock.garbage_every);
    }
    if (c.kind == "http" && c.base_url.empty()) throw ValidationError("http endpoint needs base_url");
    return c;
}

EndpointClient::EndpointClient(EndpointConfig config, std::shared_ptr<Transport> transport,
                               std::shared_ptr<ResponseCache> cache, Clock* clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      clock_(clock ? *clock : system_clock()),
      in_flight_(config_.max_in_flight) {
    if (config_.rate_limit > 0) limiter_ = std::make_unique<RateLimiter>(config_.rate_limit, clock_);
}

std::string EndpointClient::next_request_id(std::string_view kind) {
    return std::string(kind) + "-" + std::to_string(++ids_);
}

std::string EndpointClient::call(std::string_view path, std::string_view kind, const json& body,
                                 const std::string& request_id) {
    const std::string payload = body.dump();
    const std::string key = sha256_hex(transport_->endpoint() + "\n" + std::string(path) + "\n" + payload);
    if (cache_) {
        if (auto hit = cache_->get(key)) {
            ++hits_;
            return *hit;
        }
    }

    HttpResponse resp;
    for (unsigned attempt = 1;; ++attempt) {
        if (limiter_) limiter_->acquire();
        {
            InFlightLimiter::Guard guard(in_flight_);
            ++network_;
            resp = transport_->post(path, payload);
        }
        if (resp.status >= 200 && resp.status < 300) break;
        const bool retryable = resp.status == 0 || resp.status == 408 || resp.status == 429 ||
                               resp.status >= 500;
        if (!retryable || attempt >= config_.retry.max_attempts) {
            throw EndpointError("endpoint " + transport_->endpoint() + " failed for request " +
                                    request_id + " after " + std::to_string(attempt) +
                                    " attempt(s): status " + std::to_string(resp.status) + " " +
                                    excerpt(resp.body),
                                request_id, resp.status);
        }
        ++retries_;
        const auto wait = config_.retry.backoff(attempt);
        spdlog::debug("{}: status {}, retry {} in {} ms", request_id, resp.status, attempt, wait.count());
        clock_.sleep_for(wait);
    }

    if (!json::accept(resp.body)) {
        throw ProtocolError("endpoint " + transport_->endpoint() + " returned malformed JSON for " +
                            request_id + ": " + excerpt(resp.body));
    }
    if (cache_) cache_->put(key, kind, transport_->endpoint(), body, resp.body);
    return resp.body;
}

std::vector<std::string> EndpointClient::complete(const CompletionRequest& request) {
    request.validate();
    const std::string id = request.request_id.empty() ? next_request_id("complete") : request.request_id;
    json body = {{"model", config_.model},   {"prompt", request.prompt},
                 {"max_tokens", request.max_tokens}, {"temperature", request.temperature},
                 {"n", request.n}};
    if (!request.stop.empty()) body["stop"] = request.stop;
    if (request.seed) body["seed"] = *request.seed;

    const std::string raw = call("/completions", "complete", body, id);
    std::vector<std::string> texts(request.n);
    std::vector<bool> seen(request.n, false);
    try {
        const json resp = json::parse(raw);
        const auto& choices = resp.at("choices");
        if (!choices.is_array() || choices.size() != request.n)
            throw ProtocolError("expected " + std::to_string(request.n) + " choices");
        for (std::size_t i = 0; i < choices.size(); ++i) {
            const auto& c = choices[i];
            const std::size_t idx = c.value("index", i);
            if (idx >= request.n || seen[idx]) throw ProtocolError("bad choice index");
            seen[idx] = true;
            texts[idx] = truncate_at_stop(c.at("text").get<std::string>(), request.stop);
        }
    } catch (const json::exception& e) {
        throw ProtocolError("completion response for " + id + " does not follow the schema (" +
                            e.what() + "): " + excerpt(raw));
    } catch (const ProtocolError& e) {
        throw ProtocolError("completion response for " + id + ": " + e.what() + ": " + excerpt(raw));
    }
    return texts;
}

ScoreResponse EndpointClient::score(const ScoreRequest& request) {
    request.validate();
    if (!config_.supports_logprobs)
        throw CapabilityError("endpoint " + transport_->endpoint() + " does not support logprobs");
    const std::string id = request.request_id.empty() ? next_request_id("score") : request.request_id;
    const std::string full = request.prefix + request.continuation;
    const json body = {{"model", config_.model}, {"prompt", full}, {"max_tokens", 0},
                       {"temperature", 0},        {"echo", true},  {"logprobs", 0}};
    const std::string raw = call("/completions", "score", body, id);

    ScoreResponse out;
    try {
        const json resp = json::parse(raw);
        const auto& lp = resp.at("choices").at(0).at("logprobs");
        const auto& tokens = lp.at("tokens");
        const auto& logprobs = lp.at("token_logprobs");
        const auto& offsets = lp.at("text_offset");
        if (tokens.size() != logprobs.size() || tokens.size() != offsets.size())
            throw ProtocolError("logprob arrays differ in length");
        const std::size_t boundary = request.prefix.size();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto tok = tokens[i].get<std::string>();
            const auto off = offsets[i].get<std::size_t>();
            if (off + tok.size() <= boundary) continue;
            if (off < boundary) out.boundary_adjusted = true;
            if (logprobs[i].is_null()) {
                // The very first token of a prompt has no conditional probability.
                if (i == 0) {
                    out.boundary_adjusted = true;
                    continue;
                }
                throw ProtocolError("null logprob inside continuation");
            }
            double v = logprobs[i].get<double>();
            if (!std::isfinite(v) || v > 1e-6) throw ProtocolError("invalid logprob " + std::to_string(v));
            out.token_logprobs.push_back(std::min(v, 0.0));
            out.token_texts.push_back(tok);
        }
    } catch (const json::exception& e) {
        throw ProtocolError("score response for " + id + " does not follow the schema (" + e.what() +
                            "): " + excerpt(raw));
    } catch (const ProtocolError& e) {
        throw ProtocolError("score response for " + id + ": " + e.what() + ": " + excerpt(raw));
    }
    if (out.token_logprobs.empty())
        throw ProtocolError("score response for " + id + " has no continuation tokens");
    std::string joined;
    for (const auto& t : out.token_texts) joined += t;
    if (joined != request.continuation) out.boundary_adjusted = true;
    return out;
}

ClientStats EndpointClient::stats() const {
    return {network_.load(), hits_.load(), retries_.load()};
}

// ---------------------------------------------------------------------------
// Profiles

std::map<std::string, BackendProfile> builtin_profiles() {
    std::map<std::string, BackendProfile> out;
    BackendProfile mock{.name = "mock", .completion = {}, .scoring = {}};
    mock.completion.model = "mock-completion";
    mock.scoring.model = "mock-scorer";
    out["mock"] = mock;

    BackendProfile echo = mock;
    echo.name = "mock-echo";
    echo.completion.mock.completion = MockCompletionMode::Echo;
    echo.scoring.mock.scoring = MockScoreMode::Uniform;
    out["mock-echo"] = echo;
    return out;
}

std::map<std::string, BackendProfile> load_profiles(const json& config) {
    auto out = builtin_profiles();
    const auto it = config.find("profiles");
    if (it == config.end()) return out;
    if (!it->is_object()) throw ValidationError("config: 'profiles' must be an object");
    for (const auto& [name, p] : it->items()) {
        BackendProfile prof;
        prof.name = name;
        if (!p.contains("completion")) throw ValidationError("profile " + name + ": missing 'completion'");
        prof.completion = EndpointConfig::from_json(p.at("completion"));
        prof.scoring = EndpointConfig::from_json(p.contains("scoring") ? p.at("scoring") : p.at("completion"));
        out[name] = std::move(prof);
    }
    return out;
}

namespace {

std::shared_ptr<Transport> make_transport(const EndpointConfig& c, const std::string& role) {
    if (c.kind == "mock") return std::make_shared<MockTransport>(c.mock, "mock://" + role + "/" + c.model);
    std::string token;
    if (!c.api_key_env.empty()) {
        const char* v = std::getenv(c.api_key_env.c_str());
        if (!v) throw ValidationError("environment variable " + c.api_key_env + " is not set");
        token = v;
    }
    return make_http_transport(c.base_url, token, c.timeout_seconds);
}

}  // namespace

Backends make_backends(const BackendProfile& profile, std::shared_ptr<ResponseCache> cache,
                       std::size_t max_in_flight, Clock* clock) {
    if (!profile.scoring.supports_logprobs)
        throw CapabilityError("profile " + profile.name +
                              ": scoring endpoint does not support echo logprobs");
    auto completion_cfg = profile.completion;
    auto scoring_cfg = profile.scoring;
    if (max_in_flight) completion_cfg.max_in_flight = scoring_cfg.max_in_flight = max_in_flight;
    Backends b;
    b.completion_transport = make_transport(completion_cfg, "completion");
    b.scoring_transport = make_transport(scoring_cfg, "scoring");
    b.completion = std::make_shared<EndpointClient>(completion_cfg, b.completion_transport, cache, clock);
    b.scoring = std::make_shared<EndpointClient>(scoring_cfg, b.scoring_transport, cache, clock);
    return b;
}

}  // namespace instfmt
