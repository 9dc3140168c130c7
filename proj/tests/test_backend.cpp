#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "instfmt/backend.hpp"
#include "instfmt/errors.hpp"
#include "instfmt/hashing.hpp"
#include "support/tempdir.hpp"

#include <doctest.h>

#include <cmath>
#include <thread>

using namespace instfmt;
using instfmt::testing::TempDir;

namespace {

EndpointConfig mock_config() {
    EndpointConfig c;
    c.retry.initial_backoff = std::chrono::milliseconds(10);
    return c;
}

/// Transport that replays a scripted list of responses, then repeats the last.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(std::vector<HttpResponse> script) : script_(std::move(script)) {}
    HttpResponse post(std::string_view, const std::string&) override {
        std::lock_guard lk(mu_);
        ++calls;
        auto r = script_[std::min(next_, script_.size() - 1)];
        ++next_;
        return r;
    }
    std::string endpoint() const override { return "scripted://"; }
    std::size_t calls = 0;

private:
    std::mutex mu_;
    std::vector<HttpResponse> script_;
    std::size_t next_ = 0;
};

const std::string kOkCompletion = R"({"choices":[{"index":0,"text":"Task description B: ok"}]})";

}  // namespace

TEST_CASE("truncate_at_stop cuts at the earliest stop sequence") {
    CHECK(truncate_at_stop("abc\n\nExample 5.\nxyz", {"\n\nExample "}) == "abc");
    CHECK(truncate_at_stop("a STOP b END", {"END", "STOP"}) == "a ");
    CHECK(truncate_at_stop("plain", {}) == "plain");
}

TEST_CASE("mock completion from a scripted prompt map issues no network") {
    MockOptions opts;
    opts.completion = MockCompletionMode::Fixed;
    opts.scripted[sha256_hex("hello")] = "Task description B: scripted";
    auto transport = std::make_shared<MockTransport>(opts);
    EndpointClient client(mock_config(), transport);
    CompletionRequest req{.prompt = "hello", .max_tokens = 16, .temperature = 1.0, .n = 1, .stop = {}, .seed = 3, .request_id = {}};
    CHECK(client.complete(req) == std::vector<std::string>{"Task description B: scripted"});
    CHECK(transport->calls() == 1);
}

TEST_CASE("completion n>1 yields n texts") {
    MockOptions opts;
    opts.completion = MockCompletionMode::Fixed;
    opts.fixed_text = "same";
    EndpointClient client(mock_config(), std::make_shared<MockTransport>(opts));
    CompletionRequest req;
    req.prompt = "p";
    req.n = 4;
    CHECK(client.complete(req) == std::vector<std::string>(4, "same"));
    req.n = 0;
    CHECK_THROWS_AS(client.complete(req), ValidationError);
}

TEST_CASE("repeated identical request is served from the cache") {
    TempDir dir;
    auto cache = std::make_shared<ResponseCache>(dir.path());
    auto transport = std::make_shared<MockTransport>();
    EndpointClient client(mock_config(), transport, cache);
    CompletionRequest req;
    req.prompt = "Example 1.\nTask description A: x\nTask description B: y\n\nExample 2.\nTask description A: z\nTask description B:";
    req.seed = 7;
    const auto first = client.complete(req);
    const auto second = client.complete(req);
    CHECK(first == second);
    CHECK(transport->calls() == 1);
    CHECK(client.stats().network_requests == 1);
    CHECK(client.stats().cache_hits == 1);

    // A fresh process reading the same directory sees a warm cache.
    auto cache2 = std::make_shared<ResponseCache>(dir.path());
    auto transport2 = std::make_shared<MockTransport>(MockOptions{}, transport->endpoint());
    EndpointClient replay(mock_config(), transport2, cache2);
    CHECK(replay.complete(req) == first);
    CHECK(transport2->calls() == 0);
    CHECK(std::filesystem::exists(dir.path() / "manifest.jsonl"));

    // Different seed, different key.
    req.seed = 8;
    client.complete(req);
    CHECK(transport->calls() == 2);
}

TEST_CASE("mock scorer assigns ln 0.5 per continuation token") {
    MockOptions opts;
    opts.scoring = MockScoreMode::Uniform;
    auto transport = std::make_shared<MockTransport>(opts);
    TempDir dir;
    EndpointClient client(mock_config(), transport, std::make_shared<ResponseCache>(dir.path()));
    const auto r = client.score({.prefix = "Input: x\nOutput:", .continuation = " POS NEG", .request_id = {}});
    REQUIRE(r.token_logprobs.size() == 2);
    CHECK(r.token_logprobs[0] == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(r.token_logprobs[1] == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(r.token_texts == std::vector<std::string>{" POS", " NEG"});
    CHECK_FALSE(r.boundary_adjusted);

    CHECK_THROWS_AS(client.score({.prefix = "a", .continuation = "", .request_id = {}}), ValidationError);

    // Same continuation, new prefix: new cache key, new request.
    client.score({.prefix = "Input: y\nOutput:", .continuation = " POS NEG", .request_id = {}});
    CHECK(transport->calls() == 2);
    client.score({.prefix = "Input: y\nOutput:", .continuation = " POS NEG", .request_id = {}});
    CHECK(transport->calls() == 2);
}

TEST_CASE("score flags tokens that straddle the prefix boundary") {
    EndpointClient client(mock_config(), std::make_shared<MockTransport>());
    const auto r = client.score({.prefix = "x a", .continuation = "b c", .request_id = {}});
    CHECK(r.token_texts == std::vector<std::string>{" ab", " c"});
    CHECK(r.boundary_adjusted);
}

TEST_CASE("scoring capability is checked when backends are built") {
    auto profile = builtin_profiles().at("mock");
    profile.scoring.supports_logprobs = false;
    CHECK_THROWS_AS(make_backends(profile, nullptr), CapabilityError);
}

TEST_CASE("profiles load from config") {
    const json cfg = json::parse(R"({
      "profiles": {
        "local": {
          "completion": {"kind": "http", "base_url": "http://127.0.0.1:8000/v1", "model": "m",
                          "rate_limit": 5, "max_in_flight": 2,
                          "retry": {"max_attempts": 3, "initial_backoff_ms": 100}},
          "scoring": {"kind": "mock", "mock": {"scoring": "uniform", "uniform_logprob": -1.0}}
        }
      }
    })");
    const auto profiles = load_profiles(cfg);
    CHECK(profiles.contains("mock"));
    CHECK(profiles.contains("mock-echo"));
    const auto& local = profiles.at("local");
    CHECK(local.completion.kind == "http");
    CHECK(local.completion.rate_limit == 5.0);
    CHECK(local.completion.retry.max_attempts == 3);
    CHECK(local.scoring.mock.scoring == MockScoreMode::Uniform);
    CHECK_THROWS_AS(load_profiles(json::parse(R"({"profiles":{"x":{"completion":{"kind":"http"}}}})")),
                    ValidationError);
}

TEST_CASE("HTTP 429 twice then 200 succeeds after two retries") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits++ < 2) {
            res.status = 429;
            res.set_content(R"({"error":"rate limited"})", "application/json");
            return;
        }
        CHECK(req.get_header_value("Authorization") == "Bearer sekrit");
        res.set_content(kOkCompletion, "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ManualClock clock;
    auto cfg = mock_config();
    cfg.kind = "http";
    cfg.retry.initial_backoff = std::chrono::milliseconds(250);
    auto transport = make_http_transport("http://127.0.0.1:" + std::to_string(port) + "/v1", "sekrit", 5.0);
    EndpointClient client(cfg, transport, nullptr, &clock);
    CompletionRequest req;
    req.prompt = "p";
    CHECK(client.complete(req) == std::vector<std::string>{"Task description B: ok"});
    CHECK(client.stats().retries == 2);
    CHECK(client.stats().network_requests == 3);
    CHECK(hits == 3);
    // Exponential backoff: 250 ms then 500 ms.
    CHECK(clock.total_slept() == std::chrono::milliseconds(750));

    server.stop();
    th.join();
}

TEST_CASE("non-retryable and exhausted failures raise EndpointError with the request id") {
    ManualClock clock;
    auto cfg = mock_config();
    cfg.retry.max_attempts = 3;
    CompletionRequest req;
    req.prompt = "p";
    req.request_id = "req-42";

    auto bad = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{400, "nope"}});
    EndpointClient c1(cfg, bad, nullptr, &clock);
    try {
        c1.complete(req);
        FAIL("expected EndpointError");
    } catch (const EndpointError& e) {
        CHECK(e.request_id() == "req-42");
        CHECK(e.status() == 400);
    }
    CHECK(bad->calls == 1);

    auto down = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{503, "down"}});
    EndpointClient c2(cfg, down, nullptr, &clock);
    CHECK_THROWS_AS(c2.complete(req), EndpointError);
    CHECK(down->calls == 3);
    CHECK(c2.stats().retries == 2);
}

TEST_CASE("malformed responses raise ProtocolError with an excerpt") {
    auto garbled = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{200, "<html>oops</html>"}});
    EndpointClient c(mock_config(), garbled);
    CompletionRequest req;
    req.prompt = "p";
    try {
        c.complete(req);
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(std::string(e.what()).find("<html>oops") != std::string::npos);
    }
    auto wrong_shape = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{200, R"({"choices":[]})"}});
    EndpointClient c2(mock_config(), wrong_shape);
    CHECK_THROWS_AS(c2.complete(req), ProtocolError);
}

TEST_CASE("rate limiter: no one-second window sees more than r dispatches") {
    ManualClock clock;
    RateLimiter limiter(3.0, clock);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 10; ++i) limiter.acquire();
        });
    for (auto& t : threads) t.join();
    auto h = limiter.history();
    REQUIRE(h.size() == 40);
    std::sort(h.begin(), h.end());
    for (std::size_t i = 0; i < h.size(); ++i) {
        std::size_t in_window = 0;
        for (std::size_t j = i; j < h.size() && h[j] < h[i] + std::chrono::seconds(1); ++j) ++in_window;
        CHECK(in_window <= 3);
    }
    CHECK(h.back() - h.front() >= std::chrono::seconds(13));
}

TEST_CASE("client respects the in-flight bound") {
    class SlowTransport : public Transport {
    public:
        HttpResponse post(std::string_view, const std::string&) override {
            std::this_thread::sleep_for(std::chrono::milliseconds(15));
            return {200, kOkCompletion};
        }
        std::string endpoint() const override { return "slow://"; }
    };
    auto cfg = mock_config();
    cfg.max_in_flight = 2;
    EndpointClient client(cfg, std::make_shared<SlowTransport>());
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t)
        threads.emplace_back([&, t] {
            CompletionRequest req;
            req.prompt = "p" + std::to_string(t);
            client.complete(req);
        });
    for (auto& t : threads) t.join();
    CHECK(client.max_in_flight_observed() <= 2);
    CHECK(client.stats().network_requests == 6);
}

TEST_CASE("echo mock returns the final source text of a transfer prompt") {
    MockOptions opts;
    opts.completion = MockCompletionMode::Echo;
    EndpointClient client(mock_config(), std::make_shared<MockTransport>(opts));
    CompletionRequest req;
    req.prompt = "Example 1.\nTask description A: s1\nTask description B: t1\n\nExample 2.\nTask description A: the new one\nTask description B:";
    CHECK(client.complete(req) == std::vector<std::string>{" the new one"});
}
