#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "instfmt/backend.hpp"
#include "instfmt/errors.hpp"

#include <spdlog/spdlog.h>

namespace instfmt {

namespace {

class HttpTransport : public Transport {
public:
    HttpTransport(const std::string& base_url, const std::string& token, double timeout_seconds)
        : base_url_(base_url) {
        // Split "scheme://host[:port]/prefix" into origin and path prefix.
        const auto scheme_end = base_url.find("://");
        if (scheme_end == std::string::npos)
            throw ValidationError("base_url must include a scheme: " + base_url);
        const auto path_start = base_url.find('/', scheme_end + 3);
        origin_ = base_url.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();

        client_ = std::make_unique<httplib::Client>(origin_);
        if (!client_->is_valid()) throw ValidationError("unsupported endpoint URL: " + base_url);
        const auto secs = static_cast<time_t>(timeout_seconds);
        const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
        client_->set_connection_timeout(secs, usecs);
        client_->set_read_timeout(secs, usecs);
        client_->set_write_timeout(secs, usecs);
        if (!token.empty()) client_->set_bearer_token_auth(token);
    }

    HttpResponse post(std::string_view path, const std::string& body) override {
        std::lock_guard lk(mu_);
        auto res = client_->Post(prefix_ + std::string(path), body, "application/json");
        if (!res) {
            spdlog::debug("POST {}{} failed: {}", base_url_, path, httplib::to_string(res.error()));
            return {0, httplib::to_string(res.error())};
        }
        return {res->status, res->body};
    }

    std::string endpoint() const override { return base_url_; }

private:
    std::string base_url_, origin_, prefix_;
    std::mutex mu_;
    std::unique_ptr<httplib::Client> client_;
};

// httplib::Client is not safe for concurrent use; keep one per in-flight slot.
class PooledHttpTransport : public Transport {
public:
    PooledHttpTransport(std::string base_url, std::string token, double timeout)
        : base_url_(std::move(base_url)), token_(std::move(token)), timeout_(timeout) {
        HttpTransport probe(base_url_, token_, timeout_);  // validates the URL eagerly
    }

    HttpResponse post(std::string_view path, const std::string& body) override {
        std::unique_ptr<HttpTransport> t;
        {
            std::lock_guard lk(mu_);
            if (!idle_.empty()) {
                t = std::move(idle_.back());
                idle_.pop_back();
            }
        }
        if (!t) t = std::make_unique<HttpTransport>(base_url_, token_, timeout_);
        auto r = t->post(path, body);
        std::lock_guard lk(mu_);
        idle_.push_back(std::move(t));
        return r;
    }

    std::string endpoint() const override { return base_url_; }

private:
    std::string base_url_, token_;
    double timeout_;
    std::mutex mu_;
    std::vector<std::unique_ptr<HttpTransport>> idle_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url,
                                               const std::string& bearer_token,
                                               double timeout_seconds) {
    return std::make_shared<PooledHttpTransport>(base_url, bearer_token, timeout_seconds);
}

}  // namespace instfmt
