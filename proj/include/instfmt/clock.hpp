#pragma once

#include <chrono>
#include <mutex>

namespace instfmt {

class Clock {
public:
    using duration = std::chrono::nanoseconds;
    using time_point = std::chrono::time_point<std::chrono::steady_clock, duration>;

    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_for(duration d) = 0;
};

class SteadyClock : public Clock {
public:
    time_point now() override;
    void sleep_for(duration d) override;
};

/// Process-wide steady clock.
Clock& system_clock();

/// Time only moves when someone sleeps.
class ManualClock : public Clock {
public:
    time_point now() override {
        std::lock_guard lk(mu_);
        return now_;
    }
    void sleep_for(duration d) override {
        std::lock_guard lk(mu_);
        if (d > duration::zero()) now_ += d;
        slept_ += d;
    }
    duration total_slept() {
        std::lock_guard lk(mu_);
        return slept_;
    }

private:
    std::mutex mu_;
    time_point now_{};
    duration slept_{};
};

}  // namespace instfmt
