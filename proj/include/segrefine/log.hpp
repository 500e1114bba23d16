#pragma once

// Structured progress log: one JSON object per line on stderr, filtered by
// SEGREFINE_LOG = quiet | info | debug (default info).

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

#include "json.hpp"

namespace segrefine {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

inline LogLevel log_level_from_env() {
    const char* v = std::getenv("SEGREFINE_LOG");
    if (!v) return LogLevel::Info;
    const std::string_view s(v);
    if (s == "quiet") return LogLevel::Quiet;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

class Logger {
public:
    explicit Logger(LogLevel level = log_level_from_env(), std::ostream& os = std::cerr)
        : level_(level), os_(os) {}

    LogLevel level() const noexcept { return level_; }
    bool enabled(LogLevel l) const noexcept { return l != LogLevel::Quiet && l <= level_; }

    void emit(LogLevel l, std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
        if (!enabled(l)) return;
        fields["event"] = event;
        const std::string line = fields.dump();
        std::lock_guard lock(mu_);
        os_ << line << '\n';
    }

private:
    LogLevel level_;
    std::ostream& os_;
    std::mutex mu_;
};

}  // namespace segrefine
