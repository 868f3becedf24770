#include "octseg/common.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace octseg {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("OCTSEG_LOG");
        if (!env) return LogLevel::info;
        if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
        if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

namespace {

void vlog(const char* tag, const char* fmt, va_list args) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::fprintf(stderr, "[octseg %s] ", tag);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

}  // namespace

void log_warn(const char* fmt, ...) {
    if (log_level() < LogLevel::warn) return;
    va_list args;
    va_start(args, fmt);
    vlog("warn", fmt, args);
    va_end(args);
}

void log_info(const char* fmt, ...) {
    if (log_level() < LogLevel::info) return;
    va_list args;
    va_start(args, fmt);
    vlog("info", fmt, args);
    va_end(args);
}

void log_debug(const char* fmt, ...) {
    if (log_level() < LogLevel::debug) return;
    va_list args;
    va_start(args, fmt);
    vlog("debug", fmt, args);
    va_end(args);
}

unsigned thread_count() {
    if (const char* env = std::getenv("OCTSEG_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1u;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    unsigned workers = threads;
    if (workers > count) workers = static_cast<unsigned>(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::string format_string(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    va_list copy;
    va_copy(copy, args);
    int n = std::vsnprintf(nullptr, 0, fmt, copy);
    va_end(copy);
    std::string out;
    if (n > 0) {
        out.resize(static_cast<std::size_t>(n));
        std::vsnprintf(out.data(), out.size() + 1, fmt, args);
    }
    va_end(args);
    return out;
}

}  // namespace octseg
